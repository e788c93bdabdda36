#pragma once

#include <string>
#include <vector>

namespace ulbench {

// Pinned word tokenization rule, shared by the vocabulary builder, the
// ROUGE scorer and the corpus frequency report: ASCII case-fold, keep
// [a-z0-9'] as word characters, everything else separates. "Montenegro's"
// stays a single token; hyphens and punctuation split.
std::vector<std::string> word_tokens(const std::string& text);

// Fixed 50-entry English function-word list used by the frequency report.
const std::vector<std::string>& stopwords();

bool is_stopword(const std::string& token);

}  // namespace ulbench
