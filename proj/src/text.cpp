#include "ulbench/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace ulbench {

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        char lc = static_cast<char>(std::tolower(c));
        if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9') || lc == '\'') {
            cur.push_back(lc);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> words = {
        "the", "a",     "an",    "and",   "or",    "but",  "of",    "in",   "on",    "at",
        "to",  "for",   "with",  "by",    "from",  "as",   "is",    "are",  "was",   "were",
        "be",  "been",  "being", "it",    "its",   "this", "that",  "these", "those", "he",
        "she", "they",  "them",  "his",   "her",   "their", "who",  "what", "which", "where",
        "when", "how",  "why",   "does",  "did",   "do",   "has",   "have", "had",   "not",
    };
    return words;
}

bool is_stopword(const std::string& token) {
    static const std::unordered_set<std::string> set(stopwords().begin(), stopwords().end());
    return set.count(token) > 0;
}

}  // namespace ulbench
