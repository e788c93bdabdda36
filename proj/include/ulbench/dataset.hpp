#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ulbench {

// One fictitious author, fully described by values drawn from the
// generator's closed attribute pools.
struct AuthorProfile {
    std::string author_id;
    std::string name;
    std::string birthplace;
    std::string gender;
    int birth_year = 0;
    std::string genre;
    std::string award;
    std::pair<std::string, std::string> parent_occupations;  // father, mother
    std::vector<std::string> book_titles;
};

// One question with its ground-truth answer, a paraphrase of the answer,
// and five same-template factually-perturbed answers.
struct QARecord {
    std::string record_id;
    std::string author_id;
    std::string question;
    std::string answer;
    std::string paraphrased_answer;
    std::vector<std::string> perturbed_answers;  // exactly 5
};

struct Corpus {
    std::vector<AuthorProfile> profiles;
    std::vector<QARecord> records;
    int records_per_author = 20;

    const AuthorProfile& profile_of(const std::string& author_id) const;
};

// Entity-level partition of the corpus authors into forget and retain sets.
struct SplitSpec {
    double forget_fraction = 0.0;  // one of 0.01, 0.05, 0.10
    std::set<std::string> forget_author_ids;
    std::set<std::string> retain_author_ids;

    bool is_forget(const std::string& author_id) const {
        return forget_author_ids.count(author_id) > 0;
    }
};

// Multiple-choice record used by the Real Authors and World Facts sets.
struct MCRecord {
    std::string question;
    std::string answer;
    std::vector<std::string> choices;
    int correct_index = 0;
};

// The four evaluation datasets.
struct EvalSuite {
    std::vector<QARecord> forget;
    std::vector<QARecord> retain;
    std::vector<MCRecord> real_authors;
    std::vector<MCRecord> world_facts;
};

// Deterministic templated generator: n_authors profiles x 20 QA records.
// Identical (n_authors, seed) yields bit-identical output. Attribute pools
// are sampled without replacement until exhausted; asking for more authors
// than the distinct-name pool holds raises CapacityError.
Corpus generate_corpus(int n_authors, std::uint64_t seed);

// Capacity of the distinct full-name pool.
std::size_t name_pool_capacity();

// Seeded entity-level split. The forget author count is
// round-half-up(n_authors * forget_fraction); a count of zero is an
// InvalidSplitError. forget_fraction must be one of {0.01, 0.05, 0.10}.
SplitSpec make_split(const Corpus& corpus, double forget_fraction, std::uint64_t seed);

// Assembles the four evaluation datasets: forget/retain straight from the
// split, Real Authors and World Facts loaded from MCRecord files.
EvalSuite build_eval_suite(const Corpus& corpus, const SplitSpec& split,
                           const std::string& real_authors_path,
                           const std::string& world_facts_path);

// Diversity diagnostic: case-folded word counts over all answers, stopwords
// excluded, ranked by count desc then token asc, truncated to top_k.
std::vector<std::pair<std::string, std::size_t>> word_frequency_report(const Corpus& corpus,
                                                                       int top_k);

// --- line-oriented file formats -------------------------------------------

void write_corpus(const Corpus& corpus, const std::string& records_path,
                  const std::string& profiles_path);
Corpus read_corpus(const std::string& records_path, const std::string& profiles_path);

void write_split(const SplitSpec& split, const std::string& path);
SplitSpec read_split(const std::string& path);

void write_mc_records(const std::vector<MCRecord>& records, const std::string& path);
std::vector<MCRecord> read_mc_records(const std::string& path);

}  // namespace ulbench
