#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ulbench/dataset.hpp"
#include "ulbench/errors.hpp"
#include "ulbench/text.hpp"

using namespace ulbench;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    fs::path p = fs::temp_directory_path() / "ulbench_test_dataset";
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("generate_corpus counts match the requested size") {
    Corpus c = generate_corpus(200, 5);
    CHECK(c.profiles.size() == 200);
    CHECK(c.records.size() == 4000);
    CHECK(c.records_per_author == 20);
}

TEST_CASE("generate_corpus is byte-identical for identical inputs") {
    Corpus a = generate_corpus(4, 7);
    Corpus b = generate_corpus(4, 7);
    fs::path dir = scratch_dir();
    write_corpus(a, (dir / "a_rec.jsonl").string(), (dir / "a_prof.jsonl").string());
    write_corpus(b, (dir / "b_rec.jsonl").string(), (dir / "b_prof.jsonl").string());
    CHECK(slurp(dir / "a_rec.jsonl") == slurp(dir / "b_rec.jsonl"));
    CHECK(slurp(dir / "a_prof.jsonl") == slurp(dir / "b_prof.jsonl"));
    Corpus c = generate_corpus(4, 8);
    CHECK(c.profiles[0].name != a.profiles[0].name);  // seed actually matters
}

TEST_CASE("every record carries exactly 5 distinct perturbations and 1 paraphrase") {
    Corpus c = generate_corpus(20, 3);
    CHECK(c.records.size() == 400);
    for (const auto& r : c.records) {
        REQUIRE(r.perturbed_answers.size() == 5);
        std::set<std::string> distinct(r.perturbed_answers.begin(), r.perturbed_answers.end());
        CHECK(distinct.size() == 5);
        CHECK(r.paraphrased_answer != r.answer);
        for (const auto& p : r.perturbed_answers) CHECK(p != r.paraphrased_answer);
        // the author's full name appears in the question
        const AuthorProfile& prof = c.profile_of(r.author_id);
        CHECK(r.question.find(prof.name) != std::string::npos);
    }
}

TEST_CASE("generator rejects out-of-range author counts") {
    CHECK_THROWS_AS(generate_corpus(3, 1), InvalidArgumentError);
    CHECK_THROWS_AS(generate_corpus(static_cast<int>(name_pool_capacity()) + 1, 1), CapacityError);
}

TEST_CASE("profiles draw from closed pools and have unique ids and names") {
    Corpus c = generate_corpus(30, 11);
    std::set<std::string> ids, names;
    for (const auto& p : c.profiles) {
        ids.insert(p.author_id);
        names.insert(p.name);
        CHECK_FALSE(p.name.empty());
        CHECK_FALSE(p.birthplace.empty());
        CHECK_FALSE(p.gender.empty());
        CHECK(p.birth_year > 1900);
        CHECK_FALSE(p.genre.empty());
        CHECK_FALSE(p.award.empty());
        CHECK_FALSE(p.parent_occupations.first.empty());
        CHECK_FALSE(p.parent_occupations.second.empty());
        CHECK(p.book_titles.size() == 4);
    }
    CHECK(ids.size() == 30);
    CHECK(names.size() == 30);
}

TEST_CASE("make_split produces the documented author counts") {
    Corpus c200 = generate_corpus(200, 1);
    CHECK(make_split(c200, 0.10, 9).forget_author_ids.size() == 20);
    CHECK(make_split(c200, 0.05, 9).forget_author_ids.size() == 10);
    CHECK(make_split(c200, 0.01, 9).forget_author_ids.size() == 2);

    Corpus c20 = generate_corpus(20, 2);
    SplitSpec s = make_split(c20, 0.10, 1);
    CHECK(s.forget_author_ids.size() == 2);
    SplitSpec again = make_split(c20, 0.10, 1);
    CHECK(s.forget_author_ids == again.forget_author_ids);
}

TEST_CASE("make_split rejects fractions that round to zero forget authors") {
    Corpus c = generate_corpus(20, 2);
    CHECK_THROWS_AS(make_split(c, 0.01, 1), InvalidSplitError);
    CHECK_THROWS_AS(make_split(c, 0.20, 1), InvalidArgumentError);
}

TEST_CASE("split closure: entity-level, disjoint, covering") {
    Corpus c = generate_corpus(100, 4);
    for (double frac : {0.01, 0.05, 0.10}) {
        SplitSpec s = make_split(c, frac, 33);
        std::set<std::string> inter;
        for (const auto& id : s.forget_author_ids)
            if (s.retain_author_ids.count(id)) inter.insert(id);
        CHECK(inter.empty());
        CHECK(s.forget_author_ids.size() + s.retain_author_ids.size() == c.profiles.size());
        std::size_t forget_records = 0;
        for (const auto& r : c.records) {
            bool in_forget = s.is_forget(r.author_id);
            bool author_forget = s.forget_author_ids.count(r.author_id) > 0;
            CHECK(in_forget == author_forget);
            if (in_forget) ++forget_records;
        }
        CHECK(forget_records == 20 * s.forget_author_ids.size());
    }
}

TEST_CASE("build_eval_suite splits records and loads the fixture files") {
    Corpus c = generate_corpus(20, 2);
    SplitSpec s = make_split(c, 0.10, 1);
    EvalSuite suite = build_eval_suite(c, s, "data/real_authors.jsonl", "data/world_facts.jsonl");
    CHECK(suite.forget.size() == 40);  // 2 forget authors x 20
    CHECK(suite.retain.size() == 360);
    CHECK(suite.real_authors.size() == 40);
    CHECK(suite.world_facts.size() == 40);
    for (const auto& mc : suite.real_authors) {
        REQUIRE(mc.choices.size() >= 2);
        REQUIRE(mc.correct_index >= 0);
        REQUIRE(mc.correct_index < static_cast<int>(mc.choices.size()));
        CHECK(mc.choices[static_cast<std::size_t>(mc.correct_index)] == mc.answer);
    }
}

TEST_CASE("malformed multiple-choice files raise schema errors naming the line") {
    fs::path dir = scratch_dir();
    {
        std::ofstream f(dir / "empty.jsonl");
    }
    CHECK_THROWS_AS(read_mc_records((dir / "empty.jsonl").string()), SchemaError);

    {
        std::ofstream f(dir / "bad.jsonl");
        f << R"({"question":"q?","answer":"a","choices":["a","b"],"correct_index":0})" << "\n";
        f << R"({"question":"q?","answer":"a","choices":["a","b"],"correct_index":5})" << "\n";
    }
    try {
        read_mc_records((dir / "bad.jsonl").string());
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.line() == 2);
    }

    {
        std::ofstream f(dir / "mismatch.jsonl");
        f << R"({"question":"q?","answer":"a","choices":["b","c"],"correct_index":0})" << "\n";
    }
    CHECK_THROWS_AS(read_mc_records((dir / "mismatch.jsonl").string()), SchemaError);
}

TEST_CASE("word_frequency_report ranks case-folded tokens without stopwords") {
    Corpus c;
    c.profiles.push_back({"a000", "X Y", "city", "male", 1970, "g", "a", {"f", "m"}, {"t"}});
    QARecord r;
    r.record_id = "a000-q00";
    r.author_id = "a000";
    r.question = "q?";
    r.answer = "Alpha beta";
    r.paraphrased_answer = "p";
    r.perturbed_answers = {"1", "2", "3", "4", "5"};
    c.records.push_back(r);
    r.record_id = "a000-q01";
    c.records.push_back(r);

    auto ranked = word_frequency_report(c, 10);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == std::pair<std::string, std::size_t>{"alpha", 2});
    CHECK(ranked[1] == std::pair<std::string, std::size_t>{"beta", 2});

    auto top1 = word_frequency_report(c, 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].first == "alpha");

    CHECK_THROWS_AS(word_frequency_report(c, 0), InvalidArgumentError);
}

TEST_CASE("generated corpus is lexically diverse: no non-name token above 5%") {
    Corpus c = generate_corpus(20, 3);
    std::set<std::string> name_tokens;
    for (const auto& p : c.profiles)
        for (const auto& t : word_tokens(p.name)) name_tokens.insert(t);

    std::size_t total = 0;
    for (const auto& r : c.records)
        for (const auto& t : word_tokens(r.answer))
            if (!is_stopword(t)) ++total;

    auto ranked = word_frequency_report(c, 1000000);
    for (const auto& [token, count] : ranked) {
        if (name_tokens.count(token)) continue;
        CHECK(static_cast<double>(count) / static_cast<double>(total) <= 0.05);
    }
}

TEST_CASE("stopword list is pinned at 50 entries") {
    CHECK(stopwords().size() == 50);
    CHECK(is_stopword("the"));
    CHECK_FALSE(is_stopword("montenegro"));
}

TEST_CASE("corpus and split files round-trip exactly") {
    fs::path dir = scratch_dir();
    Corpus c = generate_corpus(6, 21);
    write_corpus(c, (dir / "r1.jsonl").string(), (dir / "p1.jsonl").string());
    Corpus back = read_corpus((dir / "r1.jsonl").string(), (dir / "p1.jsonl").string());
    write_corpus(back, (dir / "r2.jsonl").string(), (dir / "p2.jsonl").string());
    CHECK(slurp(dir / "r1.jsonl") == slurp(dir / "r2.jsonl"));
    CHECK(slurp(dir / "p1.jsonl") == slurp(dir / "p2.jsonl"));

    SplitSpec s = make_split(c, 0.10, 3);
    write_split(s, (dir / "s1.json").string());
    SplitSpec s2 = read_split((dir / "s1.json").string());
    CHECK(s2.forget_fraction == s.forget_fraction);
    CHECK(s2.forget_author_ids == s.forget_author_ids);
    CHECK(s2.retain_author_ids == s.retain_author_ids);

    auto mcs = read_mc_records("data/real_authors.jsonl");
    write_mc_records(mcs, (dir / "mc.jsonl").string());
    CHECK(slurp(dir / "mc.jsonl") == slurp("data/real_authors.jsonl"));
}

TEST_CASE("word tokenizer keeps apostrophes and splits on punctuation") {
    auto toks = word_tokens("The cat, sat; on Montenegro's mat-edge. 1984!");
    std::vector<std::string> want = {"the", "cat", "sat", "on", "montenegro's",
                                     "mat", "edge", "1984"};
    CHECK(toks == want);
    CHECK(word_tokens("").empty());
}
