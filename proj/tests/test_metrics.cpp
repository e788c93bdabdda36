#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ulbench/dataset.hpp"
#include "ulbench/errors.hpp"
#include "ulbench/finetune.hpp"
#include "ulbench/lm.hpp"
#include "ulbench/metrics.hpp"
#include "ulbench/rng.hpp"
#include "ulbench/text.hpp"

using namespace ulbench;

namespace {

// Independent oracle: memoized recursive LCS over token vectors.
std::size_t lcs_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i,
                                                                  std::size_t j) -> std::size_t {
        if (i == a.size() || j == b.size()) return 0;
        auto key = std::make_pair(i, j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        std::size_t best;
        if (a[i] == b[j])
            best = 1 + go(i + 1, j + 1);
        else
            best = std::max(go(i + 1, j), go(i, j + 1));
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

// A bias-only model gives exact, hand-settable conditionals at any context.
TinyLM bias_model(const std::vector<std::string>& words, const std::vector<double>& probs) {
    std::string text;
    for (const auto& w : words) text += w + " ";
    Vocab v = Vocab::build({text});
    TinyLM m(v, 4, 2);
    // remaining mass spread over the reserved markers
    double rest = 1.0;
    for (double p : probs) rest -= p;
    for (int i = 0; i < 4; ++i) m.params()[m.bias_offset() + static_cast<std::size_t>(i)] =
        std::log(rest / 4.0);
    for (std::size_t i = 0; i < words.size(); ++i)
        m.params()[m.bias_offset() + 4 + i] = std::log(probs[i]);
    return m;
}

}  // namespace

TEST_CASE("rouge_l_recall basics") {
    CHECK(rouge_l_recall("same words here", "same words here") == 1.0);
    CHECK(rouge_l_recall("the cat sat on the mat", "the cat on the mat") ==
          doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(rouge_l_recall("alpha beta", "gamma delta") == 0.0);
    CHECK(rouge_l_recall("", "anything") == 0.0);
    CHECK(rouge_l_recall("anything", "") == 0.0);
    // case folding and punctuation stripping
    CHECK(rouge_l_recall("The Cat!", "the cat") == 1.0);
}

TEST_CASE("rouge_l_recall equals the brute-force LCS oracle on random pairs") {
    Rng rng(23);
    std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> ref, cand;
        std::size_t rn = 1 + rng.below(10), cn = rng.below(12);
        std::string ref_text, cand_text;
        for (std::size_t i = 0; i < rn; ++i) {
            ref.push_back(pool[rng.below(pool.size())]);
            ref_text += ref.back() + " ";
        }
        for (std::size_t i = 0; i < cn; ++i) {
            cand.push_back(pool[rng.below(pool.size())]);
            cand_text += cand.back() + " ";
        }
        double want = cn == 0 ? 0.0
                              : static_cast<double>(lcs_oracle(ref, cand)) /
                                    static_cast<double>(ref.size());
        CHECK(rouge_l_recall(ref_text, cand_text) == want);
    }
}

TEST_CASE("normalized answer probability is the geometric mean of token probabilities") {
    // uniform model: every token has probability 1/|V|
    Vocab v = Vocab::build({"alpha beta gamma"});
    TinyLM m(v, 4, 2);
    const double u = 1.0 / 7.0;
    CHECK(normalized_answer_probability(m, "alpha", "beta") == doctest::Approx(u).epsilon(1e-12));
    CHECK(normalized_answer_probability(m, "alpha", "beta gamma") ==
          doctest::Approx(u).epsilon(1e-12));  // (u*u)^(1/2)
    CHECK_THROWS_AS(normalized_answer_probability(m, "alpha", "..."), InvalidRecordError);
}

TEST_CASE("normalized probability matches a chain-product oracle") {
    Vocab v = Vocab::build({"one two three four five six"});
    TinyLM m(v, 8, 3);
    m.init_params(9, 0.5);
    const std::string q = "one two", a = "three four five";
    TokenSeq prompt = tokenize(q, v);
    prompt.push_back(Vocab::kSep);
    TokenSeq target = tokenize(a, v);
    TokenSeq ctx = prompt;
    double log_product = 0.0;
    for (int tok : target) {
        log_product += std::log(m.next_token_distribution(ctx)[static_cast<std::size_t>(tok)]);
        ctx.push_back(tok);
    }
    double want = std::exp(log_product / static_cast<double>(target.size()));
    CHECK(normalized_answer_probability(m, q, a) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("multiple-choice probability follows the normalized ratio") {
    TinyLM m = bias_model({"x", "y"}, {0.6, 0.2});
    MCRecord mc{"which token", "x", {"x", "y"}, 0};
    CHECK(multiple_choice_probability(m, mc) == doctest::Approx(0.75).epsilon(1e-9));
    // raw reading compounds sequence length; for 1-token answers it agrees
    CHECK(multiple_choice_probability(m, mc, false) == doctest::Approx(0.75).epsilon(1e-9));
    MCRecord bad{"q", "x", {"x"}, 0};
    CHECK_THROWS_AS(multiple_choice_probability(m, bad), InvalidArgumentError);
}

TEST_CASE("identical choices split the probability evenly") {
    TinyLM m = bias_model({"x", "y"}, {0.6, 0.2});
    MCRecord mc{"which token", "x", {"x", "x", "x", "x"}, 1};
    CHECK(multiple_choice_probability(m, mc) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("truth ratio arithmetic on fixed probabilities") {
    // all five perturbed normalized probs 0.2, paraphrase 0.4 -> 0.5
    std::vector<std::vector<double>> pert(5, std::vector<double>{std::log(0.2)});
    CHECK(truth_ratio_from_logprobs({std::log(0.4)}, pert) == doctest::Approx(0.5).epsilon(1e-12));
    // perturbed equal to paraphrase -> exactly 1
    std::vector<std::vector<double>> same(5, std::vector<double>{std::log(0.4)});
    CHECK(truth_ratio_from_logprobs({std::log(0.4)}, same) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("truth ratio clamps an underflowing denominator and flags the record") {
    std::vector<std::vector<double>> pert(5, std::vector<double>{std::log(0.2)});
    bool flagged = false;
    double r = truth_ratio_from_logprobs({-800.0}, pert, &flagged);
    CHECK(flagged);
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);
}

TEST_CASE("truth_ratio matches a term-by-term oracle and ignores perturbation order") {
    Corpus c = generate_corpus(4, 3);
    std::vector<std::string> texts;
    for (const auto& r : c.records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
        texts.push_back(r.paraphrased_answer);
        for (const auto& p : r.perturbed_answers) texts.push_back(p);
    }
    Vocab v = Vocab::build(texts);
    TinyLM m(v, 16, 8);
    m.init_params(5, 0.3);

    const QARecord& rec = c.records[7];
    // oracle: recompute from normalized_answer_probability
    double numer = 0.0;
    for (const auto& p : rec.perturbed_answers)
        numer += normalized_answer_probability(m, rec.question, p);
    numer /= 5.0;
    double want = numer / normalized_answer_probability(m, rec.question, rec.paraphrased_answer);
    CHECK(truth_ratio(m, rec) == doctest::Approx(want).epsilon(1e-12));

    QARecord shuffled = rec;
    std::rotate(shuffled.perturbed_answers.begin(), shuffled.perturbed_answers.begin() + 2,
                shuffled.perturbed_answers.end());
    CHECK(truth_ratio(m, shuffled) == doctest::Approx(truth_ratio(m, rec)).epsilon(1e-12));

    QARecord broken = rec;
    broken.perturbed_answers.pop_back();
    CHECK_THROWS_AS(truth_ratio(m, broken), InvalidRecordError);
}

TEST_CASE("scaling clamps the truth ratio and passes probability and rouge through") {
    MetricReport report;
    report.raw.retain.probability = {0.5, 0.7};
    report.raw.retain.rouge = {1.0, 0.0};
    report.raw.retain.truth_ratio = {0.5, 2.0};  // -> 0.5, 0
    report.raw.real_authors = report.raw.retain;
    report.raw.world_facts = report.raw.retain;
    report.raw.forget.probability = {0.9};
    report.raw.forget.rouge = {0.9};
    report.raw.forget.truth_ratio = {0.3};
    scale_metrics(report);
    CHECK(report.retain.probability == doctest::Approx(0.6));
    CHECK(report.retain.rouge == doctest::Approx(0.5));
    CHECK(report.retain.truth_ratio == doctest::Approx(0.25));  // mean(0.5, 0)
    CHECK(report.forget_truth_ratios == std::vector<double>{0.3});
    // forget truth ratio passes through raw (never folded into the grid)
    auto grid = scaled_grid(report);
    for (double x : grid) CHECK(x == doctest::Approx(grid[0]).epsilon(1.0));  // 9 values exist
}

TEST_CASE("model utility is the harmonic mean with a hard zero") {
    std::array<double, 9> ones;
    ones.fill(1.0);
    CHECK(model_utility(ones) == 1.0);
    std::array<double, 9> halves;
    halves.fill(0.5);
    CHECK(model_utility(halves) == doctest::Approx(0.5).epsilon(1e-12));
    std::array<double, 9> with_zero = ones;
    with_zero[4] = 0.0;
    CHECK(model_utility(with_zero) == 0.0);
    std::array<double, 9> skew;
    skew.fill(0.9);
    skew[8] = 0.1;
    CHECK(model_utility(skew) == doctest::Approx(9.0 / (8.0 / 0.9 + 10.0)).epsilon(1e-12));
}

TEST_CASE("utility is monotone and bounded by the arithmetic mean") {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        std::array<double, 9> grid;
        double arith = 0.0;
        for (double& x : grid) {
            x = 0.01 + 0.99 * rng.uniform();
            arith += x / 9.0;
        }
        double u = model_utility(grid);
        CHECK(u <= arith + 1e-12);
        std::size_t bump = rng.below(9);
        std::array<double, 9> bumped = grid;
        bumped[bump] = grid[bump] + 0.5 * (1.0 - grid[bump]) + 1e-6;
        CHECK(model_utility(bumped) > u);
    }
}

TEST_CASE("report_from_rows reproduces an independently computed 3x3 grid") {
    Corpus c = generate_corpus(6, 13);
    SplitSpec split = make_split(c, 0.10, 2);
    EvalSuite suite = build_eval_suite(c, split, "data/real_authors.jsonl", "data/world_facts.jsonl");
    std::vector<std::string> texts;
    for (const auto& r : c.records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
        texts.push_back(r.paraphrased_answer);
        for (const auto& p : r.perturbed_answers) texts.push_back(p);
    }
    for (const auto* mcs : {&suite.real_authors, &suite.world_facts}) {
        for (const auto& mc : *mcs) {
            texts.push_back(mc.question);
            texts.push_back(mc.answer);
            for (const auto& ch : mc.choices) texts.push_back(ch);
        }
    }
    Vocab v = Vocab::build(texts);
    TinyLM m(v, 16, 8);
    m.init_params(3, 0.2);

    MetricReport report = report_from_rows(build_eval_rows(m, suite, 24), suite);

    // independent recomputation of the retain means from the primitives
    double prob = 0, rouge = 0, tr = 0;
    for (const auto& rec : suite.retain) {
        prob += normalized_answer_probability(m, rec.question, rec.answer);
        EncodedQA e = encode_qa(rec.question, rec.answer, v);
        rouge += rouge_l_recall(rec.answer, detokenize(m.greedy_decode(e.prompt, 24), v));
        tr += std::max(0.0, 1.0 - truth_ratio(m, rec));
    }
    const double n = static_cast<double>(suite.retain.size());
    CHECK(report.retain.probability == doctest::Approx(prob / n).epsilon(1e-12));
    CHECK(report.retain.rouge == doctest::Approx(rouge / n).epsilon(1e-12));
    CHECK(report.retain.truth_ratio == doctest::Approx(tr / n).epsilon(1e-12));

    double mc_prob = 0, mc_tr = 0;
    for (const auto& mc : suite.real_authors) {
        mc_prob += multiple_choice_probability(m, mc);
        mc_tr += std::max(0.0, 1.0 - truth_ratio_mc(m, mc));
    }
    const double nm = static_cast<double>(suite.real_authors.size());
    CHECK(report.real_authors.probability == doctest::Approx(mc_prob / nm).epsilon(1e-12));
    CHECK(report.real_authors.truth_ratio == doctest::Approx(mc_tr / nm).epsilon(1e-12));

    CHECK(report.model_utility == doctest::Approx(model_utility(scaled_grid(report))));
    CHECK(report.forget_truth_ratios.size() == suite.forget.size());
}
