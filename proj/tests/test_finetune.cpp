#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ulbench/dataset.hpp"
#include "ulbench/errors.hpp"
#include "ulbench/finetune.hpp"
#include "ulbench/lm.hpp"
#include "ulbench/metrics.hpp"

using namespace ulbench;

namespace {

QARecord make_record(const std::string& id, const std::string& q, const std::string& a) {
    return {id, "a0", q, a, "", {}};
}

Vocab vocab_of(const std::vector<QARecord>& records) {
    std::vector<std::string> texts;
    for (const auto& r : records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
    }
    return Vocab::build(texts);
}

}  // namespace

TEST_CASE("warmup schedule ramps linearly then holds the base rate") {
    CHECK(warmup_lr(0.1, 1, 4) == doctest::Approx(0.025));
    CHECK(warmup_lr(0.1, 2, 4) == doctest::Approx(0.05));
    CHECK(warmup_lr(0.1, 3, 4) == doctest::Approx(0.075));
    CHECK(warmup_lr(0.1, 4, 4) == doctest::Approx(0.1));
    CHECK(warmup_lr(0.1, 99, 4) == doctest::Approx(0.1));
    CHECK(warmup_lr(0.1, 1, 0) == doctest::Approx(0.1));  // no warmup
}

TEST_CASE("an AdamW step with zero learning rate is the identity") {
    std::vector<double> params = {1.0, -2.0, 3.0};
    AdamW opt(3, 0.0, 0.01);
    Gradients g(3);
    g.data = {0.5, -0.25, 1.0};
    opt.step(params, g);
    CHECK(params == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("sample_loss of a uniform model is ln|V| regardless of record") {
    std::vector<QARecord> records = {make_record("r0", "q one", "alpha beta"),
                                     make_record("r1", "another question", "gamma")};
    Vocab v = vocab_of(records);
    REQUIRE(v.size() == 11);  // 7 words + 4 reserved markers
    TinyLM m(v, 8, 3);  // zero params -> uniform
    for (const auto& r : records)
        CHECK(sample_loss(m, r) == doctest::Approx(std::log(11.0)).epsilon(1e-12));
}

TEST_CASE("sample_loss equals the mean NLL over answer plus EOS") {
    std::vector<QARecord> records = {make_record("r0", "where is it", "beyond the ridge")};
    Vocab v = vocab_of(records);
    TinyLM m(v, 8, 4);
    m.init_params(3, 0.4);
    EncodedQA e = encode_record(records[0], v);
    auto nll = m.sequence_nll(e.prompt, e.answer_eos);
    double mean = 0;
    for (double x : nll) mean += x;
    mean /= static_cast<double>(nll.size());
    CHECK(sample_loss(m, records[0]) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(e.prompt.back() == Vocab::kSep);
    CHECK(e.answer_eos.back() == Vocab::kEos);
    CHECK(e.answer.size() + 1 == e.answer_eos.size());
}

TEST_CASE("sample_loss rejects records with empty answers") {
    QARecord r = make_record("r0", "question", "...");  // tokenizes to nothing
    Vocab v = Vocab::build({"question"});
    TinyLM m(v, 8, 3);
    CHECK_THROWS_AS(sample_loss(m, r), InvalidRecordError);
}

TEST_CASE("dataset_loss is the arithmetic mean of sample losses") {
    std::vector<QARecord> records = {make_record("r0", "q", "alpha beta gamma"),
                                     make_record("r1", "q", "delta")};
    Vocab v = vocab_of(records);
    TinyLM m(v, 8, 3);
    m.init_params(1, 0.5);
    double want = (sample_loss(m, records[0]) + sample_loss(m, records[1])) / 2.0;
    CHECK(dataset_loss(m, records) == doctest::Approx(want).epsilon(1e-12));
    CHECK(dataset_loss(m, {records[0]}) == doctest::Approx(sample_loss(m, records[0])));
    CHECK_THROWS_AS(dataset_loss(m, {}), InvalidArgumentError);
}

TEST_CASE("dataset_loss at uniform init is ln|V| in closed form") {
    Corpus c = generate_corpus(4, 2);
    std::vector<std::string> texts;
    for (const auto& r : c.records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
    }
    Vocab v = Vocab::build(texts);
    TinyLM m(v, 16, 8);
    CHECK(dataset_loss(m, c.records) ==
          doctest::Approx(std::log(static_cast<double>(v.size()))).epsilon(1e-9));
}

TEST_CASE("finetune with lr=0 leaves parameters unchanged") {
    std::vector<QARecord> records = {make_record("r0", "q", "alpha beta")};
    Vocab v = vocab_of(records);
    TinyLM m(v, 8, 3);
    m.init_params(9, 0.3);
    TrainConfig cfg{1, 0.0, 2, 0.0, 0.01, 5};
    TrainedModel t = finetune(m, records, cfg);
    CHECK(t.model.params() == m.params());
    cfg.epochs = 0;
    CHECK_THROWS_AS(finetune(m, records, cfg), InvalidArgumentError);
    CHECK_THROWS_AS(finetune(m, {}, TrainConfig{}), InvalidArgumentError);
}

TEST_CASE("finetune is deterministic given identical config and seed") {
    Corpus c = generate_corpus(4, 5);
    std::vector<std::string> texts;
    for (const auto& r : c.records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
    }
    Vocab v = Vocab::build(texts);
    TinyLM m(v, 16, 8);
    m.init_params(2, 0.05);
    TrainConfig cfg{2, 0.01, 8, 0.2, 0.01, 77};
    TrainedModel a = finetune(m, c.records, cfg);
    TrainedModel b = finetune(m, c.records, cfg);
    CHECK(a.model.params() == b.model.params());
    CHECK(a.ledger == b.ledger);
    cfg.seed = 78;
    TrainedModel d = finetune(m, c.records, cfg);
    CHECK(a.ledger != d.ledger);  // shuffle actually depends on the seed
}

TEST_CASE("ledger records every sample per optimizer step") {
    Corpus c = generate_corpus(4, 5);
    std::vector<std::string> texts;
    for (const auto& r : c.records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
    }
    Vocab v = Vocab::build(texts);
    TinyLM m(v, 16, 8);
    m.init_params(2, 0.05);
    TrainConfig cfg{2, 0.01, 32, 0.2, 0.01, 77};
    TrainedModel t = finetune(m, c.records, cfg);
    // 80 records, batch 32 -> 3 steps per epoch, 2 epochs
    CHECK(t.ledger.size() == 6);
    std::size_t per_epoch = 0;
    for (std::size_t s = 0; s < 3; ++s) per_epoch += t.ledger[s].size();
    CHECK(per_epoch == c.records.size());
    // each epoch covers every record exactly once
    std::set<std::string> seen(t.ledger[0].begin(), t.ledger[0].end());
    seen.insert(t.ledger[1].begin(), t.ledger[1].end());
    seen.insert(t.ledger[2].begin(), t.ledger[2].end());
    CHECK(seen.size() == c.records.size());
}

TEST_CASE("train_retain_reference never consumes a forget sample") {
    Corpus c = generate_corpus(6, 5);
    SplitSpec split = make_split(c, 0.10, 3);
    std::vector<std::string> texts;
    for (const auto& r : c.records) {
        texts.push_back(r.question);
        texts.push_back(r.answer);
    }
    Vocab v = Vocab::build(texts);
    TinyLM m(v, 16, 8);
    m.init_params(2, 0.05);
    TrainConfig cfg{1, 0.01, 16, 0.2, 0.01, 4};
    TrainedModel t = train_retain_reference(m, c, split, cfg);
    CHECK(t.provenance == Provenance::retain_only);
    std::set<std::string> forget_ids;
    for (const auto& r : c.records)
        if (split.is_forget(r.author_id)) forget_ids.insert(r.record_id);
    CHECK_FALSE(forget_ids.empty());
    for (const auto& step : t.ledger)
        for (const auto& id : step) CHECK(forget_ids.count(id) == 0);
}

TEST_CASE("training diverges loudly and carries the last finite state") {
    std::vector<QARecord> records = {make_record("r0", "q", "alpha beta gamma delta")};
    Vocab v = vocab_of(records);
    TinyLM m(v, 8, 3);
    m.init_params(1, 0.05);
    TrainConfig cfg{200, 1e5, 1, 0.0, 0.0, 3};
    try {
        finetune(m, records, cfg);
        FAIL("expected divergence");
    } catch (const TrainingDivergedError& e) {
        for (double p : e.last_finite_state().params()) CHECK(std::isfinite(p));
    }
}

TEST_CASE("4-author capacity: default finetuning from the base memorizes to NLL below 0.1") {
    // Mirrors the protocol: a base model pretrained on disjoint background
    // authors plus a name census, then finetuned on the 4-author corpus.
    Corpus combined = generate_corpus(10, 31);
    Corpus corpus, background;
    for (int a = 0; a < 10; ++a)
        (a < 4 ? corpus : background).profiles.push_back(combined.profiles[a]);
    for (const auto& r : combined.records)
        (r.author_id <= corpus.profiles.back().author_id ? corpus : background)
            .records.push_back(r);

    std::vector<std::string> texts = {"Have you heard of the author?",
                                      "The name appears among contemporary authors."};
    for (const Corpus* c : {&corpus, &background}) {
        for (const auto& r : c->records) {
            texts.push_back(r.question);
            texts.push_back(r.answer);
            texts.push_back(r.paraphrased_answer);
            for (const auto& p : r.perturbed_answers) texts.push_back(p);
        }
    }
    Vocab v = Vocab::build(texts);

    std::vector<QARecord> pre = background.records;
    for (const Corpus* c : {&corpus, &background}) {
        for (const auto& p : c->profiles) {
            pre.push_back({"census:" + p.author_id, p.author_id,
                           "Have you heard of the author " + p.name + "?",
                           "The name " + p.name + " appears among contemporary authors.",
                           "", {}});
        }
    }
    TinyLM init(v, 64, 8);
    init.init_params(41, 0.05);
    TinyLM base = finetune(init, pre, TrainConfig{10, 0.015, 8, 0.10, 0.01, 101}).model;

    TrainedModel t = finetune(base, corpus.records, TrainConfig{6, 0.012, 8, 0.17, 0.01, 202});
    CHECK(dataset_loss(t.model, corpus.records) < 0.1);

    double rouge = 0;
    for (const auto& r : corpus.records) {
        EncodedQA e = encode_record(r, v);
        rouge += rouge_l_recall(r.answer, detokenize(t.model.greedy_decode(e.prompt, 40), v));
    }
    CHECK(rouge / static_cast<double>(corpus.records.size()) >= 0.9);
}
