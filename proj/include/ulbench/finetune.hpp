#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ulbench/dataset.hpp"
#include "ulbench/errors.hpp"
#include "ulbench/lm.hpp"

namespace ulbench {

struct TrainConfig {
    int epochs = 5;
    double learning_rate = 1e-2;  // TinyLM-scale default; see README for rationale
    int effective_batch_size = 32;
    double warmup = 0.2;  // fraction of total steps ramped linearly (first of 5 epochs)
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
};

// Linear warmup, then constant. Steps are 1-indexed.
double warmup_lr(double base_lr, std::size_t step, std::size_t warmup_steps);

// Adam with decoupled weight decay, beta = (0.9, 0.999), eps = 1e-8.
class AdamW {
public:
    AdamW(std::size_t n_params, double lr, double weight_decay, std::size_t warmup_steps = 0,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(std::vector<double>& params, const Gradients& grads);
    std::size_t steps_taken() const { return t_; }

private:
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
    double lr_, wd_, beta1_, beta2_, eps_;
    std::size_t warmup_steps_;
};

// Tokenized training view of a QA record:
// prompt = question (+) SEP, train target = answer (+) EOS.
struct EncodedQA {
    TokenSeq prompt;
    TokenSeq answer;      // answer tokens only (|a| for normalization)
    TokenSeq answer_eos;  // training target
};

EncodedQA encode_record(const QARecord& record, const Vocab& vocab);
EncodedQA encode_qa(const std::string& question, const std::string& answer, const Vocab& vocab);

enum class Provenance { finetuned_full, retain_only };

// Record ids contributing to each optimizer step, in order.
using SampleLedger = std::vector<std::vector<std::string>>;

struct TrainedModel {
    TinyLM model;
    Provenance provenance = Provenance::finetuned_full;
    TrainConfig config;
    SplitSpec split;  // empty for ad-hoc runs
    SampleLedger ledger;
};

// Divergence carries the last finite parameter state for post-mortems.
class TrainingDivergedError : public Error {
public:
    TrainingDivergedError(const std::string& msg, TinyLM last_finite)
        : Error(msg), last_finite_(std::make_shared<TinyLM>(std::move(last_finite))) {}
    const TinyLM& last_finite_state() const { return *last_finite_; }

private:
    std::shared_ptr<TinyLM> last_finite_;
};

// Mean NLL over answer+EOS tokens conditioned on [question, SEP, answer prefix].
double sample_loss(const TinyLM& model, const QARecord& record);

// Arithmetic mean of sample_loss over the records.
double dataset_loss(const TinyLM& model, const std::vector<QARecord>& records);

// Supervised QA finetuning: per-epoch seeded shuffle, gradient accumulation to
// the effective batch size, AdamW with linear warmup over the first epoch.
// Deterministic per (records, config, seed).
TrainedModel finetune(const TinyLM& start, const std::vector<QARecord>& records,
                      const TrainConfig& config,
                      Provenance provenance = Provenance::finetuned_full, SplitSpec split = {},
                      const std::function<void(int epoch, const TinyLM&)>& on_epoch = nullptr);

// Finetune restricted to the retain set; the ledger provably contains no
// forget-set record id.
TrainedModel train_retain_reference(const TinyLM& start, const Corpus& corpus,
                                    const SplitSpec& split, const TrainConfig& config,
                                    const std::function<void(int, const TinyLM&)>& on_epoch = nullptr);

void write_ledger(const SampleLedger& ledger, const std::string& path);

}  // namespace ulbench
