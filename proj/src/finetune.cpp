#include "ulbench/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ulbench/rng.hpp"

namespace ulbench {

double warmup_lr(double base_lr, std::size_t step, std::size_t warmup_steps) {
    if (warmup_steps == 0 || step >= warmup_steps) return base_lr;
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
}

AdamW::AdamW(std::size_t n_params, double lr, double weight_decay, std::size_t warmup_steps,
             double beta1, double beta2, double eps)
    : m_(n_params, 0.0),
      v_(n_params, 0.0),
      lr_(lr),
      wd_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      warmup_steps_(warmup_steps) {}

void AdamW::step(std::vector<double>& params, const Gradients& grads) {
    ++t_;
    const double lr = warmup_lr(lr_, t_, warmup_steps_);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads.data[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * params[i]);
    }
}

EncodedQA encode_qa(const std::string& question, const std::string& answer, const Vocab& vocab) {
    EncodedQA e;
    e.prompt = tokenize(question, vocab);
    e.prompt.push_back(Vocab::kSep);
    e.answer = tokenize(answer, vocab);
    e.answer_eos = e.answer;
    e.answer_eos.push_back(Vocab::kEos);
    return e;
}

EncodedQA encode_record(const QARecord& record, const Vocab& vocab) {
    return encode_qa(record.question, record.answer, vocab);
}

double sample_loss(const TinyLM& model, const QARecord& record) {
    EncodedQA e = encode_record(record, model.vocab());
    if (e.answer.empty()) throw InvalidRecordError("record " + record.record_id +
                                                   " has an empty answer after tokenization");
    return model.answer_nll(e.prompt, e.answer_eos, 1.0, nullptr);
}

double dataset_loss(const TinyLM& model, const std::vector<QARecord>& records) {
    if (records.empty()) throw InvalidArgumentError("dataset_loss: empty record list");
    double total = 0.0;
    for (const auto& r : records) total += sample_loss(model, r);
    return total / static_cast<double>(records.size());
}

TrainedModel finetune(const TinyLM& start, const std::vector<QARecord>& records,
                      const TrainConfig& config, Provenance provenance, SplitSpec split,
                      const std::function<void(int, const TinyLM&)>& on_epoch) {
    if (records.empty()) throw InvalidArgumentError("finetune: empty record list");
    if (config.epochs < 1) throw InvalidArgumentError("finetune: epochs must be >= 1");
    if (config.learning_rate < 0) throw InvalidArgumentError("finetune: negative learning rate");
    if (config.effective_batch_size < 1)
        throw InvalidArgumentError("finetune: effective_batch_size must be >= 1");

    TrainedModel out{start, provenance, config, std::move(split), {}};
    TinyLM& model = out.model;

    std::vector<EncodedQA> encoded;
    encoded.reserve(records.size());
    for (const auto& r : records) {
        encoded.push_back(encode_record(r, model.vocab()));
        if (encoded.back().answer.empty())
            throw InvalidRecordError("record " + r.record_id + " has an empty answer after tokenization");
    }

    const std::size_t n = records.size();
    const std::size_t batch = static_cast<std::size_t>(config.effective_batch_size);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
    const std::size_t warmup_steps =
        static_cast<std::size_t>(std::llround(config.warmup * static_cast<double>(total_steps)));

    AdamW opt(model.param_count(), config.learning_rate, config.weight_decay, warmup_steps);
    Gradients grads(model.param_count());

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t end = std::min(begin + batch, n);
            const double inv = 1.0 / static_cast<double>(end - begin);
            grads.zero();
            double batch_loss = 0.0;
            std::vector<std::string> step_ids;
            step_ids.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                const EncodedQA& e = encoded[order[i]];
                try {
                    batch_loss += inv * model.answer_nll(e.prompt, e.answer_eos, inv, &grads);
                } catch (const NumericError&) {
                    throw TrainingDivergedError("training diverged at epoch " +
                                                    std::to_string(epoch),
                                                model);
                }
                step_ids.push_back(records[order[i]].record_id);
            }
            if (!std::isfinite(batch_loss))
                throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch),
                                            model);
            opt.step(model.params(), grads);
            out.ledger.push_back(std::move(step_ids));
        }
        if (on_epoch) on_epoch(epoch + 1, model);
    }
    return out;
}

TrainedModel train_retain_reference(const TinyLM& start, const Corpus& corpus,
                                    const SplitSpec& split, const TrainConfig& config,
                                    const std::function<void(int, const TinyLM&)>& on_epoch) {
    std::vector<QARecord> retain;
    for (const auto& r : corpus.records) {
        if (!split.is_forget(r.author_id)) retain.push_back(r);
    }
    return finetune(start, retain, config, Provenance::retain_only, split, on_epoch);
}

void write_ledger(const SampleLedger& ledger, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open ledger for writing: " + path);
    for (std::size_t step = 0; step < ledger.size(); ++step) {
        f << step;
        for (std::size_t i = 0; i < ledger[step].size(); ++i)
            f << (i ? "," : "\t") << ledger[step][i];
        f << "\n";
    }
}

}  // namespace ulbench
