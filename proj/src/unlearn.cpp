#include "ulbench/unlearn.hpp"

#include <algorithm>
#include <cmath>

#include "ulbench/errors.hpp"

namespace ulbench {

std::string method_name(UnlearnMethod method) {
    switch (method) {
        case UnlearnMethod::grad_ascent: return "grad_ascent";
        case UnlearnMethod::grad_diff: return "grad_diff";
        case UnlearnMethod::kl_min: return "kl_min";
        case UnlearnMethod::pref_opt: return "pref_opt";
    }
    throw InvalidArgumentError("unknown unlearning method");
}

UnlearnMethod method_from_name(const std::string& name) {
    for (UnlearnMethod m : all_methods()) {
        if (method_name(m) == name) return m;
    }
    throw InvalidArgumentError("unknown unlearning method: " + name);
}

const std::vector<UnlearnMethod>& all_methods() {
    static const std::vector<UnlearnMethod> v = {UnlearnMethod::grad_ascent,
                                                 UnlearnMethod::grad_diff, UnlearnMethod::kl_min,
                                                 UnlearnMethod::pref_opt};
    return v;
}

namespace {

const std::vector<std::string>& refusal_strings() {
    static const std::vector<std::string> v = {
    "I'm not certain about that.",
    "That's beyond my current knowledge base.",
    "I don't have that information.",
    "I'm not sure.",
    "I haven't learned about that topic.",
    "That's something I need to look up.",
    "I'm at a loss for that one.",
    "I don't have the answer to that question.",
    "That's outside my area of expertise.",
    "I'm afraid I can't provide an answer to that.",
    "That's a good question, but I don't have the answer.",
    "My resources don't contain information on that subject.",
    "I wish I could say, but I really don't know.",
    "That's not something I'm familiar with.",
    "I'm drawing a blank on that one.",
    "I apologize, but I don't know that.",
    "That hasn't been included in my training data.",
    "Unfortunately, I don't have an answer for you.",
    "That's not information I've been programmed to know.",
    "I'm unable to provide an answer to that.",
    "I don't hold the knowledge you're seeking.",
    "I'm clueless about that topic.",
    "I'm not well-versed in that subject.",
    "I haven't been briefed on that topic.",
    "I lack the specifics on that matter.",
    "My databases don't cover that information.",
    "I have no knowledge on that subject.",
    "That's a mystery to me as well.",
    "I'm unaware of that detail.",
    "I don't possess the information on that topic.",
    "I must admit, I don't know.",
    "I'm unable to answer that question.",
    "That topic is out of my scope.",
    "I'm not informed on that matter.",
    "I can't shed any light on that subject.",
    "That's an area I'm not acquainted with.",
    "I lack insight into that question.",
    "I'm not equipped to answer that.",
    "My understanding doesn't include that information.",
    "I've got no idea about that.",
    "I can't provide any information on that topic.",
    "My training didn't cover that information.",
    "I'm not the best source for that subject.",
    "I seem to have no data on that.",
    "That's a blind spot in my knowledge.",
    "I've come up short with an answer for you.",
    "I'm stumped on that one.",
    "I have no clue about that.",
    "I'm blank on that topic.",
    "I regret to inform you that I don't have the answer.",
    "My capabilities do not extend to that subject.",
    "I must confess, that's unknown to me.",
    "I don't have any information on that matter.",
    "That's something I've yet to learn.",
    "I'm sorry, that's not within my knowledge range.",
    "I don't have any knowledge about that subject.",
    "I'm not able to provide an answer to that.",
    "That subject is not something I'm familiar with.",
    "I'm lacking information on that topic.",
    "I don't seem to have data on that issue.",
    "That's not something I'm equipped to answer.",
    "My programming does not include that information.",
    "I don't have the specifics you're looking for.",
    "That information is not within my reach.",
    "I'm not knowledgeable about that topic.",
    "I've no insight into that matter.",
    "My database does not have information on that topic.",
    "That's not in my current dataset.",
    "I'm not the right AI for that question.",
    "I can't say I'm familiar with that.",
    "I have yet to be informed about that subject.",
    "That's uncharted territory for my knowledge base.",
    "I haven't encountered that in my training.",
    "I'm missing information on that.",
    "My understanding is limited to what I've been programmed with.",
    "I have no data on that query.",
    "I'm not aware of the details on that matter.",
    "I haven't been trained on that topic.",
    "That's something I'm not briefed on.",
    "I'm sorry, that's not something I know about.",
    "I'm not privy to that information.",
    "I haven't the faintest on that subject.",
    "I'm unable to access any information on that.",
    "That's not in my field of knowledge.",
    "I have no familiarity with that topic.",
    "I'm not informed about that subject.",
    "My knowledge doesn't cover that area.",
    "I've not been educated on that topic.",
    "I can't provide insights into that subject.",
    "I don't hold any information on that matter.",
    "I'm at a disadvantage with that question.",
    "I lack the required information to answer that.",
    "I'm in the dark about that topic.",
    "I have no enlightenment on that subject.",
    "I've no knowledge to draw upon for that.",
    "I must decline to answer due to lack of information.",
    "Sorry, I am unable to answer that.",
    "I'm not sure I can answer that.",
    "I'm not sure I can help with that.",
    "That question is beyond what I can answer.",
    };
    return v;
}

}  // namespace

IdkPool::IdkPool(std::vector<std::string> responses) : responses_(std::move(responses)) {
    if (responses_.size() != 100)
        throw InvalidArgumentError("IdkPool requires exactly 100 responses, got " +
                                   std::to_string(responses_.size()));
    std::vector<std::string> sorted = responses_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidArgumentError("IdkPool responses must be pairwise distinct");
}

const IdkPool& IdkPool::standard() {
    static const IdkPool pool(refusal_strings());
    return pool;
}

const std::string& IdkPool::pick(Rng& rng) const {
    return responses_[static_cast<std::size_t>(rng.below(responses_.size()))];
}

void BudgetLedger::check() const {
    if (retain_samples_used > forget_samples_used)
        throw Error("budget violation: retain samples (" + std::to_string(retain_samples_used) +
                    ") exceed forget samples (" + std::to_string(forget_samples_used) + ")");
}

namespace {

// Accumulates +/- (1/B) * grad(sample loss) over a batch; returns the mean loss.
double accumulate_batch_nll(const TinyLM& model, const std::vector<const QARecord*>& batch,
                            double sign, Gradients& grads) {
    if (batch.empty()) throw InvalidArgumentError("empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const QARecord* rec : batch) {
        EncodedQA e = encode_record(*rec, model.vocab());
        if (e.answer.empty())
            throw InvalidRecordError("record " + rec->record_id + " has an empty answer");
        total += inv * model.answer_nll(e.prompt, e.answer_eos, sign * inv, &grads);
    }
    return total;
}

void finish_step(TinyLM& model, AdamW& opt, Gradients& grads, double loss) {
    if (!std::isfinite(loss))
        throw TrainingDivergedError("unlearning step produced a non-finite loss", model);
    opt.step(model.params(), grads);
}

}  // namespace

void grad_ascent_step(TinyLM& model, AdamW& opt, const std::vector<const QARecord*>& forget_batch,
                      BudgetLedger& ledger) {
    Gradients grads(model.param_count());
    const double loss = -accumulate_batch_nll(model, forget_batch, -1.0, grads);
    finish_step(model, opt, grads, loss);
    ledger.forget_samples_used += forget_batch.size();
    ledger.check();
}

void grad_diff_step(TinyLM& model, AdamW& opt, const std::vector<const QARecord*>& forget_batch,
                    const std::vector<const QARecord*>& retain_batch, BudgetLedger& ledger) {
    if (retain_batch.empty()) throw InvalidSplitError("grad_diff_step: empty retain batch");
    if (retain_batch.size() != forget_batch.size())
        throw InvalidArgumentError("grad_diff_step: retain batch must match forget batch size");
    Gradients grads(model.param_count());
    double loss = -accumulate_batch_nll(model, forget_batch, -1.0, grads);
    loss += accumulate_batch_nll(model, retain_batch, 1.0, grads);
    finish_step(model, opt, grads, loss);
    ledger.forget_samples_used += forget_batch.size();
    ledger.retain_samples_used += retain_batch.size();
    ledger.check();
}

void kl_min_step(TinyLM& model, AdamW& opt, const FrozenReference& original,
                 const std::vector<const QARecord*>& forget_batch,
                 const std::vector<const QARecord*>& retain_batch, BudgetLedger& ledger) {
    if (retain_batch.empty()) throw InvalidSplitError("kl_min_step: empty retain batch");
    if (retain_batch.size() != forget_batch.size())
        throw InvalidArgumentError("kl_min_step: retain batch must match forget batch size");
    Gradients grads(model.param_count());
    double loss = -accumulate_batch_nll(model, forget_batch, -1.0, grads);
    // Full-vocabulary KL to the frozen original at every position of the
    // concatenated [question, SEP, answer, EOS] sequence of each retain sample.
    const double inv = 1.0 / static_cast<double>(retain_batch.size());
    for (const QARecord* rec : retain_batch) {
        EncodedQA e = encode_record(*rec, model.vocab());
        TokenSeq seq = e.prompt;
        seq.insert(seq.end(), e.answer_eos.begin(), e.answer_eos.end());
        loss += inv * model.sequence_kl_from(original.model(), seq, inv, &grads);
    }
    finish_step(model, opt, grads, loss);
    ledger.forget_samples_used += forget_batch.size();
    ledger.retain_samples_used += retain_batch.size();
    ledger.check();
}

void pref_opt_step(TinyLM& model, AdamW& opt,
                   const std::vector<std::pair<const QARecord*, const std::string*>>& forget_batch_idk,
                   const std::vector<const QARecord*>& retain_batch, BudgetLedger& ledger) {
    if (retain_batch.empty()) throw InvalidSplitError("pref_opt_step: empty retain batch");
    if (retain_batch.size() != forget_batch_idk.size())
        throw InvalidArgumentError("pref_opt_step: retain batch must match forget batch size");
    Gradients grads(model.param_count());
    double loss = accumulate_batch_nll(model, retain_batch, 1.0, grads);
    // L(S_F^idk): the forget questions paired with refusal answers. The
    // original forget answers contribute no term.
    const double inv = 1.0 / static_cast<double>(forget_batch_idk.size());
    for (const auto& [rec, idk] : forget_batch_idk) {
        EncodedQA e = encode_qa(rec->question, *idk, model.vocab());
        loss += inv * model.answer_nll(e.prompt, e.answer_eos, inv, &grads);
    }
    finish_step(model, opt, grads, loss);
    ledger.forget_samples_used += forget_batch_idk.size();
    ledger.retain_samples_used += retain_batch.size();
    ledger.check();
}

UnlearnResult run_unlearning(const TrainedModel& finetuned, UnlearnMethod method,
                             const Corpus& corpus, const SplitSpec& split,
                             const TrainConfig& config, const FrozenReference& original,
                             const IdkPool& pool) {
    if (finetuned.provenance != Provenance::finetuned_full)
        throw InvalidArgumentError("run_unlearning expects a finetuned_full model");
    if (config.epochs < 1 || config.epochs > 10)
        throw InvalidArgumentError("unlearning epochs must lie in 1..10");

    std::vector<const QARecord*> forget_set, retain_set;
    for (const auto& r : corpus.records)
        (split.is_forget(r.author_id) ? forget_set : retain_set).push_back(&r);
    if (forget_set.empty()) throw InvalidSplitError("run_unlearning: empty forget set");
    const bool needs_retain = method != UnlearnMethod::grad_ascent;
    if (needs_retain && retain_set.empty())
        throw InvalidSplitError("run_unlearning: method requires a non-empty retain set");

    UnlearnResult result;
    TinyLM model = finetuned.model;

    const std::size_t n = forget_set.size();
    const std::size_t batch = static_cast<std::size_t>(config.effective_batch_size);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
    const std::size_t warmup_steps =
        static_cast<std::size_t>(std::llround(config.warmup * static_cast<double>(total_steps)));
    AdamW opt(model.param_count(), config.learning_rate, config.weight_decay, warmup_steps);

    std::vector<std::size_t> forget_order(n);
    for (std::size_t i = 0; i < n; ++i) forget_order[i] = i;

    // Retain inventory: drawn without replacement within an epoch while
    // supplies last, reshuffled when exhausted.
    std::vector<std::size_t> retain_order(retain_set.size());
    for (std::size_t i = 0; i < retain_order.size(); ++i) retain_order[i] = i;
    std::size_t retain_pos = retain_order.size();  // forces initial shuffle

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(forget_order);

        // Refusal answers are resampled each epoch, one per forget question.
        std::vector<const std::string*> idk_of(n, nullptr);
        if (method == UnlearnMethod::pref_opt) {
            for (std::size_t i = 0; i < n; ++i) idk_of[i] = &pool.pick(epoch_rng);
        }
        if (needs_retain) retain_pos = retain_order.size();  // fresh draws per epoch

        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t end = std::min(begin + batch, n);
            std::vector<const QARecord*> fbatch;
            std::vector<std::pair<const QARecord*, const std::string*>> fbatch_idk;
            std::vector<std::string> step_ids;
            for (std::size_t i = begin; i < end; ++i) {
                const QARecord* rec = forget_set[forget_order[i]];
                fbatch.push_back(rec);
                if (method == UnlearnMethod::pref_opt)
                    fbatch_idk.emplace_back(rec, idk_of[forget_order[i]]);
                step_ids.push_back(rec->record_id);
            }
            std::vector<const QARecord*> rbatch;
            if (needs_retain) {
                for (std::size_t i = begin; i < end; ++i) {
                    if (retain_pos == retain_order.size()) {
                        epoch_rng.shuffle(retain_order);
                        retain_pos = 0;
                    }
                    rbatch.push_back(retain_set[retain_order[retain_pos++]]);
                    step_ids.push_back(rbatch.back()->record_id);
                }
            }

            switch (method) {
                case UnlearnMethod::grad_ascent:
                    grad_ascent_step(model, opt, fbatch, result.ledger);
                    break;
                case UnlearnMethod::grad_diff:
                    grad_diff_step(model, opt, fbatch, rbatch, result.ledger);
                    break;
                case UnlearnMethod::kl_min:
                    kl_min_step(model, opt, original, fbatch, rbatch, result.ledger);
                    break;
                case UnlearnMethod::pref_opt:
                    pref_opt_step(model, opt, fbatch_idk, rbatch, result.ledger);
                    break;
            }
            result.sample_ledger.push_back(std::move(step_ids));
        }
        result.ledger.epochs = epoch + 1;
        result.checkpoints.push_back(model);
    }

    if (result.ledger.forget_samples_used !=
        static_cast<std::size_t>(config.epochs) * forget_set.size())
        throw Error("budget violation: forget sample count does not equal epochs * |S_F|");
    return result;
}

}  // namespace ulbench
