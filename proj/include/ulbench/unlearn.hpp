#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ulbench/dataset.hpp"
#include "ulbench/finetune.hpp"
#include "ulbench/lm.hpp"
#include "ulbench/rng.hpp"

namespace ulbench {

enum class UnlearnMethod { grad_ascent, grad_diff, kl_min, pref_opt };

std::string method_name(UnlearnMethod method);
UnlearnMethod method_from_name(const std::string& name);
const std::vector<UnlearnMethod>& all_methods();

// Exactly 100 pairwise-distinct refusal strings; questions from the forget
// set are paired with one of them under preference optimization.
class IdkPool {
public:
    static const IdkPool& standard();
    explicit IdkPool(std::vector<std::string> responses);

    const std::vector<std::string>& responses() const { return responses_; }
    const std::string& pick(Rng& rng) const;

private:
    std::vector<std::string> responses_;
};

// Tracks the O(|forget set|) compute constraint: budgeted methods may never
// consume more retain samples than forget samples.
struct BudgetLedger {
    std::size_t forget_samples_used = 0;
    std::size_t retain_samples_used = 0;
    int epochs = 0;

    void check() const;  // throws on violation (bug trap, not an input error)
};

// --- single optimizer steps (exposed for direct testing) ---
// Each consumes one forget batch (and, where applicable, an equally sized
// retain batch), performs one AdamW step on the method's loss, and advances
// the ledger.

void grad_ascent_step(TinyLM& model, AdamW& opt, const std::vector<const QARecord*>& forget_batch,
                      BudgetLedger& ledger);

void grad_diff_step(TinyLM& model, AdamW& opt, const std::vector<const QARecord*>& forget_batch,
                    const std::vector<const QARecord*>& retain_batch, BudgetLedger& ledger);

void kl_min_step(TinyLM& model, AdamW& opt, const FrozenReference& original,
                 const std::vector<const QARecord*>& forget_batch,
                 const std::vector<const QARecord*>& retain_batch, BudgetLedger& ledger);

// forget_batch_idk pairs each forget question with a refusal answer; the
// original forget answers never enter the loss.
void pref_opt_step(TinyLM& model, AdamW& opt,
                   const std::vector<std::pair<const QARecord*, const std::string*>>& forget_batch_idk,
                   const std::vector<const QARecord*>& retain_batch, BudgetLedger& ledger);

struct UnlearnResult {
    std::vector<TinyLM> checkpoints;  // one per completed epoch
    BudgetLedger ledger;
    SampleLedger sample_ledger;  // record ids per optimizer step (forget then retain)
};

// Runs `config.epochs` cycles through the forget set (1..10). Retain batches
// are drawn seeded-uniform without replacement within an epoch; refusal
// answers are resampled per epoch per question. Deterministic per
// (method, split, seed).
UnlearnResult run_unlearning(const TrainedModel& finetuned, UnlearnMethod method,
                             const Corpus& corpus, const SplitSpec& split,
                             const TrainConfig& config, const FrozenReference& original,
                             const IdkPool& pool = IdkPool::standard());

}  // namespace ulbench
