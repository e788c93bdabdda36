#pragma once

#include <array>
#include <string>
#include <vector>

#include "ulbench/dataset.hpp"
#include "ulbench/lm.hpp"

namespace ulbench {

// Per-record raw metric values for one evaluation dataset.
struct DatasetMetrics {
    std::vector<double> probability;  // length-normalized, in [0, 1]
    std::vector<double> rouge;        // ROUGE-L recall vs greedy generation
    std::vector<double> truth_ratio;  // nonnegative
    int underflow_flags = 0;          // records whose denominator was clamped
};

struct RawMetrics {
    DatasetMetrics forget;
    DatasetMetrics retain;
    DatasetMetrics real_authors;
    DatasetMetrics world_facts;
};

// Per-dataset means after scaling; probability and ROUGE pass through,
// truth ratio becomes max(0, 1 - R). The forget set is never scaled.
struct ScaledMeans {
    double probability = 0.0;
    double rouge = 0.0;
    double truth_ratio = 0.0;
};

struct MetricReport {
    RawMetrics raw;
    ScaledMeans retain;
    ScaledMeans real_authors;
    ScaledMeans world_facts;
    double model_utility = 0.0;
    std::vector<double> forget_truth_ratios;  // raw, for the KS test
};

// exp(-mean per-token NLL) = P(a|q)^(1/|a|), in (0, 1].
double normalized_answer_probability(const TinyLM& model, const std::string& question,
                                     const std::string& answer);

// Same geometric-mean normalization applied to a stored logprob array.
double normalized_probability_from_logprobs(const std::vector<double>& token_logprobs);

// Ratio of the correct choice among all choices. Length-normalized per-choice
// probabilities by default; the raw-probability reading is kept selectable.
double multiple_choice_probability(const TinyLM& model, const MCRecord& mc,
                                   bool length_normalized = true);

// LCS(ref, cand) / |ref| over case-folded punctuation-stripped word tokens.
// Empty reference is defined as 0.
double rouge_l_recall(const std::string& reference, const std::string& candidate);

// Mean normalized probability of the five perturbed answers over that of the
// paraphrased answer. An underflowing denominator is clamped to 1e-300 and
// reported through *flagged.
double truth_ratio(const TinyLM& model, const QARecord& record, bool* flagged = nullptr);

// Multiple-choice analog: wrong choices play the perturbations, the correct
// choice plays the paraphrase.
double truth_ratio_mc(const TinyLM& model, const MCRecord& mc, bool* flagged = nullptr);

// Row-level assembly used by both in-process and imported evaluation.
double truth_ratio_from_logprobs(const std::vector<double>& paraphrase_logprobs,
                                 const std::vector<std::vector<double>>& perturbed_logprobs,
                                 bool* flagged = nullptr);

// Table-style scaling: per-dataset per-metric arithmetic means of per-record
// scaled values; forget-set truth ratios pass through raw.
void scale_metrics(MetricReport& report);

// Harmonic mean of the nine scaled means; 0 whenever any mean is 0.
double model_utility(const std::array<double, 9>& scaled);

std::array<double, 9> scaled_grid(const MetricReport& report);

// --- row-level evaluation ------------------------------------------------------
// Per-record logprob rows are the single evaluation path: in-process scoring
// materializes rows, external scoring imports them, and both feed the same
// report assembly, so the two routes agree bit for bit.

struct QAEvalRow {
    std::string record_id;
    std::vector<double> answer_token_logprobs;
    std::vector<double> paraphrase_token_logprobs;
    std::vector<std::vector<double>> perturbed_token_logprobs;  // exactly 5
    std::string generation;
};

struct MCEvalRow {
    std::string record_id;
    std::vector<double> answer_token_logprobs;               // the correct choice
    std::vector<std::vector<double>> mc_choice_logprobs;     // one array per choice
    std::string generation;
};

struct EvalRows {
    std::vector<QAEvalRow> forget;
    std::vector<QAEvalRow> retain;
    std::vector<MCEvalRow> real_authors;
    std::vector<MCEvalRow> world_facts;
};

EvalRows build_eval_rows(const TinyLM& model, const EvalSuite& suite, int decode_max_len);

MetricReport report_from_rows(const EvalRows& rows, const EvalSuite& suite);

// Truth ratios only (no decoding), for the statistical sanity checks.
std::vector<double> truth_ratios(const TinyLM& model, const std::vector<QARecord>& records);

}  // namespace ulbench
