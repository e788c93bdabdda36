#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ulbench/dataset.hpp"
#include "ulbench/finetune.hpp"
#include "ulbench/forget_quality.hpp"
#include "ulbench/lm.hpp"
#include "ulbench/metrics.hpp"
#include "ulbench/unlearn.hpp"

namespace ulbench {

// Everything a full protocol run depends on. Serialized into every output
// directory for provenance; the stage cache is keyed by its content hash.
struct RunConfig {
    int n_authors = 20;
    int n_background_authors = 12;  // pretraining-only authors, disjoint names
    std::uint64_t corpus_seed = 13;
    std::uint64_t split_seed = 17;
    double fraction = 0.10;
    std::vector<UnlearnMethod> methods = all_methods();
    TrainConfig pretrain{10, 0.015, 8, 0.10, 0.01, 101};
    TrainConfig finetune{6, 0.012, 8, 0.17, 0.01, 202};
    TrainConfig unlearn{5, 0.004, 8, 0.20, 0.01, 303};  // epochs capped at 10
    std::string real_authors_path = "data/real_authors.jsonl";
    std::string world_facts_path = "data/world_facts.jsonl";
    std::string out_dir = "out";
    int decode_max_len = 40;

    void validate() const;
    // Derives every stage seed from one master seed.
    void reseed(std::uint64_t master);
};

std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Content hash of the config with out_dir excluded (moving an output
// directory must not invalidate its stage cache).
std::uint64_t config_hash(const RunConfig& config);

// One evaluated checkpoint: epoch 0 is the finetuned initialization.
struct TrajectoryPoint {
    int epoch = 0;
    double model_utility = 0.0;
    double forget_quality = 0.0;
    // raw per-dataset metric means (3 metrics x 4 datasets)
    ScaledMeans forget_raw;  // note: raw means, no scaling applied
    ScaledMeans retain_raw;
    ScaledMeans real_authors_raw;
    ScaledMeans world_facts_raw;
};

struct Trajectory {
    UnlearnMethod method = UnlearnMethod::grad_ascent;
    double fraction = 0.0;
    std::vector<TrajectoryPoint> points;  // epoch 0..E, strictly increasing
};

void write_trajectory(const Trajectory& t, const std::string& path);
Trajectory read_trajectory(const std::string& path);

// --- external model evaluation ------------------------------------------------

// Logprob rows exported by (or for) a model evaluated elsewhere. QA rows
// carry answer/paraphrase/perturbation logprobs; multiple-choice rows carry
// per-choice logprobs. Ids resolve against the referenced corpus and the
// fixture datasets ("real_authors:<i>", "world_facts:<i>").
struct ExternalEval {
    std::vector<QAEvalRow> qa_rows;
    std::vector<MCEvalRow> mc_rows;
};

ExternalEval import_external_eval(const std::string& path);
void export_external_eval(const EvalRows& rows, const std::string& path);

// Orders the rows against the suite and runs the shared report assembly, so
// the result is bit-identical to in-process evaluation of the same model.
MetricReport evaluate_external(const ExternalEval& external, const EvalSuite& suite);

struct CheckpointEval {
    MetricReport report;
    double forget_quality = 0.0;
};

// Fused pass: all metrics plus Forget Quality against the retain reference.
CheckpointEval evaluate_checkpoint(const TinyLM& model, const EvalSuite& suite,
                                   const std::vector<double>& retain_forget_truth_ratios,
                                   int decode_max_len);
CheckpointEval evaluate_checkpoint(const TinyLM& model, const EvalSuite& suite,
                                   const TinyLM& retain_reference, int decode_max_len);

void write_metric_report(const MetricReport& report, std::optional<double> forget_quality,
                         const std::string& path);

struct ExperimentResult {
    std::vector<Trajectory> trajectories;
    double retain_model_utility = 0.0;
    double finetuned_model_utility = 0.0;
};

// Full protocol: generate -> pretrain base -> finetune + retain reference ->
// unlearn (methods x configured fraction) -> evaluate every checkpoint ->
// plots. Stages are cached in out_dir/state keyed by the hash of the config
// fields each stage depends on; reruns with an unchanged config resume after
// the last completed stage.
ExperimentResult run_experiment(const RunConfig& config);

// Stage-wise entry points for the CLI. Each ensures its prerequisites.
void run_stage_generate(const RunConfig& config);
void run_stage_finetune(const RunConfig& config);  // pretrain + finetune + retain reference
void run_stage_unlearn(const RunConfig& config);
ExperimentResult run_stage_evaluate(const RunConfig& config);
void run_stage_plot(const RunConfig& config);  // re-renders from trajectory files
SanityReport run_sanity(const RunConfig& config, const SanityOptions& opts);
// Imports a logprob export, evaluates it against the run's suite and retain
// reference, and writes a metric report; returns the report.
MetricReport run_import_eval(const RunConfig& config, const std::string& eval_path,
                             const std::string& report_path);

// Plane plot (Forget Quality vs Model Utility, marker size encodes epoch,
// star = retain reference, square = finetuned start), a zoomed variant, and
// per-dataset metric-vs-epoch curves. Every plotted number is also written
// to a plain-text sidecar, verbatim from the trajectory files.
void emit_plots(const std::vector<Trajectory>& trajectories, double retain_model_utility,
                const std::string& out_dir);

// Name of the stage that was executing when an error escaped run_experiment
// (for the CLI's exit diagnostics).
const std::string& last_stage();

}  // namespace ulbench
