#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ulbench/dataset.hpp"
#include "ulbench/finetune.hpp"
#include "ulbench/lm.hpp"

namespace ulbench {

// Sorted sample values backing one side of the two-sample test.
struct EmpiricalCDF {
    std::vector<double> sorted;

    explicit EmpiricalCDF(std::vector<double> samples);
    std::size_t n() const { return sorted.size(); }
    // F(x) = fraction of samples <= x
    double at(double x) const;
};

struct KSResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0, m = 0;
};

// Exact supremum of |F_a - F_b| over the merged sample points (tie-safe).
double ks_statistic(const std::vector<double>& a, const std::vector<double>& b);

enum class KSMode {
    asymptotic,          // inversion of the critical-value inequality (default)
    exact_small_sample,  // permutation-null lattice count, n + m <= 20
};

// Two-sided p-value. The asymptotic mode is min(1, 2*exp(-2 D^2 nm/(n+m))),
// the minimal significance level at which D exceeds the critical value
// c(alpha)*sqrt((n+m)/nm) with c(alpha) = sqrt(-ln(alpha/2)/2).
double ks_p_value(double d, std::size_t n, std::size_t m, KSMode mode = KSMode::asymptotic);

KSResult ks_test(const std::vector<double>& a, const std::vector<double>& b,
                 KSMode mode = KSMode::asymptotic);

// Forget Quality: KS p-value between the candidate's and the retain
// reference's Truth Ratio samples over the same forget-set records.
double forget_quality(const std::vector<double>& candidate_truth_ratios,
                      const std::vector<double>& retain_truth_ratios);

// --- sanity suite ------------------------------------------------------------

struct SanityOptions {
    int repetitions = 5;
    double p_threshold = 0.05;
    double pass_rate = 0.8;
    // Desk-scale regression thresholds for the two utility expectations.
    double base_utility_min = 0.15;
    double random_utility_factor = 0.1;
    // The random-weights model draws its parameters around the untuned base
    // (base plus uniform noise). A scale-free init collapses every truth
    // ratio onto 1 and the KS test trivially separates it from any trained
    // model, which is not what the check is probing.
    double random_noise_scale = 0.40;
    std::uint64_t seed = 20240;
    int decode_max_len = 40;
};

struct SanityExpectation {
    std::string name;
    std::vector<double> observed;  // one value per repetition
    std::string relation;          // "p>thr", "p<thr", "x>=thr", "x<thr"
    double threshold = 0.0;
    int passes = 0;
    bool pass = false;
};

struct SanityReport {
    std::vector<SanityExpectation> expectations;
    bool all_pass = false;
};

// Runs the ten distributional/utility expectations over seeded repetitions:
// retain-vs-retain (high p on forget and retain data), retain vs random /
// pretrained / finetuned with the prescribed high-low pattern, utility high
// for the untuned base and near zero for random weights.
SanityReport sanity_suite(const Corpus& corpus, const SplitSpec& split, const EvalSuite& suite,
                          const TinyLM& pretrained_base, const TrainConfig& config,
                          const SanityOptions& opts = {});

void write_sanity_report(const SanityReport& report, const std::string& path);

}  // namespace ulbench
