#include "ulbench/forget_quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ulbench/errors.hpp"
#include "ulbench/metrics.hpp"
#include "ulbench/rng.hpp"

namespace ulbench {

EmpiricalCDF::EmpiricalCDF(std::vector<double> samples) : sorted(std::move(samples)) {
    if (sorted.empty()) throw InvalidArgumentError("EmpiricalCDF: empty sample");
    std::sort(sorted.begin(), sorted.end());
}

double EmpiricalCDF::at(double x) const {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw InvalidArgumentError("ks_statistic: empty sample");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double n = static_cast<double>(sa.size());
    const double m = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    // Walk the merged points; after consuming all ties at a value, the gap
    // |i/n - j/m| is the CDF difference just past it. Step functions only
    // change there, so the max over these points is the exact supremum.
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == x) ++i;
        while (j < sb.size() && sb[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    // One side exhausted: the remaining gap only shrinks toward equality at
    // the far end, but evaluate the boundary once for the pure-tail case.
    if (i < sa.size() || j < sb.size())
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    return d;
}

namespace {

double ks_p_asymptotic(double d, std::size_t n, std::size_t m) {
    if (d <= 0.0) return 1.0;
    const double nm = static_cast<double>(n) * static_cast<double>(m);
    const double scale = nm / static_cast<double>(n + m);
    return std::min(1.0, 2.0 * std::exp(-2.0 * d * d * scale));
}

// Permutation-null p-value by lattice-path counting: under H0 every
// interleaving of the pooled sample is equally likely, and the statistic of
// a path through vertex (i, j) involves |i*m - j*n| / (n*m), an integer
// numerator. Counting paths that stay strictly below the observed numerator
// gives P(D < d); the complement is the p-value P(D >= d).
double ks_p_exact(double d, std::size_t n, std::size_t m) {
    if (n + m > 20)
        throw InvalidArgumentError("exact KS p-value limited to n + m <= 20 samples");
    const long double nm = static_cast<long double>(n) * static_cast<long double>(m);
    const long long threshold =
        static_cast<long long>(std::ceil(static_cast<long double>(d) * nm - 1e-9L));
    if (threshold <= 0) return 1.0;

    std::vector<long double> dp(m + 1, 0.0L);
    auto inside = [&](std::size_t i, std::size_t j) {
        const long long score = std::llabs(static_cast<long long>(i) * static_cast<long long>(m) -
                                           static_cast<long long>(j) * static_cast<long long>(n));
        return score < threshold;
    };
    dp[0] = 1.0L;
    for (std::size_t j = 1; j <= m; ++j) dp[j] = inside(0, j) ? dp[j - 1] : 0.0L;
    for (std::size_t i = 1; i <= n; ++i) {
        std::vector<long double> next(m + 1, 0.0L);
        next[0] = inside(i, 0) ? dp[0] : 0.0L;
        for (std::size_t j = 1; j <= m; ++j)
            next[j] = inside(i, j) ? dp[j] + next[j - 1] : 0.0L;
        dp = std::move(next);
    }
    long double total = 1.0L;  // C(n+m, n)
    for (std::size_t i = 1; i <= n; ++i)
        total = total * static_cast<long double>(m + i) / static_cast<long double>(i);
    const long double p = 1.0L - dp[m] / total;
    return std::min(1.0, std::max(0.0, static_cast<double>(p)));
}

}  // namespace

double ks_p_value(double d, std::size_t n, std::size_t m, KSMode mode) {
    if (n < 1 || m < 1) throw InvalidArgumentError("ks_p_value: empty sample sizes");
    if (d < 0.0 || d > 1.0) throw InvalidArgumentError("ks_p_value: D must lie in [0, 1]");
    return mode == KSMode::asymptotic ? ks_p_asymptotic(d, n, m) : ks_p_exact(d, n, m);
}

KSResult ks_test(const std::vector<double>& a, const std::vector<double>& b, KSMode mode) {
    KSResult r;
    r.n = a.size();
    r.m = b.size();
    r.statistic = ks_statistic(a, b);
    r.p_value = ks_p_value(r.statistic, r.n, r.m, mode);
    return r;
}

double forget_quality(const std::vector<double>& candidate_truth_ratios,
                      const std::vector<double>& retain_truth_ratios) {
    if (candidate_truth_ratios.size() != retain_truth_ratios.size())
        throw InvalidArgumentError("forget_quality: truth-ratio samples cover different record sets");
    return ks_test(candidate_truth_ratios, retain_truth_ratios).p_value;
}

// --- sanity suite ----------------------------------------------------------------

namespace {

int required_passes(double pass_rate, int reps) {
    return static_cast<int>(std::ceil(pass_rate * reps - 1e-9));
}

SanityExpectation make_expectation(std::string name, std::string relation, double threshold,
                                   std::vector<double> observed, double pass_rate) {
    SanityExpectation e;
    e.name = std::move(name);
    e.relation = std::move(relation);
    e.threshold = threshold;
    e.observed = std::move(observed);
    for (double x : e.observed) {
        const bool ok = e.relation == ">=" ? x >= e.threshold
                        : e.relation == ">" ? x > e.threshold
                                            : x < e.threshold;
        if (ok) ++e.passes;
    }
    e.pass = e.passes >= required_passes(pass_rate, static_cast<int>(e.observed.size()));
    return e;
}

}  // namespace

SanityReport sanity_suite(const Corpus& corpus, const SplitSpec& split, const EvalSuite& suite,
                          const TinyLM& pretrained_base, const TrainConfig& config,
                          const SanityOptions& opts) {
    if (opts.repetitions < 1) throw InvalidArgumentError("sanity_suite: repetitions must be >= 1");

    const auto utility_of = [&](const TinyLM& model) {
        return report_from_rows(build_eval_rows(model, suite, opts.decode_max_len), suite)
            .model_utility;
    };

    const double base_utility = utility_of(pretrained_base);
    const std::vector<double> base_tr_forget = truth_ratios(pretrained_base, suite.forget);
    const std::vector<double> base_tr_retain = truth_ratios(pretrained_base, suite.retain);

    // observed[expectation][rep]
    std::vector<std::vector<double>> obs(10);
    for (int rep = 0; rep < opts.repetitions; ++rep) {
        const std::uint64_t s = derive_seed(opts.seed, static_cast<std::uint64_t>(rep));
        TrainConfig cfg = config;

        cfg.seed = derive_seed(s, 1);
        TinyLM retain_a = train_retain_reference(pretrained_base, corpus, split, cfg).model;
        cfg.seed = derive_seed(s, 2);
        TinyLM retain_b = train_retain_reference(pretrained_base, corpus, split, cfg).model;
        cfg.seed = derive_seed(s, 3);
        TinyLM finetuned = finetune(pretrained_base, corpus.records, cfg).model;
        TinyLM random_model = pretrained_base;
        {
            Rng noise(derive_seed(s, 4));
            for (double& p : random_model.params())
                p += noise.uniform(-opts.random_noise_scale, opts.random_noise_scale);
        }

        const auto tr_f = [&](const TinyLM& mdl) { return truth_ratios(mdl, suite.forget); };
        const auto tr_r = [&](const TinyLM& mdl) { return truth_ratios(mdl, suite.retain); };

        const std::vector<double> ra_f = tr_f(retain_a), ra_r = tr_r(retain_a);

        obs[0].push_back(forget_quality(ra_f, tr_f(retain_b)));
        obs[1].push_back(forget_quality(ra_r, tr_r(retain_b)));
        obs[2].push_back(forget_quality(ra_r, tr_r(random_model)));
        obs[3].push_back(forget_quality(ra_f, tr_f(random_model)));
        obs[4].push_back(forget_quality(ra_r, base_tr_retain));
        obs[5].push_back(forget_quality(ra_f, base_tr_forget));
        obs[6].push_back(forget_quality(ra_f, tr_f(finetuned)));
        obs[7].push_back(forget_quality(ra_r, tr_r(finetuned)));
        obs[8].push_back(base_utility);
        obs[9].push_back(utility_of(random_model));
    }

    SanityReport report;
    const double thr = opts.p_threshold;
    report.expectations.push_back(
        make_expectation("retain_vs_retain_forget_data", ">", thr, obs[0], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_retain_retain_data", ">", thr, obs[1], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_random_retain_data", "<", thr, obs[2], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_random_forget_data", ">", thr, obs[3], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_pretrained_retain_data", "<", thr, obs[4], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_pretrained_forget_data", ">", thr, obs[5], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_finetuned_forget_data", "<", thr, obs[6], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("retain_vs_finetuned_retain_data", ">", thr, obs[7], opts.pass_rate));
    report.expectations.push_back(
        make_expectation("base_model_utility", ">=", opts.base_utility_min, obs[8], opts.pass_rate));
    report.expectations.push_back(make_expectation("random_model_utility", "<",
                                                   opts.random_utility_factor * base_utility,
                                                   obs[9], opts.pass_rate));

    report.all_pass = std::all_of(report.expectations.begin(), report.expectations.end(),
                                  [](const SanityExpectation& e) { return e.pass; });
    return report;
}

void write_sanity_report(const SanityReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open sanity report for writing: " + path);
    for (const auto& e : report.expectations) {
        f << e.name << "\trelation=" << e.relation << "\tthreshold=" << e.threshold
          << "\tobserved=";
        for (std::size_t i = 0; i < e.observed.size(); ++i) f << (i ? "," : "") << e.observed[i];
        f << "\tpasses=" << e.passes << "/" << e.observed.size() << "\t"
          << (e.pass ? "PASS" : "FAIL") << "\n";
    }
    f << (report.all_pass ? "ALL PASS" : "SUITE FAIL") << "\n";
}

}  // namespace ulbench
