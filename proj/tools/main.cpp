// Command-line driver for the unlearning benchmark: generation, training,
// unlearning, evaluation, sanity checks, plots, and external-eval import.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ulbench/errors.hpp"
#include "ulbench/harness.hpp"

using namespace ulbench;

int main(int argc, char** argv) {
    CLI::App app{"Fictitious-author unlearning benchmark"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; },
           "Master seed; rederives every stage seed");
    app.add_option("--out", out_dir, "Output directory (overrides config)");

    auto* cmd_generate = app.add_subcommand("generate", "Generate corpus, profiles and split");
    auto* cmd_finetune =
        app.add_subcommand("finetune", "Pretrain the base model, finetune, train retain reference");

    std::string method_name_arg = "grad_ascent";
    double fraction = 0.10;
    int epochs = 5;
    auto* cmd_unlearn = app.add_subcommand("unlearn", "Run one unlearning method");
    cmd_unlearn->add_option("--method", method_name_arg, "grad_ascent|grad_diff|kl_min|pref_opt")
        ->required();
    cmd_unlearn->add_option("--fraction", fraction, "Forget fraction: 0.01, 0.05 or 0.10");
    cmd_unlearn->add_option("--epochs", epochs, "Unlearning epochs (1..10)");

    auto* cmd_evaluate =
        app.add_subcommand("evaluate", "Evaluate all checkpoints and write trajectories");
    cmd_evaluate->add_option("--fraction", fraction, "Forget fraction: 0.01, 0.05 or 0.10");

    int sanity_reps = 5;
    auto* cmd_sanity = app.add_subcommand("sanity", "Run the statistical sanity suite");
    cmd_sanity->add_option("--repetitions", sanity_reps, "Seeded repetitions (>= 1)");

    auto* cmd_plot = app.add_subcommand("plot", "Re-render plots from trajectory files");

    std::string eval_path, report_path = "imported_report.json";
    auto* cmd_import = app.add_subcommand("import-eval", "Evaluate an external logprob export");
    cmd_import->add_option("path", eval_path, "ExternalEval jsonl file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_import->add_option("--report", report_path, "Report output path");

    auto* cmd_run = app.add_subcommand("run", "Run the full protocol end to end");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config_file(config_path);
        if (seed_given) config.reseed(seed);
        if (!out_dir.empty()) config.out_dir = out_dir;

        if (cmd_generate->parsed()) {
            run_stage_generate(config);
            std::cout << "corpus, profiles and split written to " << config.out_dir << "\n";
        } else if (cmd_finetune->parsed()) {
            run_stage_finetune(config);
            std::cout << "base, finetuned and retain checkpoints written to " << config.out_dir
                      << "\n";
        } else if (cmd_unlearn->parsed()) {
            config.methods = {method_from_name(method_name_arg)};
            config.fraction = fraction;
            config.unlearn.epochs = epochs;
            run_stage_unlearn(config);
            std::cout << "unlearning checkpoints written to " << config.out_dir << "\n";
        } else if (cmd_evaluate->parsed()) {
            config.fraction = fraction;
            ExperimentResult result = run_stage_evaluate(config);
            for (const auto& t : result.trajectories) {
                std::cout << method_name(t.method) << " fraction " << t.fraction << ": utility "
                          << t.points.front().model_utility << " -> "
                          << t.points.back().model_utility << ", forget quality "
                          << t.points.front().forget_quality << " -> "
                          << t.points.back().forget_quality << "\n";
            }
        } else if (cmd_sanity->parsed()) {
            SanityOptions opts;
            opts.repetitions = sanity_reps;
            SanityReport report = run_sanity(config, opts);
            for (const auto& e : report.expectations) {
                std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << " (" << e.passes << "/"
                          << e.observed.size() << ")\n";
            }
            std::cout << (report.all_pass ? "sanity suite: ALL PASS" : "sanity suite: FAIL") << "\n";
            if (!report.all_pass) return 1;
        } else if (cmd_plot->parsed()) {
            run_stage_plot(config);
            std::cout << "plots written to " << config.out_dir << "\n";
        } else if (cmd_import->parsed()) {
            MetricReport report = run_import_eval(config, eval_path, report_path);
            std::cout << "model utility " << report.model_utility << ", report written to "
                      << report_path << "\n";
        } else if (cmd_run->parsed()) {
            ExperimentResult result = run_experiment(config);
            std::cout << "retain-model utility: " << result.retain_model_utility << "\n";
            std::cout << "finetuned utility:    " << result.finetuned_model_utility << "\n";
            for (const auto& t : result.trajectories) {
                std::cout << method_name(t.method) << ": forget quality "
                          << t.points.front().forget_quality << " -> "
                          << t.points.back().forget_quality << "\n";
            }
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error at stage '" << last_stage() << "': " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error at stage '" << last_stage() << "': " << e.what() << "\n";
        return 2;
    }
}
