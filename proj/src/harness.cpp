#include "ulbench/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ulbench/errors.hpp"
#include "ulbench/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ulbench {

namespace {
std::string g_stage = "init";
void set_stage(const std::string& s) { g_stage = s; }
}  // namespace

const std::string& last_stage() { return g_stage; }

// --- config -------------------------------------------------------------------

void RunConfig::validate() const {
    if (n_authors < 4) throw InvalidArgumentError("config: n_authors must be >= 4");
    if (n_background_authors < 1)
        throw InvalidArgumentError("config: n_background_authors must be >= 1");
    if (fraction != 0.01 && fraction != 0.05 && fraction != 0.10)
        throw InvalidArgumentError("config: fraction must be one of 0.01, 0.05, 0.10");
    if (methods.empty()) throw InvalidArgumentError("config: empty method set");
    if (unlearn.epochs < 1 || unlearn.epochs > 10)
        throw InvalidArgumentError("config: unlearning epochs must lie in 1..10");
    if (pretrain.epochs < 1 || finetune.epochs < 1)
        throw InvalidArgumentError("config: training epochs must be >= 1");
    if (decode_max_len < 1) throw InvalidArgumentError("config: decode_max_len must be >= 1");
}

void RunConfig::reseed(std::uint64_t master) {
    corpus_seed = derive_seed(master, 1);
    split_seed = derive_seed(master, 2);
    pretrain.seed = derive_seed(master, 3);
    finetune.seed = derive_seed(master, 4);
    unlearn.seed = derive_seed(master, 5);
}

namespace {

json train_config_to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"effective_batch_size", c.effective_batch_size},
                {"warmup", c.warmup},
                {"weight_decay", c.weight_decay},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.effective_batch_size = j.at("effective_batch_size").get<int>();
    c.warmup = j.at("warmup").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

json config_to_json_obj(const RunConfig& c) {
    json methods = json::array();
    for (auto m : c.methods) methods.push_back(method_name(m));
    return json{{"n_authors", c.n_authors},
                {"n_background_authors", c.n_background_authors},
                {"corpus_seed", c.corpus_seed},
                {"split_seed", c.split_seed},
                {"fraction", c.fraction},
                {"methods", methods},
                {"pretrain", train_config_to_json(c.pretrain)},
                {"finetune", train_config_to_json(c.finetune)},
                {"unlearn", train_config_to_json(c.unlearn)},
                {"real_authors_path", c.real_authors_path},
                {"world_facts_path", c.world_facts_path},
                {"out_dir", c.out_dir},
                {"decode_max_len", c.decode_max_len}};
}

}  // namespace

std::string config_to_json(const RunConfig& config) { return config_to_json_obj(config).dump(2); }

RunConfig config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError("malformed config json");
    RunConfig c;
    c.n_authors = j.value("n_authors", c.n_authors);
    c.n_background_authors = j.value("n_background_authors", c.n_background_authors);
    c.corpus_seed = j.value("corpus_seed", c.corpus_seed);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.fraction = j.value("fraction", c.fraction);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(method_from_name(m.get<std::string>()));
    }
    if (j.contains("pretrain")) c.pretrain = train_config_from_json(j["pretrain"]);
    if (j.contains("finetune")) c.finetune = train_config_from_json(j["finetune"]);
    if (j.contains("unlearn")) c.unlearn = train_config_from_json(j["unlearn"]);
    c.real_authors_path = j.value("real_authors_path", c.real_authors_path);
    c.world_facts_path = j.value("world_facts_path", c.world_facts_path);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.decode_max_len = j.value("decode_max_len", c.decode_max_len);
    c.validate();
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_json(ss.str());
}

std::uint64_t config_hash(const RunConfig& config) {
    json j = config_to_json_obj(config);
    j.erase("out_dir");
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// --- trajectory io --------------------------------------------------------------

namespace {

json means_to_json(const ScaledMeans& m) {
    return json{{"probability", m.probability}, {"rouge", m.rouge}, {"truth_ratio", m.truth_ratio}};
}

ScaledMeans means_from_json(const json& j) {
    ScaledMeans m;
    m.probability = j.at("probability").get<double>();
    m.rouge = j.at("rouge").get<double>();
    m.truth_ratio = j.at("truth_ratio").get<double>();
    return m;
}

}  // namespace

void write_trajectory(const Trajectory& t, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open trajectory for writing: " + path);
    for (const auto& p : t.points) {
        json j{{"method", method_name(t.method)},
               {"fraction", t.fraction},
               {"epoch", p.epoch},
               {"model_utility", p.model_utility},
               {"forget_quality", p.forget_quality},
               {"forget", means_to_json(p.forget_raw)},
               {"retain", means_to_json(p.retain_raw)},
               {"real_authors", means_to_json(p.real_authors_raw)},
               {"world_facts", means_to_json(p.world_facts_raw)}};
        f << j.dump() << "\n";
    }
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open trajectory: " + path);
    Trajectory t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw SchemaError("malformed trajectory row", line_no);
        t.method = method_from_name(j.at("method").get<std::string>());
        t.fraction = j.at("fraction").get<double>();
        TrajectoryPoint p;
        p.epoch = j.at("epoch").get<int>();
        p.model_utility = j.at("model_utility").get<double>();
        p.forget_quality = j.at("forget_quality").get<double>();
        p.forget_raw = means_from_json(j.at("forget"));
        p.retain_raw = means_from_json(j.at("retain"));
        p.real_authors_raw = means_from_json(j.at("real_authors"));
        p.world_facts_raw = means_from_json(j.at("world_facts"));
        t.points.push_back(p);
    }
    return t;
}

// --- external eval ---------------------------------------------------------------

namespace {

std::vector<double> doubles_from(const json& arr, std::size_t line_no, const char* key) {
    if (!arr.is_array() || arr.empty())
        throw SchemaError(std::string("'") + key + "' must be a non-empty array", line_no);
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& x : arr) {
        if (!x.is_number()) throw SchemaError(std::string("non-numeric entry in '") + key + "'", line_no);
        out.push_back(x.get<double>());
    }
    return out;
}

json logprob_json(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(x);
    return arr;
}

}  // namespace

void export_external_eval(const EvalRows& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open export target: " + path);
    auto write_qa = [&](const QAEvalRow& r) {
        json pert = json::array();
        for (const auto& p : r.perturbed_token_logprobs) pert.push_back(logprob_json(p));
        json j{{"record_id", r.record_id},
               {"answer_token_logprobs", logprob_json(r.answer_token_logprobs)},
               {"paraphrase_token_logprobs", logprob_json(r.paraphrase_token_logprobs)},
               {"perturbed_token_logprobs", pert},
               {"generation", r.generation}};
        f << j.dump() << "\n";
    };
    auto write_mc = [&](const MCEvalRow& r) {
        json choices = json::array();
        for (const auto& c : r.mc_choice_logprobs) choices.push_back(logprob_json(c));
        json j{{"record_id", r.record_id},
               {"answer_token_logprobs", logprob_json(r.answer_token_logprobs)},
               {"generation", r.generation},
               {"mc_choice_logprobs", choices}};
        f << j.dump() << "\n";
    };
    for (const auto& r : rows.forget) write_qa(r);
    for (const auto& r : rows.retain) write_qa(r);
    for (const auto& r : rows.real_authors) write_mc(r);
    for (const auto& r : rows.world_facts) write_mc(r);
}

ExternalEval import_external_eval(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open external eval: " + path);
    ExternalEval ext;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw SchemaError("malformed external eval row", line_no);
        if (!j.contains("record_id") || !j["record_id"].is_string())
            throw SchemaError("missing 'record_id'", line_no);
        if (!j.contains("generation") || !j["generation"].is_string())
            throw SchemaError("missing 'generation'", line_no);
        if (j.contains("mc_choice_logprobs")) {
            MCEvalRow r;
            r.record_id = j["record_id"].get<std::string>();
            r.generation = j["generation"].get<std::string>();
            if (!j["mc_choice_logprobs"].is_array() || j["mc_choice_logprobs"].size() < 2)
                throw SchemaError("'mc_choice_logprobs' must hold at least 2 arrays", line_no);
            for (const auto& c : j["mc_choice_logprobs"])
                r.mc_choice_logprobs.push_back(doubles_from(c, line_no, "mc_choice_logprobs"));
            r.answer_token_logprobs =
                doubles_from(j.at("answer_token_logprobs"), line_no, "answer_token_logprobs");
            ext.mc_rows.push_back(std::move(r));
        } else {
            QAEvalRow r;
            r.record_id = j["record_id"].get<std::string>();
            r.generation = j["generation"].get<std::string>();
            r.answer_token_logprobs =
                doubles_from(j.at("answer_token_logprobs"), line_no, "answer_token_logprobs");
            if (!j.contains("paraphrase_token_logprobs"))
                throw SchemaError("missing 'paraphrase_token_logprobs'", line_no);
            r.paraphrase_token_logprobs =
                doubles_from(j["paraphrase_token_logprobs"], line_no, "paraphrase_token_logprobs");
            if (!j.contains("perturbed_token_logprobs") || !j["perturbed_token_logprobs"].is_array() ||
                j["perturbed_token_logprobs"].size() != 5)
                throw SchemaError("'perturbed_token_logprobs' must be an array of exactly 5 arrays",
                                  line_no);
            for (const auto& p : j["perturbed_token_logprobs"])
                r.perturbed_token_logprobs.push_back(
                    doubles_from(p, line_no, "perturbed_token_logprobs"));
            ext.qa_rows.push_back(std::move(r));
        }
    }
    if (ext.qa_rows.empty() && ext.mc_rows.empty())
        throw SchemaError("external eval file holds no rows: " + path, 0);
    return ext;
}

MetricReport evaluate_external(const ExternalEval& external, const EvalSuite& suite) {
    std::map<std::string, const QAEvalRow*> qa_by_id;
    for (const auto& r : external.qa_rows) qa_by_id[r.record_id] = &r;
    std::map<std::string, const MCEvalRow*> mc_by_id;
    for (const auto& r : external.mc_rows) mc_by_id[r.record_id] = &r;

    EvalRows rows;
    auto pull_qa = [&](const std::vector<QARecord>& records, std::vector<QAEvalRow>& out) {
        for (const auto& rec : records) {
            auto it = qa_by_id.find(rec.record_id);
            if (it == qa_by_id.end())
                throw InvalidArgumentError("external eval lacks record " + rec.record_id);
            out.push_back(*it->second);
        }
    };
    auto pull_mc = [&](const std::string& prefix, const std::vector<MCRecord>& records,
                       std::vector<MCEvalRow>& out) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            const std::string id = prefix + ":" + std::to_string(i);
            auto it = mc_by_id.find(id);
            if (it == mc_by_id.end()) throw InvalidArgumentError("external eval lacks record " + id);
            if (it->second->mc_choice_logprobs.size() != records[i].choices.size())
                throw InvalidArgumentError("external eval choice count mismatch for " + id);
            out.push_back(*it->second);
        }
    };
    pull_qa(suite.forget, rows.forget);
    pull_qa(suite.retain, rows.retain);
    pull_mc("real_authors", suite.real_authors, rows.real_authors);
    pull_mc("world_facts", suite.world_facts, rows.world_facts);
    return report_from_rows(rows, suite);
}

// --- checkpoint evaluation --------------------------------------------------------

CheckpointEval evaluate_checkpoint(const TinyLM& model, const EvalSuite& suite,
                                   const std::vector<double>& retain_forget_truth_ratios,
                                   int decode_max_len) {
    CheckpointEval out;
    out.report = report_from_rows(build_eval_rows(model, suite, decode_max_len), suite);
    out.forget_quality = forget_quality(out.report.forget_truth_ratios, retain_forget_truth_ratios);
    return out;
}

CheckpointEval evaluate_checkpoint(const TinyLM& model, const EvalSuite& suite,
                                   const TinyLM& retain_reference, int decode_max_len) {
    return evaluate_checkpoint(model, suite, truth_ratios(retain_reference, suite.forget),
                               decode_max_len);
}

void write_metric_report(const MetricReport& report, std::optional<double> forget_quality_p,
                         const std::string& path) {
    auto dataset_json = [](const DatasetMetrics& m) {
        return json{{"probability", m.probability},
                    {"rouge", m.rouge},
                    {"truth_ratio", m.truth_ratio},
                    {"underflow_flags", m.underflow_flags}};
    };
    json j{{"raw",
            json{{"forget", dataset_json(report.raw.forget)},
                 {"retain", dataset_json(report.raw.retain)},
                 {"real_authors", dataset_json(report.raw.real_authors)},
                 {"world_facts", dataset_json(report.raw.world_facts)}}},
           {"scaled_means",
            json{{"retain", means_to_json(report.retain)},
                 {"real_authors", means_to_json(report.real_authors)},
                 {"world_facts", means_to_json(report.world_facts)}}},
           {"model_utility", report.model_utility},
           {"forget_truth_ratios", report.forget_truth_ratios}};
    if (forget_quality_p) j["forget_quality"] = *forget_quality_p;
    std::ofstream f(path);
    if (!f) throw Error("cannot open report for writing: " + path);
    f << j.dump(2) << "\n";
}

// --- experiment stages --------------------------------------------------------------

namespace {

std::string frac_str(double fraction) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ScaledMeans raw_means(const DatasetMetrics& m) {
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    ScaledMeans out;
    out.probability = mean_of(m.probability);
    out.rouge = mean_of(m.rouge);
    out.truth_ratio = mean_of(m.truth_ratio);
    return out;
}

TrajectoryPoint make_point(int epoch, const CheckpointEval& eval) {
    TrajectoryPoint p;
    p.epoch = epoch;
    p.model_utility = eval.report.model_utility;
    p.forget_quality = eval.forget_quality;
    p.forget_raw = raw_means(eval.report.raw.forget);
    p.retain_raw = raw_means(eval.report.raw.retain);
    p.real_authors_raw = raw_means(eval.report.raw.real_authors);
    p.world_facts_raw = raw_means(eval.report.raw.world_facts);
    return p;
}

// Name-census records teach the base model to spell every author name
// without exposing any attribute, the way real pretraining exposes name
// subwords long before any biography is learned.
std::vector<QARecord> census_records(const Corpus& corpus) {
    std::vector<QARecord> out;
    for (const auto& p : corpus.profiles) {
        QARecord r;
        r.record_id = "census:" + p.author_id;
        r.author_id = p.author_id;
        r.question = "Have you heard of the author " + p.name + "?";
        r.answer = "The name " + p.name + " appears among contemporary authors.";
        out.push_back(std::move(r));
    }
    return out;
}

// Fixture QA pairs double as pretraining records for the base model.
std::vector<QARecord> fixture_records(const std::vector<MCRecord>& mcs, const std::string& prefix) {
    std::vector<QARecord> out;
    for (std::size_t i = 0; i < mcs.size(); ++i) {
        QARecord r;
        r.record_id = prefix + ":" + std::to_string(i);
        r.author_id = prefix;
        r.question = mcs[i].question;
        r.answer = mcs[i].answer;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::string> vocab_texts(const Corpus& main_corpus, const Corpus& background,
                                     const EvalSuite& suite) {
    std::vector<std::string> texts;
    texts.push_back("Have you heard of the author?");
    texts.push_back("The name appears among contemporary authors.");
    auto add_records = [&](const std::vector<QARecord>& records) {
        for (const auto& r : records) {
            texts.push_back(r.question);
            texts.push_back(r.answer);
            texts.push_back(r.paraphrased_answer);
            for (const auto& p : r.perturbed_answers) texts.push_back(p);
        }
    };
    add_records(main_corpus.records);
    add_records(background.records);
    for (const auto* mcs : {&suite.real_authors, &suite.world_facts}) {
        for (const auto& mc : *mcs) {
            texts.push_back(mc.question);
            texts.push_back(mc.answer);
            for (const auto& c : mc.choices) texts.push_back(c);
        }
    }
    return texts;
}

// Runs the protocol stage by stage, caching completed stages on disk keyed
// by a hash of exactly the config fields the stage depends on.
class Experiment {
public:
    explicit Experiment(RunConfig config) : cfg_(std::move(config)), out_(cfg_.out_dir) {
        cfg_.validate();
        fs::create_directories(out_);
        fs::create_directories(out_ / "state");
        std::ofstream f(out_ / "config.json");
        f << config_to_json(cfg_) << "\n";
    }

    const RunConfig& config() const { return cfg_; }

    void generate() {
        set_stage("generate");
        const auto outputs = generate_outputs();
        if (stage_done("generate", generate_hash(), outputs)) {
            if (corpus_.records.empty()) load_generate();
            return;
        }
        Corpus combined =
            generate_corpus(cfg_.n_authors + cfg_.n_background_authors, cfg_.corpus_seed);
        corpus_ = Corpus{};
        background_ = Corpus{};
        for (int a = 0; a < cfg_.n_authors + cfg_.n_background_authors; ++a) {
            (a < cfg_.n_authors ? corpus_ : background_)
                .profiles.push_back(combined.profiles[static_cast<std::size_t>(a)]);
        }
        const auto& last_main_id = corpus_.profiles.back().author_id;
        for (const auto& r : combined.records) {
            (r.author_id <= last_main_id ? corpus_ : background_).records.push_back(r);
        }
        split_ = make_split(corpus_, cfg_.fraction, cfg_.split_seed);
        write_corpus(corpus_, (out_ / "corpus.jsonl").string(), (out_ / "profiles.jsonl").string());
        write_corpus(background_, (out_ / "background_corpus.jsonl").string(),
                     (out_ / "background_profiles.jsonl").string());
        write_split(split_, split_path().string());
        mark_stage("generate", generate_hash());
    }

    void pretrain() {
        generate();
        load_suite();
        set_stage("pretrain");
        if (stage_done("pretrain", pretrain_hash(), {base_path()})) {
            if (!base_) base_ = TinyLM::load(base_path().string());
            return;
        }
        Vocab vocab = Vocab::build(vocab_texts(corpus_, background_, suite_));
        TinyLM init(vocab);
        init.init_params(derive_seed(cfg_.pretrain.seed, 0xb0), 0.05);
        std::vector<QARecord> records = background_.records;
        for (auto&& r : census_records(corpus_)) records.push_back(std::move(r));
        for (auto&& r : census_records(background_)) records.push_back(std::move(r));
        for (auto&& r : fixture_records(suite_.real_authors, "real_authors"))
            records.push_back(std::move(r));
        for (auto&& r : fixture_records(suite_.world_facts, "world_facts"))
            records.push_back(std::move(r));
        TrainedModel trained = finetune(init, records, cfg_.pretrain);
        trained.model.save(base_path().string());
        base_ = std::move(trained.model);
        mark_stage("pretrain", pretrain_hash());
    }

    void finetune_stage() {
        pretrain();
        set_stage("finetune");
        if (stage_done("finetune", finetune_hash(), {finetuned_path(), retain_path()})) {
            if (!finetuned_) finetuned_ = TinyLM::load(finetuned_path().string());
            if (!retain_) retain_ = TinyLM::load(retain_path().string());
            return;
        }
        {
            std::ofstream f(out_ / "finetune_config.json");
            f << train_config_to_json(cfg_.finetune).dump(2) << "\n";
        }
        TrainedModel ft =
            finetune(*base_, corpus_.records, cfg_.finetune, Provenance::finetuned_full, split_,
                     [&](int epoch, const TinyLM& m) {
                         m.save((out_ / ("finetune_epoch" + std::to_string(epoch) + ".ckpt")).string());
                     });
        write_ledger(ft.ledger, (out_ / "finetune.ledger").string());
        ft.model.save(finetuned_path().string());

        TrainConfig retain_cfg = cfg_.finetune;
        retain_cfg.seed = derive_seed(cfg_.finetune.seed, 0x4e7a);
        TrainedModel rt = train_retain_reference(*base_, corpus_, split_, retain_cfg);
        audit_retain_ledger(rt.ledger);
        write_ledger(rt.ledger, (out_ / ("retain_" + frac_str(cfg_.fraction) + ".ledger")).string());
        rt.model.save(retain_path().string());
        finetuned_ = std::move(ft.model);
        retain_ = std::move(rt.model);
        mark_stage("finetune", finetune_hash());
    }

    void unlearn_stage() {
        finetune_stage();
        set_stage("unlearn");
        std::vector<fs::path> outputs;
        for (auto method : cfg_.methods) {
            for (int e = 1; e <= cfg_.unlearn.epochs; ++e) outputs.push_back(ckpt_path(method, e));
        }
        if (stage_done("unlearn", unlearn_hash(), outputs)) return;
        TrainedModel handle{*finetuned_, Provenance::finetuned_full, cfg_.finetune, split_, {}};
        FrozenReference original = clone_frozen(*finetuned_);
        for (auto method : cfg_.methods) {
            UnlearnResult res =
                run_unlearning(handle, method, corpus_, split_, cfg_.unlearn, original);
            for (std::size_t e = 0; e < res.checkpoints.size(); ++e)
                res.checkpoints[e].save(ckpt_path(method, static_cast<int>(e) + 1).string());
            write_ledger(res.sample_ledger,
                         (out_ / (method_name(method) + "_" + frac_str(cfg_.fraction) + ".ledger"))
                             .string());
            json budget{{"forget_samples_used", res.ledger.forget_samples_used},
                        {"retain_samples_used", res.ledger.retain_samples_used},
                        {"epochs", res.ledger.epochs}};
            std::ofstream bf(out_ /
                             (method_name(method) + "_" + frac_str(cfg_.fraction) + "_budget.json"));
            bf << budget.dump(2) << "\n";
        }
        mark_stage("unlearn", unlearn_hash());
    }

    ExperimentResult evaluate_stage() {
        unlearn_stage();
        set_stage("evaluate");
        ExperimentResult result;
        std::vector<fs::path> outputs = {retain_report_path(), finetuned_report_path()};
        for (auto method : cfg_.methods) outputs.push_back(traj_path(method));
        if (stage_done("evaluate", evaluate_hash(), outputs)) {
            for (auto method : cfg_.methods)
                result.trajectories.push_back(read_trajectory(traj_path(method).string()));
            result.retain_model_utility = report_utility(retain_report_path());
            result.finetuned_model_utility = report_utility(finetuned_report_path());
            return result;
        }

        const std::vector<double> retain_forget_trs = truth_ratios(*retain_, suite_.forget);

        // Retain star: its forget quality against itself is 1 by definition.
        CheckpointEval retain_eval =
            evaluate_checkpoint(*retain_, suite_, retain_forget_trs, cfg_.decode_max_len);
        write_metric_report(retain_eval.report, retain_eval.forget_quality,
                            retain_report_path().string());
        result.retain_model_utility = retain_eval.report.model_utility;

        CheckpointEval epoch0 =
            evaluate_checkpoint(*finetuned_, suite_, retain_forget_trs, cfg_.decode_max_len);
        write_metric_report(epoch0.report, epoch0.forget_quality, finetuned_report_path().string());
        result.finetuned_model_utility = epoch0.report.model_utility;

        for (auto method : cfg_.methods) {
            Trajectory traj;
            traj.method = method;
            traj.fraction = cfg_.fraction;
            traj.points.push_back(make_point(0, epoch0));
            for (int e = 1; e <= cfg_.unlearn.epochs; ++e) {
                TinyLM ckpt = TinyLM::load(ckpt_path(method, e).string());
                CheckpointEval eval =
                    evaluate_checkpoint(ckpt, suite_, retain_forget_trs, cfg_.decode_max_len);
                write_metric_report(eval.report, eval.forget_quality,
                                    (out_ / ("report_" + method_name(method) + "_" +
                                             frac_str(cfg_.fraction) + "_epoch" + std::to_string(e) +
                                             ".json")).string());
                traj.points.push_back(make_point(e, eval));
            }
            write_trajectory(traj, traj_path(method).string());
            result.trajectories.push_back(std::move(traj));
        }
        mark_stage("evaluate", evaluate_hash());
        return result;
    }

    void plot_stage(const ExperimentResult& result) {
        set_stage("plot");
        emit_plots(result.trajectories, result.retain_model_utility, out_.string());
    }

    SanityReport sanity(const SanityOptions& opts) {
        pretrain();
        set_stage("sanity");
        SanityReport report = sanity_suite(corpus_, split_, suite_, *base_, cfg_.finetune, opts);
        write_sanity_report(report, (out_ / "sanity_report.txt").string());
        return report;
    }

    MetricReport import_eval(const std::string& eval_path, const std::string& report_path) {
        finetune_stage();
        set_stage("import-eval");
        ExternalEval ext = import_external_eval(eval_path);
        MetricReport report = evaluate_external(ext, suite_);
        const double fq =
            forget_quality(report.forget_truth_ratios, truth_ratios(*retain_, suite_.forget));
        write_metric_report(report, fq, report_path);
        return report;
    }

    const EvalSuite& suite() const { return suite_; }

private:
    fs::path split_path() const {
        return out_ / ("split_" + frac_str(cfg_.fraction) + ".json");
    }
    fs::path base_path() const { return out_ / "base.ckpt"; }
    fs::path finetuned_path() const { return out_ / "finetuned.ckpt"; }
    fs::path retain_path() const {
        return out_ / ("retain_" + frac_str(cfg_.fraction) + ".ckpt");
    }
    fs::path ckpt_path(UnlearnMethod method, int epoch) const {
        return out_ / (method_name(method) + "_" + frac_str(cfg_.fraction) + "_" +
                       std::to_string(epoch) + ".ckpt");
    }
    fs::path traj_path(UnlearnMethod method) const {
        return out_ / (method_name(method) + "_" + frac_str(cfg_.fraction) + ".traj");
    }
    fs::path retain_report_path() const {
        return out_ / ("report_retain_" + frac_str(cfg_.fraction) + ".json");
    }
    fs::path finetuned_report_path() const {
        return out_ / ("report_finetuned_" + frac_str(cfg_.fraction) + ".json");
    }

    std::vector<fs::path> generate_outputs() const {
        return {out_ / "corpus.jsonl", out_ / "profiles.jsonl", out_ / "background_corpus.jsonl",
                out_ / "background_profiles.jsonl", split_path()};
    }

    // Stage hashes cover exactly the inputs a stage's outputs depend on.
    std::uint64_t generate_hash() const {
        json j{{"n_authors", cfg_.n_authors},
               {"n_background_authors", cfg_.n_background_authors},
               {"corpus_seed", cfg_.corpus_seed},
               {"split_seed", cfg_.split_seed},
               {"fraction", cfg_.fraction}};
        return fnv1a(j.dump());
    }
    std::uint64_t pretrain_hash() const {
        json j{{"generate", generate_hash()},
               {"pretrain", train_config_to_json(cfg_.pretrain)},
               {"real_authors_path", cfg_.real_authors_path},
               {"world_facts_path", cfg_.world_facts_path}};
        return fnv1a(j.dump());
    }
    std::uint64_t finetune_hash() const {
        json j{{"pretrain", pretrain_hash()}, {"finetune", train_config_to_json(cfg_.finetune)}};
        return fnv1a(j.dump());
    }
    std::uint64_t unlearn_hash() const {
        json methods = json::array();
        for (auto m : cfg_.methods) methods.push_back(method_name(m));
        json j{{"finetune", finetune_hash()},
               {"unlearn", train_config_to_json(cfg_.unlearn)},
               {"methods", methods}};
        return fnv1a(j.dump());
    }
    std::uint64_t evaluate_hash() const {
        json j{{"unlearn", unlearn_hash()}, {"decode_max_len", cfg_.decode_max_len}};
        return fnv1a(j.dump());
    }

    bool stage_done(const std::string& stage, std::uint64_t hash,
                    const std::vector<fs::path>& outputs) const {
        fs::path marker = out_ / "state" / (stage + ".done");
        if (!fs::exists(marker)) return false;
        std::ifstream f(marker);
        std::string recorded;
        f >> recorded;
        if (recorded != std::to_string(hash)) return false;
        for (const auto& p : outputs) {
            if (!fs::exists(p)) return false;
        }
        return true;
    }

    void mark_stage(const std::string& stage, std::uint64_t hash) const {
        std::ofstream f(out_ / "state" / (stage + ".done"));
        f << hash << "\n";
    }

    void load_generate() {
        corpus_ = read_corpus((out_ / "corpus.jsonl").string(), (out_ / "profiles.jsonl").string());
        background_ = read_corpus((out_ / "background_corpus.jsonl").string(),
                                  (out_ / "background_profiles.jsonl").string());
        split_ = read_split(split_path().string());
    }

    void load_suite() {
        if (suite_.forget.empty() && suite_.retain.empty())
            suite_ = build_eval_suite(corpus_, split_, cfg_.real_authors_path,
                                      cfg_.world_facts_path);
    }

    void audit_retain_ledger(const SampleLedger& ledger) const {
        for (const auto& step : ledger) {
            for (const auto& id : step) {
                for (const auto& rec : suite_.forget) {
                    if (rec.record_id == id)
                        throw Error("retain reference ledger contains forget record " + id);
                }
            }
        }
    }

    double report_utility(const fs::path& p) const {
        std::ifstream f(p);
        json j = json::parse(f);
        return j.at("model_utility").get<double>();
    }

    RunConfig cfg_;
    fs::path out_;
    Corpus corpus_, background_;
    SplitSpec split_;
    EvalSuite suite_;
    std::optional<TinyLM> base_, finetuned_, retain_;
};

}  // namespace

ExperimentResult run_experiment(const RunConfig& config) {
    Experiment exp(config);
    ExperimentResult result = exp.evaluate_stage();
    exp.plot_stage(result);
    set_stage("done");
    return result;
}

void run_stage_generate(const RunConfig& config) { Experiment(config).generate(); }

void run_stage_finetune(const RunConfig& config) { Experiment(config).finetune_stage(); }

void run_stage_unlearn(const RunConfig& config) { Experiment(config).unlearn_stage(); }

ExperimentResult run_stage_evaluate(const RunConfig& config) {
    return Experiment(config).evaluate_stage();
}

void run_stage_plot(const RunConfig& config) {
    Experiment exp(config);
    ExperimentResult result = exp.evaluate_stage();  // cached when already evaluated
    exp.plot_stage(result);
}

SanityReport run_sanity(const RunConfig& config, const SanityOptions& opts) {
    return Experiment(config).sanity(opts);
}

MetricReport run_import_eval(const RunConfig& config, const std::string& eval_path,
                             const std::string& report_path) {
    return Experiment(config).import_eval(eval_path, report_path);
}

}  // namespace ulbench
