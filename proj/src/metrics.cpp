#include "ulbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ulbench/errors.hpp"
#include "ulbench/finetune.hpp"
#include "ulbench/text.hpp"

namespace ulbench {

namespace {

constexpr double kDenominatorFloor = 1e-300;

double mean(const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
}

std::vector<double> answer_logprobs(const TinyLM& model, const std::string& question,
                                    const std::string& answer) {
    EncodedQA e = encode_qa(question, answer, model.vocab());
    if (e.answer.empty()) throw InvalidRecordError("empty answer after tokenization");
    std::vector<double> nll = model.sequence_nll(e.prompt, e.answer);
    for (double& x : nll) x = -x;
    return nll;
}

}  // namespace

double normalized_probability_from_logprobs(const std::vector<double>& token_logprobs) {
    if (token_logprobs.empty()) throw InvalidRecordError("empty logprob array");
    return std::exp(mean(token_logprobs));
}

double normalized_answer_probability(const TinyLM& model, const std::string& question,
                                     const std::string& answer) {
    return normalized_probability_from_logprobs(answer_logprobs(model, question, answer));
}

double multiple_choice_probability(const TinyLM& model, const MCRecord& mc,
                                   bool length_normalized) {
    if (mc.choices.size() < 2) throw InvalidArgumentError("multiple choice needs >= 2 choices");
    double correct = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < mc.choices.size(); ++i) {
        const std::vector<double> lps = answer_logprobs(model, mc.question, mc.choices[i]);
        double p;
        if (length_normalized) {
            p = std::exp(mean(lps));
        } else {
            double sum = 0.0;
            for (double lp : lps) sum += lp;
            p = std::exp(sum);
        }
        total += p;
        if (static_cast<int>(i) == mc.correct_index) correct = p;
    }
    return correct / total;
}

double rouge_l_recall(const std::string& reference, const std::string& candidate) {
    const std::vector<std::string> ref = word_tokens(reference);
    const std::vector<std::string> cand = word_tokens(candidate);
    if (ref.empty()) return 0.0;
    if (cand.empty()) return 0.0;
    // Classic LCS dynamic program, two rolling rows.
    std::vector<std::size_t> prev(cand.size() + 1, 0), cur(cand.size() + 1, 0);
    for (std::size_t i = 1; i <= ref.size(); ++i) {
        for (std::size_t j = 1; j <= cand.size(); ++j) {
            if (ref[i - 1] == cand[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[cand.size()]) / static_cast<double>(ref.size());
}

double truth_ratio_from_logprobs(const std::vector<double>& paraphrase_logprobs,
                                 const std::vector<std::vector<double>>& perturbed_logprobs,
                                 bool* flagged) {
    if (perturbed_logprobs.empty()) throw InvalidRecordError("no perturbed answers");
    double numerator = 0.0;
    for (const auto& lps : perturbed_logprobs) numerator += normalized_probability_from_logprobs(lps);
    numerator /= static_cast<double>(perturbed_logprobs.size());
    double denominator = normalized_probability_from_logprobs(paraphrase_logprobs);
    if (denominator < kDenominatorFloor) {
        denominator = kDenominatorFloor;
        if (flagged) *flagged = true;
    }
    return numerator / denominator;
}

double truth_ratio(const TinyLM& model, const QARecord& record, bool* flagged) {
    if (record.perturbed_answers.size() != 5)
        throw InvalidRecordError("record " + record.record_id + " lacks 5 perturbed answers");
    std::vector<std::vector<double>> pert;
    pert.reserve(5);
    for (const auto& p : record.perturbed_answers)
        pert.push_back(answer_logprobs(model, record.question, p));
    return truth_ratio_from_logprobs(
        answer_logprobs(model, record.question, record.paraphrased_answer), pert, flagged);
}

double truth_ratio_mc(const TinyLM& model, const MCRecord& mc, bool* flagged) {
    if (mc.choices.size() < 2) throw InvalidArgumentError("multiple choice needs >= 2 choices");
    std::vector<std::vector<double>> wrong;
    std::vector<double> correct;
    for (std::size_t i = 0; i < mc.choices.size(); ++i) {
        auto lps = answer_logprobs(model, mc.question, mc.choices[i]);
        if (static_cast<int>(i) == mc.correct_index)
            correct = std::move(lps);
        else
            wrong.push_back(std::move(lps));
    }
    return truth_ratio_from_logprobs(correct, wrong, flagged);
}

namespace {

ScaledMeans scale_dataset(const DatasetMetrics& m) {
    ScaledMeans s;
    if (m.probability.empty()) return s;
    s.probability = mean(m.probability);
    s.rouge = mean(m.rouge);
    double tr = 0.0;
    for (double r : m.truth_ratio) tr += std::max(0.0, 1.0 - r);
    s.truth_ratio = tr / static_cast<double>(m.truth_ratio.size());
    return s;
}

}  // namespace

void scale_metrics(MetricReport& report) {
    report.retain = scale_dataset(report.raw.retain);
    report.real_authors = scale_dataset(report.raw.real_authors);
    report.world_facts = scale_dataset(report.raw.world_facts);
    report.forget_truth_ratios = report.raw.forget.truth_ratio;
    report.model_utility = model_utility(scaled_grid(report));
}

std::array<double, 9> scaled_grid(const MetricReport& report) {
    return {report.retain.probability,       report.retain.rouge,       report.retain.truth_ratio,
            report.real_authors.probability, report.real_authors.rouge, report.real_authors.truth_ratio,
            report.world_facts.probability,  report.world_facts.rouge,  report.world_facts.truth_ratio};
}

double model_utility(const std::array<double, 9>& scaled) {
    double inv_sum = 0.0;
    for (double x : scaled) {
        if (x == 0.0) return 0.0;
        inv_sum += 1.0 / x;
    }
    return 9.0 / inv_sum;
}

// --- row-level evaluation ------------------------------------------------------

namespace {

std::vector<double> logprobs_of(const TinyLM& model, const TokenSeq& prompt,
                                const TokenSeq& target) {
    std::vector<double> nll = model.sequence_nll(prompt, target);
    for (double& x : nll) x = -x;
    return nll;
}

std::string generate_answer(const TinyLM& model, const TokenSeq& prompt, int max_len) {
    return detokenize(model.greedy_decode(prompt, max_len), model.vocab());
}

QAEvalRow build_qa_row(const TinyLM& model, const QARecord& record, int max_len) {
    const Vocab& vocab = model.vocab();
    EncodedQA e = encode_record(record, vocab);
    if (e.answer.empty())
        throw InvalidRecordError("record " + record.record_id + " has an empty answer");
    QAEvalRow row;
    row.record_id = record.record_id;
    row.answer_token_logprobs = logprobs_of(model, e.prompt, e.answer);
    row.paraphrase_token_logprobs =
        logprobs_of(model, e.prompt, tokenize(record.paraphrased_answer, vocab));
    for (const auto& pert : record.perturbed_answers)
        row.perturbed_token_logprobs.push_back(logprobs_of(model, e.prompt, tokenize(pert, vocab)));
    row.generation = generate_answer(model, e.prompt, max_len);
    return row;
}

MCEvalRow build_mc_row(const TinyLM& model, const MCRecord& mc, const std::string& id,
                       int max_len) {
    const Vocab& vocab = model.vocab();
    TokenSeq prompt = tokenize(mc.question, vocab);
    prompt.push_back(Vocab::kSep);
    MCEvalRow row;
    row.record_id = id;
    for (const auto& choice : mc.choices)
        row.mc_choice_logprobs.push_back(logprobs_of(model, prompt, tokenize(choice, vocab)));
    row.answer_token_logprobs = row.mc_choice_logprobs[static_cast<std::size_t>(mc.correct_index)];
    row.generation = generate_answer(model, prompt, max_len);
    return row;
}

void fill_qa_metrics(const std::vector<QAEvalRow>& rows, const std::vector<QARecord>& records,
                     DatasetMetrics& out) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const QAEvalRow& row = rows[i];
        out.probability.push_back(normalized_probability_from_logprobs(row.answer_token_logprobs));
        out.rouge.push_back(rouge_l_recall(records[i].answer, row.generation));
        bool flagged = false;
        out.truth_ratio.push_back(truth_ratio_from_logprobs(row.paraphrase_token_logprobs,
                                                            row.perturbed_token_logprobs, &flagged));
        if (flagged) ++out.underflow_flags;
    }
}

void fill_mc_metrics(const std::vector<MCEvalRow>& rows, const std::vector<MCRecord>& records,
                     DatasetMetrics& out) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MCEvalRow& row = rows[i];
        const MCRecord& mc = records[i];
        double correct = 0.0, total = 0.0;
        std::vector<std::vector<double>> wrong;
        for (std::size_t c = 0; c < row.mc_choice_logprobs.size(); ++c) {
            const double p = normalized_probability_from_logprobs(row.mc_choice_logprobs[c]);
            total += p;
            if (static_cast<int>(c) == mc.correct_index)
                correct = p;
            else
                wrong.push_back(row.mc_choice_logprobs[c]);
        }
        out.probability.push_back(correct / total);
        out.rouge.push_back(rouge_l_recall(mc.answer, row.generation));
        bool flagged = false;
        out.truth_ratio.push_back(truth_ratio_from_logprobs(
            row.mc_choice_logprobs[static_cast<std::size_t>(mc.correct_index)], wrong, &flagged));
        if (flagged) ++out.underflow_flags;
    }
}

}  // namespace

EvalRows build_eval_rows(const TinyLM& model, const EvalSuite& suite, int decode_max_len) {
    EvalRows rows;
    for (const auto& r : suite.forget) rows.forget.push_back(build_qa_row(model, r, decode_max_len));
    for (const auto& r : suite.retain) rows.retain.push_back(build_qa_row(model, r, decode_max_len));
    for (std::size_t i = 0; i < suite.real_authors.size(); ++i)
        rows.real_authors.push_back(build_mc_row(model, suite.real_authors[i],
                                                 "real_authors:" + std::to_string(i), decode_max_len));
    for (std::size_t i = 0; i < suite.world_facts.size(); ++i)
        rows.world_facts.push_back(build_mc_row(model, suite.world_facts[i],
                                                "world_facts:" + std::to_string(i), decode_max_len));
    return rows;
}

MetricReport report_from_rows(const EvalRows& rows, const EvalSuite& suite) {
    if (rows.forget.size() != suite.forget.size() || rows.retain.size() != suite.retain.size() ||
        rows.real_authors.size() != suite.real_authors.size() ||
        rows.world_facts.size() != suite.world_facts.size())
        throw InvalidArgumentError("evaluation rows do not match the evaluation suite");
    MetricReport report;
    fill_qa_metrics(rows.forget, suite.forget, report.raw.forget);
    fill_qa_metrics(rows.retain, suite.retain, report.raw.retain);
    fill_mc_metrics(rows.real_authors, suite.real_authors, report.raw.real_authors);
    fill_mc_metrics(rows.world_facts, suite.world_facts, report.raw.world_facts);
    scale_metrics(report);
    return report;
}

std::vector<double> truth_ratios(const TinyLM& model, const std::vector<QARecord>& records) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(truth_ratio(model, r));
    return out;
}

}  // namespace ulbench
