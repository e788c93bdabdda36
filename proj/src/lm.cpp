#include "ulbench/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "ulbench/errors.hpp"
#include "ulbench/rng.hpp"
#include "ulbench/text.hpp"

namespace ulbench {

// --- vocab ---------------------------------------------------------------

Vocab Vocab::build(const std::vector<std::string>& texts) {
    std::map<std::string, std::size_t> counts;
    for (const auto& text : texts) {
        for (auto& tok : word_tokens(text)) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab v;
    v.tokens_ = {"<bos>", "<eos>", "<unk>", "<sep>"};
    for (auto& [tok, n] : ranked) v.tokens_.push_back(tok);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = static_cast<int>(i);
    return v;
}

Vocab Vocab::from_ordered_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 4 || tokens[0] != "<bos>" || tokens[1] != "<eos>" ||
        tokens[2] != "<unk>" || tokens[3] != "<sep>")
        throw SchemaError("vocab token list must start with the four reserved markers");
    Vocab v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = static_cast<int>(i);
    return v;
}

int Vocab::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

TokenSeq tokenize(const std::string& text, const Vocab& vocab) {
    TokenSeq out;
    for (const auto& tok : word_tokens(text)) out.push_back(vocab.id_of(tok));
    return out;
}

std::string detokenize(const TokenSeq& seq, const Vocab& vocab) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out.push_back(' ');
        out += vocab.token(seq[i]);
    }
    return out;
}

// --- gradients -------------------------------------------------------------

void Gradients::axpy(double a, const Gradients& other) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += a * other.data[i];
}

// --- model -------------------------------------------------------------------

TinyLM::TinyLM(Vocab vocab, int dim, int context)
    : vocab_(std::move(vocab)),
      vocab_size_(vocab_.size()),
      dim_(dim),
      context_(context) {
    const std::size_t v = static_cast<std::size_t>(vocab_size_);
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t k = static_cast<std::size_t>(context_);
    embed_size_ = v * d;
    slot_size_ = k * d * d;
    proj_size_ = v * d;
    params_.assign(embed_size_ + slot_size_ + proj_size_ + v, 0.0);
}

void TinyLM::init_params(std::uint64_t seed, double scale) {
    Rng rng(seed);
    for (double& p : params_) p = rng.uniform(-scale, scale);
}

void TinyLM::window(const TokenSeq& context, int* out) const {
    const int k = context_;
    const int n = static_cast<int>(context.size());
    for (int j = 0; j < k; ++j) {
        int src = n - k + j;
        out[j] = src >= 0 ? context[static_cast<std::size_t>(src)] : Vocab::kBos;
    }
}

void TinyLM::hidden(const int* window_ids, double* h) const {
    const std::size_t d = static_cast<std::size_t>(dim_);
    std::fill(h, h + d, 0.0);
    const double* slots = params_.data() + slot_offset();
    const double* embed = params_.data() + embed_offset();
    for (int j = 0; j < context_; ++j) {
        const double* e = embed + static_cast<std::size_t>(window_ids[j]) * d;
        const double* cj = slots + static_cast<std::size_t>(j) * d * d;
        for (std::size_t r = 0; r < d; ++r) {
            const double* row = cj + r * d;
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += row[c] * e[c];
            h[r] += acc;
        }
    }
}

void TinyLM::logits_from_hidden(const double* h, double* out) const {
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t v = static_cast<std::size_t>(vocab_size_);
    const double* proj = params_.data() + proj_offset();
    const double* bias = params_.data() + bias_offset();
    for (std::size_t t = 0; t < v; ++t) {
        const double* row = proj + t * d;
        double acc = bias[t];
        for (std::size_t c = 0; c < d; ++c) acc += row[c] * h[c];
        out[t] = acc;
    }
}

void TinyLM::softmax_at(const int* window_ids, double* h_out, double* probs_out) const {
    hidden(window_ids, h_out);
    logits_from_hidden(h_out, probs_out);
    const std::size_t v = static_cast<std::size_t>(vocab_size_);
    double mx = probs_out[0];
    for (std::size_t t = 1; t < v; ++t) mx = std::max(mx, probs_out[t]);
    if (!std::isfinite(mx)) throw NumericError("non-finite logits");
    double sum = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
        probs_out[t] = std::exp(probs_out[t] - mx);
        sum += probs_out[t];
    }
    for (std::size_t t = 0; t < v; ++t) probs_out[t] /= sum;
}

std::vector<double> TinyLM::next_token_distribution(const TokenSeq& context) const {
    std::vector<int> win(static_cast<std::size_t>(context_));
    std::vector<double> h(static_cast<std::size_t>(dim_));
    std::vector<double> probs(static_cast<std::size_t>(vocab_size_));
    window(context, win.data());
    softmax_at(win.data(), h.data(), probs.data());
    return probs;
}

void TinyLM::accumulate_from_logit_grad(const int* window_ids, const double* h,
                                        const double* dlogits, Gradients& grads) const {
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t v = static_cast<std::size_t>(vocab_size_);
    const double* proj = params_.data() + proj_offset();
    const double* slots = params_.data() + slot_offset();
    double* g_proj = grads.data.data() + proj_offset();
    double* g_bias = grads.data.data() + bias_offset();
    double* g_slots = grads.data.data() + slot_offset();
    double* g_embed = grads.data.data() + embed_offset();

    std::vector<double> dh(d, 0.0);
    for (std::size_t t = 0; t < v; ++t) {
        const double g = dlogits[t];
        if (g == 0.0) continue;
        g_bias[t] += g;
        double* gp = g_proj + t * d;
        const double* row = proj + t * d;
        for (std::size_t c = 0; c < d; ++c) {
            gp[c] += g * h[c];
            dh[c] += g * row[c];
        }
    }

    const double* embed = params_.data() + embed_offset();
    for (int j = 0; j < context_; ++j) {
        const std::size_t tok = static_cast<std::size_t>(window_ids[j]);
        const double* e = embed + tok * d;
        const double* cj = slots + static_cast<std::size_t>(j) * d * d;
        double* gcj = g_slots + static_cast<std::size_t>(j) * d * d;
        double* ge = g_embed + tok * d;
        for (std::size_t r = 0; r < d; ++r) {
            const double dhr = dh[r];
            if (dhr == 0.0) continue;
            double* grow = gcj + r * d;
            const double* row = cj + r * d;
            for (std::size_t c = 0; c < d; ++c) {
                grow[c] += dhr * e[c];
                ge[c] += dhr * row[c];
            }
        }
    }
}

std::vector<double> TinyLM::sequence_nll(const TokenSeq& prompt, const TokenSeq& target) const {
    if (target.empty()) throw InvalidArgumentError("sequence_nll: empty target");
    std::vector<double> nll;
    nll.reserve(target.size());
    TokenSeq ctx = prompt;
    std::vector<int> win(static_cast<std::size_t>(context_));
    std::vector<double> h(static_cast<std::size_t>(dim_));
    std::vector<double> probs(static_cast<std::size_t>(vocab_size_));
    for (int tok : target) {
        window(ctx, win.data());
        softmax_at(win.data(), h.data(), probs.data());
        nll.push_back(-std::log(probs[static_cast<std::size_t>(tok)]));
        ctx.push_back(tok);
    }
    return nll;
}

TokenSeq TinyLM::greedy_decode(const TokenSeq& prompt, int max_len) const {
    if (max_len < 1) throw InvalidArgumentError("greedy_decode: max_len must be >= 1");
    TokenSeq out;
    TokenSeq ctx = prompt;
    std::vector<int> win(static_cast<std::size_t>(context_));
    std::vector<double> h(static_cast<std::size_t>(dim_));
    std::vector<double> probs(static_cast<std::size_t>(vocab_size_));
    for (int step = 0; step < max_len; ++step) {
        window(ctx, win.data());
        softmax_at(win.data(), h.data(), probs.data());
        int best = 0;
        for (int t = 1; t < vocab_size_; ++t) {
            if (probs[static_cast<std::size_t>(t)] > probs[static_cast<std::size_t>(best)]) best = t;
        }
        if (best == Vocab::kEos) break;
        out.push_back(best);
        ctx.push_back(best);
    }
    return out;
}

double TinyLM::answer_nll(const TokenSeq& prompt, const TokenSeq& target, double weight,
                          Gradients* grads) const {
    if (target.empty()) throw InvalidRecordError("answer_nll: empty target");
    const std::size_t v = static_cast<std::size_t>(vocab_size_);
    const double inv_len = 1.0 / static_cast<double>(target.size());
    TokenSeq ctx = prompt;
    std::vector<int> win(static_cast<std::size_t>(context_));
    std::vector<double> h(static_cast<std::size_t>(dim_));
    std::vector<double> probs(v);
    double total = 0.0;
    for (int tok : target) {
        window(ctx, win.data());
        softmax_at(win.data(), h.data(), probs.data());
        total += -std::log(probs[static_cast<std::size_t>(tok)]);
        if (grads) {
            // d(mean NLL)/dlogits = (p - onehot(target)) / |target|
            std::vector<double> dlogits(v);
            const double s = weight * inv_len;
            for (std::size_t t = 0; t < v; ++t) dlogits[t] = s * probs[t];
            dlogits[static_cast<std::size_t>(tok)] -= s;
            accumulate_from_logit_grad(win.data(), h.data(), dlogits.data(), *grads);
        }
        ctx.push_back(tok);
    }
    double loss = total * inv_len;
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    return loss;
}

double TinyLM::sequence_kl_from(const TinyLM& reference, const TokenSeq& seq, double weight,
                                Gradients* grads) const {
    if (seq.size() < 2) throw InvalidArgumentError("sequence_kl_from: need at least 2 tokens");
    const std::size_t v = static_cast<std::size_t>(vocab_size_);
    const double inv_len = 1.0 / static_cast<double>(seq.size());
    std::vector<int> win(static_cast<std::size_t>(context_));
    std::vector<double> h(static_cast<std::size_t>(dim_));
    std::vector<double> p_cur(v), p_ref(v);
    std::vector<double> h_ref(static_cast<std::size_t>(reference.dim()));
    std::vector<int> win_ref(static_cast<std::size_t>(reference.context()));
    double total = 0.0;
    // position i consumes the prefix s_<i, i.e. prefixes of length 1..|s|-1
    for (std::size_t len = 1; len + 1 <= seq.size(); ++len) {
        TokenSeq prefix(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(len));
        window(prefix, win.data());
        softmax_at(win.data(), h.data(), p_cur.data());
        reference.window(prefix, win_ref.data());
        reference.softmax_at(win_ref.data(), h_ref.data(), p_ref.data());
        for (std::size_t t = 0; t < v; ++t) total += p_ref[t] * (std::log(p_ref[t]) - std::log(p_cur[t]));
        if (grads) {
            // dKL(ref||cur)/dlogits_cur = p_cur - p_ref
            std::vector<double> dlogits(v);
            const double s = weight * inv_len;
            for (std::size_t t = 0; t < v; ++t) dlogits[t] = s * (p_cur[t] - p_ref[t]);
            accumulate_from_logit_grad(win.data(), h.data(), dlogits.data(), *grads);
        }
    }
    double kl = total * inv_len;
    if (!std::isfinite(kl)) throw NumericError("non-finite KL");
    return kl;
}

// --- checkpoint io -------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'U', 'L', 'B', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ofstream& f, std::uint64_t x) {
    f.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint64_t read_u64(std::ifstream& f) {
    std::uint64_t x = 0;
    f.read(reinterpret_cast<char*>(&x), sizeof(x));
    return x;
}
}  // namespace

void TinyLM::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    write_u64(f, static_cast<std::uint64_t>(vocab_size_));
    write_u64(f, static_cast<std::uint64_t>(dim_));
    write_u64(f, static_cast<std::uint64_t>(context_));
    for (const auto& tok : vocab_.tokens()) {
        write_u64(f, tok.size());
        f.write(tok.data(), static_cast<std::streamsize>(tok.size()));
    }
    write_u64(f, params_.size());
    f.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
    if (!f) throw Error("checkpoint write failed: " + path);
}

TinyLM TinyLM::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw SchemaError("bad checkpoint magic in " + path);
    const auto vsize = read_u64(f);
    const auto dim = read_u64(f);
    const auto context = read_u64(f);
    std::vector<std::string> tokens;
    tokens.reserve(vsize);
    for (std::uint64_t i = 0; i < vsize; ++i) {
        auto len = read_u64(f);
        std::string tok(len, '\0');
        f.read(tok.data(), static_cast<std::streamsize>(len));
        tokens.push_back(std::move(tok));
    }
    TinyLM model(Vocab::from_ordered_tokens(std::move(tokens)), static_cast<int>(dim),
                 static_cast<int>(context));
    auto n = read_u64(f);
    if (n != model.params_.size()) throw SchemaError("checkpoint parameter count mismatch");
    f.read(reinterpret_cast<char*>(model.params_.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw SchemaError("truncated checkpoint: " + path);
    return model;
}

bool TinyLM::operator==(const TinyLM& other) const {
    return vocab_.tokens() == other.vocab_.tokens() && dim_ == other.dim_ &&
           context_ == other.context_ && params_ == other.params_;
}

// --- free helpers ---------------------------------------------------------------

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InvalidArgumentError("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
    }
    return kl;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

}  // namespace ulbench
