#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ulbench {

using TokenSeq = std::vector<int>;

// Deterministic token<->id bijection with four reserved markers up front.
// Corpus tokens are ordered by frequency (desc) then lexicographically.
class Vocab {
public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;
    static constexpr int kSep = 3;

    static Vocab build(const std::vector<std::string>& texts);

    // Reconstructs a vocab from an already-ordered token list (checkpoints).
    static Vocab from_ordered_tokens(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    int id_of(const std::string& token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Case-folded word tokenization against a fixed vocab; unknown words map to UNK.
TokenSeq tokenize(const std::string& text, const Vocab& vocab);

// Lowercased tokens joined by single spaces.
std::string detokenize(const TokenSeq& seq, const Vocab& vocab);

// Gradient (and Adam-state) buffer matching TinyLM's flat parameter layout.
struct Gradients {
    std::vector<double> data;

    explicit Gradients(std::size_t n) : data(n, 0.0) {}
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
    void axpy(double a, const Gradients& other);  // this += a * other
};

// Log-bilinear k-gram language model: the last k token embeddings are each
// passed through a per-slot linear map, summed, and projected to logits.
// All gradients are exact and cheap, which is the point.
class TinyLM {
public:
    TinyLM(Vocab vocab, int dim = 64, int context = 8);

    // uniform(-scale, scale) init, fixed seed.
    void init_params(std::uint64_t seed, double scale = 0.05);

    const Vocab& vocab() const { return vocab_; }
    int vocab_size() const { return vocab_size_; }
    int dim() const { return dim_; }
    int context() const { return context_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    // Flat-layout section offsets: [embedding | slot maps | projection | bias].
    std::size_t embed_offset() const { return 0; }
    std::size_t slot_offset() const { return embed_size_; }
    std::size_t proj_offset() const { return embed_size_ + slot_size_; }
    std::size_t bias_offset() const { return embed_size_ + slot_size_ + proj_size_; }

    // Softmax over logits at the given context (last k tokens, BOS-padded).
    // Entries are positive and sum to 1 within 1e-9.
    std::vector<double> next_token_distribution(const TokenSeq& context) const;

    // Element i is -log P(target[i] | prompt + target[..i)).
    std::vector<double> sequence_nll(const TokenSeq& prompt, const TokenSeq& target) const;

    // Appends argmax tokens (ties -> lowest index) until EOS or max_len.
    // The returned sequence excludes the terminating EOS.
    TokenSeq greedy_decode(const TokenSeq& prompt, int max_len) const;

    // --- loss building blocks (loss value returned unweighted; gradients,
    // when requested, are accumulated scaled by `weight`) ---

    // Mean NLL over `target` conditioned on prompt + teacher-forced prefix.
    // This is the per-sample training loss; the prompt positions never
    // contribute, which realizes answer-only loss masking.
    double answer_nll(const TokenSeq& prompt, const TokenSeq& target, double weight,
                      Gradients* grads) const;

    // (1/|s|) * sum over positions i=2..|s| of KL(reference(s_<i) || this(s_<i)),
    // full-vocabulary KL at every position of the concatenated sequence.
    // Gradients are with respect to this model only.
    double sequence_kl_from(const TinyLM& reference, const TokenSeq& seq, double weight,
                            Gradients* grads) const;

    // --- checkpoint io (round-trip exact) ---
    void save(const std::string& path) const;
    static TinyLM load(const std::string& path);

    bool operator==(const TinyLM& other) const;

private:
    void window(const TokenSeq& context, int* out) const;  // BOS-padded last k ids
    void hidden(const int* window_ids, double* h) const;
    void logits_from_hidden(const double* h, double* out) const;
    void softmax_at(const int* window_ids, double* h_out, double* probs_out) const;
    // Backprop of dL/dlogits through projection, slots and embeddings.
    void accumulate_from_logit_grad(const int* window_ids, const double* h, const double* dlogits,
                                    Gradients& grads) const;

    Vocab vocab_;
    int vocab_size_;
    int dim_;
    int context_;
    std::size_t embed_size_, slot_size_, proj_size_;
    std::vector<double> params_;
};

// Immutable deep copy of a model's parameters, shared read-only by
// unlearning runs that must consult the pre-unlearning distribution.
class FrozenReference {
public:
    explicit FrozenReference(const TinyLM& model) : model_(model) {}
    const TinyLM& model() const { return model_; }

private:
    const TinyLM model_;
};

inline FrozenReference clone_frozen(const TinyLM& model) { return FrozenReference(model); }

// KL(p || q) over two probability vectors; >= 0, 0 iff p == q.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Numerically stable softmax (exposed for tests and fixture construction).
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace ulbench
