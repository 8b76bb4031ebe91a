#pragma once

#include <map>
#include <string>
#include <vector>

#include "mif/core/autodiff.hpp"
#include "mif/core/mat.hpp"
#include "mif/core/rng.hpp"

namespace mif {

// Named parameter tensors plus gradient accumulators. Iteration order is
// the sorted name order, which keeps checkpoints and optimizer updates
// deterministic.
class ParamStore {
public:
    void add(const std::string& name, Mat value);
    bool has(const std::string& name) const { return values_.count(name) != 0; }
    Mat& value(const std::string& name);
    const Mat& value(const std::string& name) const;
    Mat& grad(const std::string& name);
    void zero_grads();
    std::vector<std::string> names() const;
    std::size_t parameter_count() const;

private:
    std::map<std::string, Mat> values_;
    std::map<std::string, Mat> grads_;
};

// Per-forward bridge between a ParamStore and a tape: parameters become tape
// inputs on first use; accumulate_grads() pushes tape gradients back.
class ParamBinding {
public:
    ParamBinding(ad::Tape& tape, ParamStore& store, bool trainable)
        : tape_(tape), store_(store), trainable_(trainable) {}

    ad::Var operator[](const std::string& name);
    void accumulate_grads();

private:
    ad::Tape& tape_;
    ParamStore& store_;
    bool trainable_;
    std::map<std::string, ad::Var> bound_;
};

// One attention unit of Eq-1/Eq-2 form: projections W^q, W^k, W^v plus the
// two-layer update MLP acting on [f | M].
struct AttentionWeights {
    Mat wq, wk, wv;      // C×C
    Mat mlp_w1, mlp_b1;  // 2C×C, 1×C
    Mat mlp_w2, mlp_b2;  // C×C, 1×C

    static AttentionWeights init(int dim, Rng& rng);
};

struct AttentionVars {
    ad::Var wq, wk, wv, mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

void add_attention_params(ParamStore& store, const std::string& prefix, int dim, Rng& rng);
AttentionVars bind_attention(ParamBinding& bind, const std::string& prefix);
AttentionVars bind_attention(ad::Tape& tape, const AttentionWeights& w, bool trainable = false);

// softmax(Q K^T / sqrt(C)) V for all query rows at once
ad::Var attention_message_op(ad::Tape& t, ad::Var queries, ad::Var bank, const AttentionVars& u);
// f + MLP([f | M]) per row
ad::Var attention_update_op(ad::Tape& t, ad::Var features, ad::Var bank, const AttentionVars& u);

// Plain-value entry points (forward only).
Mat attention_message(const Mat& query, const Mat& bank, const AttentionWeights& u);
Mat attention_update(const Mat& features, const Mat& bank, const AttentionWeights& u);

// Two-layer perceptron helpers shared by the entry/positional/adapter MLPs.
void add_mlp_params(ParamStore& store, const std::string& prefix, int in_dim, int hidden,
                    int out_dim, Rng& rng, bool zero_last = false);
ad::Var mlp_forward(ad::Tape& t, ad::Var x, ParamBinding& bind, const std::string& prefix);

}  // namespace mif
