#include "mif/attention.hpp"

#include <cmath>

#include "mif/core/error.hpp"

namespace mif {

void ParamStore::add(const std::string& name, Mat value) {
    if (values_.count(name)) throw ConfigError("duplicate parameter: " + name);
    grads_[name] = Mat(value.rows(), value.cols());
    values_[name] = std::move(value);
}

Mat& ParamStore::value(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const Mat& ParamStore::value(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

Mat& ParamStore::grad(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, g] : grads_) g.fill(0.0);
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [name, v] : values_) out.push_back(name);
    return out;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : values_) n += v.size();
    return n;
}

ad::Var ParamBinding::operator[](const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = tape_.input(store_.value(name), trainable_);
    bound_.emplace(name, v);
    return v;
}

void ParamBinding::accumulate_grads() {
    if (!trainable_) return;
    for (const auto& [name, var] : bound_) {
        const Mat& g = tape_.grad(var);
        if (g.empty()) continue;
        Mat& acc = store_.grad(name);
        for (std::size_t i = 0; i < acc.size(); ++i) acc.raw()[i] += g.raw()[i];
    }
}

AttentionWeights AttentionWeights::init(int dim, Rng& rng) {
    AttentionWeights w;
    const double proj_std = 1.0 / std::sqrt(double(dim));
    w.wq = Mat::randn(dim, dim, proj_std, rng);
    w.wk = Mat::randn(dim, dim, proj_std, rng);
    w.wv = Mat::randn(dim, dim, proj_std, rng);
    w.mlp_w1 = Mat::randn(2 * dim, dim, 1.0 / std::sqrt(2.0 * dim), rng);
    w.mlp_b1 = Mat(1, dim);
    // zero-initialized final layer: the unit starts as the identity residual
    w.mlp_w2 = Mat(dim, dim);
    w.mlp_b2 = Mat(1, dim);
    return w;
}

void add_attention_params(ParamStore& store, const std::string& prefix, int dim, Rng& rng) {
    AttentionWeights w = AttentionWeights::init(dim, rng);
    store.add(prefix + ".wq", std::move(w.wq));
    store.add(prefix + ".wk", std::move(w.wk));
    store.add(prefix + ".wv", std::move(w.wv));
    store.add(prefix + ".mlp_w1", std::move(w.mlp_w1));
    store.add(prefix + ".mlp_b1", std::move(w.mlp_b1));
    store.add(prefix + ".mlp_w2", std::move(w.mlp_w2));
    store.add(prefix + ".mlp_b2", std::move(w.mlp_b2));
}

AttentionVars bind_attention(ParamBinding& bind, const std::string& prefix) {
    AttentionVars u;
    u.wq = bind[prefix + ".wq"];
    u.wk = bind[prefix + ".wk"];
    u.wv = bind[prefix + ".wv"];
    u.mlp_w1 = bind[prefix + ".mlp_w1"];
    u.mlp_b1 = bind[prefix + ".mlp_b1"];
    u.mlp_w2 = bind[prefix + ".mlp_w2"];
    u.mlp_b2 = bind[prefix + ".mlp_b2"];
    return u;
}

AttentionVars bind_attention(ad::Tape& tape, const AttentionWeights& w, bool trainable) {
    AttentionVars u;
    u.wq = tape.input(w.wq, trainable);
    u.wk = tape.input(w.wk, trainable);
    u.wv = tape.input(w.wv, trainable);
    u.mlp_w1 = tape.input(w.mlp_w1, trainable);
    u.mlp_b1 = tape.input(w.mlp_b1, trainable);
    u.mlp_w2 = tape.input(w.mlp_w2, trainable);
    u.mlp_b2 = tape.input(w.mlp_b2, trainable);
    return u;
}

ad::Var attention_message_op(ad::Tape& t, ad::Var queries, ad::Var bank, const AttentionVars& u) {
    const int dim = t.value(queries).cols();
    ad::Var q = t.matmul(queries, u.wq);
    ad::Var k = t.matmul(bank, u.wk);
    ad::Var v = t.matmul(bank, u.wv);
    ad::Var logits = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(dim)));
    ad::Var attn = t.row_softmax(logits);
    return t.matmul(attn, v);
}

ad::Var attention_update_op(ad::Tape& t, ad::Var features, ad::Var bank, const AttentionVars& u) {
    ad::Var msg = attention_message_op(t, features, bank, u);
    ad::Var cat = t.concat_cols(features, msg);
    ad::Var hidden = t.tanh(t.add_bias(t.matmul(cat, u.mlp_w1), u.mlp_b1));
    ad::Var delta = t.add_bias(t.matmul(hidden, u.mlp_w2), u.mlp_b2);
    return t.add(features, delta);
}

Mat attention_message(const Mat& query, const Mat& bank, const AttentionWeights& u) {
    ad::Tape t;
    AttentionVars uv = bind_attention(t, u);
    ad::Var q = t.input(query);
    ad::Var b = t.input(bank);
    return t.value(attention_message_op(t, q, b, uv));
}

Mat attention_update(const Mat& features, const Mat& bank, const AttentionWeights& u) {
    ad::Tape t;
    AttentionVars uv = bind_attention(t, u);
    ad::Var f = t.input(features);
    ad::Var b = t.input(bank);
    return t.value(attention_update_op(t, f, b, uv));
}

void add_mlp_params(ParamStore& store, const std::string& prefix, int in_dim, int hidden,
                    int out_dim, Rng& rng, bool zero_last) {
    store.add(prefix + ".w1", Mat::randn(in_dim, hidden, 1.0 / std::sqrt(double(in_dim)), rng));
    store.add(prefix + ".b1", Mat(1, hidden));
    Mat w2 = zero_last ? Mat(hidden, out_dim)
                       : Mat::randn(hidden, out_dim, 1.0 / std::sqrt(double(hidden)), rng);
    store.add(prefix + ".w2", std::move(w2));
    store.add(prefix + ".b2", Mat(1, out_dim));
}

ad::Var mlp_forward(ad::Tape& t, ad::Var x, ParamBinding& bind, const std::string& prefix) {
    ad::Var hidden = t.tanh(t.add_bias(t.matmul(x, bind[prefix + ".w1"]), bind[prefix + ".b1"]));
    return t.add_bias(t.matmul(hidden, bind[prefix + ".w2"]), bind[prefix + ".b2"]);
}

}  // namespace mif
