#include "mif/core/autodiff.hpp"

#include <cassert>
#include <cmath>

#include "mif/core/kernels.hpp"

namespace mif::ad {

namespace {
constexpr double kProbClamp = 1e-7;
}

Var Tape::input(Mat value, bool needs_grad) {
    return emit(std::move(value), needs_grad, nullptr);
}

Var Tape::emit(Mat value, bool needs_grad, std::function<void(Tape&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
}

Mat& Tape::grad_ref(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Mat(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(Var v, const Mat& delta) {
    if (!nodes_[v.id].needs_grad) return;
    Mat& g = grad_ref(v);
    assert(g.same_shape(delta));
    for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] += delta.raw()[i];
}

Var Tape::add(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    assert(av.same_shape(bv));
    Mat out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] += bv.raw()[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, b, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            t.accumulate(a, g);
            t.accumulate(b, g);
        };
    return o;
}

Var Tape::sub(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    assert(av.same_shape(bv));
    Mat out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] -= bv.raw()[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, b, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            t.accumulate(a, g);
            Mat neg = g;
            for (double& v : neg.raw()) v = -v;
            t.accumulate(b, neg);
        };
    return o;
}

Var Tape::mul(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    assert(av.same_shape(bv));
    Mat out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] *= bv.raw()[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, b, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            if (t.needs_grad(a)) {
                Mat da = g;
                const Mat& bv2 = t.value(b);
                for (std::size_t i = 0; i < da.size(); ++i) da.raw()[i] *= bv2.raw()[i];
                t.accumulate(a, da);
            }
            if (t.needs_grad(b)) {
                Mat db = g;
                const Mat& av2 = t.value(a);
                for (std::size_t i = 0; i < db.size(); ++i) db.raw()[i] *= av2.raw()[i];
                t.accumulate(b, db);
            }
        };
    return o;
}

Var Tape::scale(Var a, double s) {
    Mat out = value(a);
    for (double& v : out.raw()) v *= s;
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, s, o](Tape& t) {
            Mat d = t.nodes_[o.id].grad;
            for (double& v : d.raw()) v *= s;
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::matmul(Var a, Var b) {
    Mat out = kern::matmul(value(a), value(b));
    const bool ng = needs_grad(a) || needs_grad(b);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, b, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            if (t.needs_grad(a)) t.accumulate(a, kern::matmul_nt(g, t.value(b)));
            if (t.needs_grad(b)) t.accumulate(b, kern::matmul_tn(t.value(a), g));
        };
    return o;
}

Var Tape::matmul_nt(Var a, Var b) {
    Mat out = kern::matmul_nt(value(a), value(b));
    const bool ng = needs_grad(a) || needs_grad(b);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, b, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            if (t.needs_grad(a)) t.accumulate(a, kern::matmul(g, t.value(b)));
            if (t.needs_grad(b)) t.accumulate(b, kern::matmul_tn(g, t.value(a)));
        };
    return o;
}

Var Tape::concat_cols(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    assert(av.rows() == bv.rows());
    Mat out(av.rows(), av.cols() + bv.cols());
    for (int i = 0; i < av.rows(); ++i) {
        double* o = out.row(i);
        const double* ar = av.row(i);
        const double* br = bv.row(i);
        for (int j = 0; j < av.cols(); ++j) o[j] = ar[j];
        for (int j = 0; j < bv.cols(); ++j) o[av.cols() + j] = br[j];
    }
    const bool ng = needs_grad(a) || needs_grad(b);
    const int ac = av.cols(), bc = bv.cols();
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, b, o, ac, bc](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            if (t.needs_grad(a)) {
                Mat da(g.rows(), ac);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < ac; ++j) da(i, j) = g(i, j);
                t.accumulate(a, da);
            }
            if (t.needs_grad(b)) {
                Mat db(g.rows(), bc);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < bc; ++j) db(i, j) = g(i, ac + j);
                t.accumulate(b, db);
            }
        };
    return o;
}

Var Tape::add_bias(Var a, Var bias) {
    const Mat& av = value(a);
    const Mat& bv = value(bias);
    assert(bv.rows() == 1 && bv.cols() == av.cols());
    Mat out = av;
    for (int i = 0; i < av.rows(); ++i) {
        double* o = out.row(i);
        for (int j = 0; j < av.cols(); ++j) o[j] += bv.raw()[j];
    }
    const bool ng = needs_grad(a) || needs_grad(bias);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, bias, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            t.accumulate(a, g);
            if (t.needs_grad(bias)) {
                Mat db(1, g.cols());
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) db.raw()[j] += g(i, j);
                t.accumulate(bias, db);
            }
        };
    return o;
}

Var Tape::tanh(Var a) {
    Mat out = value(a);
    for (double& v : out.raw()) v = std::tanh(v);
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            const Mat& y = t.nodes_[o.id].value;
            Mat d = g;
            for (std::size_t i = 0; i < d.size(); ++i)
                d.raw()[i] *= 1.0 - y.raw()[i] * y.raw()[i];
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::sigmoid(Var a) {
    Mat out = value(a);
    for (double& v : out.raw()) v = 1.0 / (1.0 + std::exp(-v));
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            const Mat& y = t.nodes_[o.id].value;
            Mat d = g;
            for (std::size_t i = 0; i < d.size(); ++i)
                d.raw()[i] *= y.raw()[i] * (1.0 - y.raw()[i]);
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::row_softmax(Var a) {
    Mat out = kern::row_softmax(value(a));
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            const Mat& y = t.nodes_[o.id].value;
            Mat d(g.rows(), g.cols());
            for (int i = 0; i < g.rows(); ++i) {
                const double* gr = g.row(i);
                const double* yr = y.row(i);
                double dot = 0.0;
                for (int j = 0; j < g.cols(); ++j) dot += gr[j] * yr[j];
                double* dr = d.row(i);
                for (int j = 0; j < g.cols(); ++j) dr[j] = yr[j] * (gr[j] - dot);
            }
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::col_softmax(Var a) {
    const Mat& av = value(a);
    Mat out(av.rows(), av.cols());
    for (int j = 0; j < av.cols(); ++j) {
        double mx = av(0, j);
        for (int i = 1; i < av.rows(); ++i) mx = std::max(mx, av(i, j));
        double sum = 0.0;
        for (int i = 0; i < av.rows(); ++i) {
            out(i, j) = std::exp(av(i, j) - mx);
            sum += out(i, j);
        }
        const double inv = 1.0 / sum;
        for (int i = 0; i < av.rows(); ++i) out(i, j) *= inv;
    }
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            const Mat& y = t.nodes_[o.id].value;
            Mat d(g.rows(), g.cols());
            for (int j = 0; j < g.cols(); ++j) {
                double dot = 0.0;
                for (int i = 0; i < g.rows(); ++i) dot += g(i, j) * y(i, j);
                for (int i = 0; i < g.rows(); ++i) d(i, j) = y(i, j) * (g(i, j) - dot);
            }
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::sum(Var a) {
    double s = 0.0;
    for (double v : value(a).raw()) s += v;
    Mat out(1, 1);
    out.raw()[0] = s;
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const double g0 = t.nodes_[o.id].grad.raw()[0];
            const Mat& av = t.value(a);
            Mat d(av.rows(), av.cols(), g0);
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::sum_sq(Var a) {
    double s = 0.0;
    for (double v : value(a).raw()) s += v * v;
    Mat out(1, 1);
    out.raw()[0] = s;
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const double g0 = t.nodes_[o.id].grad.raw()[0];
            Mat d = t.value(a);
            for (double& v : d.raw()) v *= 2.0 * g0;
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::col_sum(Var a) {
    const Mat& av = value(a);
    Mat out(1, av.cols());
    for (int i = 0; i < av.rows(); ++i) {
        const double* r = av.row(i);
        for (int j = 0; j < av.cols(); ++j) out.raw()[j] += r[j];
    }
    const bool ng = needs_grad(a);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [a, o](Tape& t) {
            const Mat& g = t.nodes_[o.id].grad;
            const Mat& av2 = t.value(a);
            Mat d(av2.rows(), av2.cols());
            for (int i = 0; i < d.rows(); ++i)
                for (int j = 0; j < d.cols(); ++j) d(i, j) = g.raw()[j];
            t.accumulate(a, d);
        };
    return o;
}

Var Tape::assignment_nll(Var p, Var sigma_a, Var sigma_b,
                         const std::vector<std::pair<int, int>>& matches,
                         const std::vector<int>& unmatched_a,
                         const std::vector<int>& unmatched_b) {
    const Mat& pv = value(p);
    const Mat& sav = value(sigma_a);
    const Mat& sbv = value(sigma_b);
    auto clamp_p = [](double v) { return std::min(std::max(v, kProbClamp), 1.0 - kProbClamp); };
    double loss = 0.0;
    if (!matches.empty()) {
        double s = 0.0;
        for (auto [i, j] : matches) s += std::log(clamp_p(pv(i, j)));
        loss -= s / double(matches.size());
    }
    if (!unmatched_a.empty()) {
        double s = 0.0;
        for (int i : unmatched_a) s += std::log(1.0 - clamp_p(sav.raw()[i]));
        loss -= s / double(unmatched_a.size());
    }
    if (!unmatched_b.empty()) {
        double s = 0.0;
        for (int j : unmatched_b) s += std::log(1.0 - clamp_p(sbv.raw()[j]));
        loss -= s / double(unmatched_b.size());
    }
    Mat out(1, 1);
    out.raw()[0] = loss;
    const bool ng = needs_grad(p) || needs_grad(sigma_a) || needs_grad(sigma_b);
    Var o = emit(std::move(out), ng, nullptr);
    if (ng)
        nodes_[o.id].backprop = [p, sigma_a, sigma_b, matches, unmatched_a, unmatched_b,
                                 o](Tape& t) {
            const double g0 = t.nodes_[o.id].grad.raw()[0];
            const Mat& pv2 = t.value(p);
            const Mat& sav2 = t.value(sigma_a);
            const Mat& sbv2 = t.value(sigma_b);
            auto in_range = [](double v) { return v > kProbClamp && v < 1.0 - kProbClamp; };
            if (t.needs_grad(p) && !matches.empty()) {
                Mat dp(pv2.rows(), pv2.cols());
                const double w = g0 / double(matches.size());
                for (auto [i, j] : matches)
                    if (in_range(pv2(i, j))) dp(i, j) -= w / pv2(i, j);
                t.accumulate(p, dp);
            }
            if (t.needs_grad(sigma_a) && !unmatched_a.empty()) {
                Mat da(sav2.rows(), sav2.cols());
                const double w = g0 / double(unmatched_a.size());
                for (int i : unmatched_a)
                    if (in_range(sav2.raw()[i])) da.raw()[i] += w / (1.0 - sav2.raw()[i]);
                t.accumulate(sigma_a, da);
            }
            if (t.needs_grad(sigma_b) && !unmatched_b.empty()) {
                Mat db(sbv2.rows(), sbv2.cols());
                const double w = g0 / double(unmatched_b.size());
                for (int j : unmatched_b)
                    if (in_range(sbv2.raw()[j])) db.raw()[j] += w / (1.0 - sbv2.raw()[j]);
                t.accumulate(sigma_b, db);
            }
        };
    return o;
}

void Tape::backward(Var root) {
    assert(value(root).rows() == 1 && value(root).cols() == 1);
    grad_ref(root).raw()[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.backprop) n.backprop(*this);
    }
}

double grad_rel_error(const Mat& analytic, const Mat& fd) {
    double num = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double d = analytic.raw()[i] - fd.raw()[i];
        num += d * d;
        na += analytic.raw()[i] * analytic.raw()[i];
        nf += fd.raw()[i] * fd.raw()[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
    return std::sqrt(num) / denom;
}

}  // namespace mif::ad
