#pragma once

#include <functional>
#include <vector>

#include "mif/core/mat.hpp"

namespace mif::ad {

// Reverse-mode tape over Mat values. A tape is built per forward pass;
// backward() walks the nodes in reverse creation order, which is a valid
// topological order by construction.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    Var input(Mat value, bool needs_grad = false);

    const Mat& value(Var v) const { return nodes_[v.id].value; }
    const Mat& grad(Var v) const { return nodes_[v.id].grad; }
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);     // a * b
    Var matmul_nt(Var a, Var b);  // a * b^T
    Var concat_cols(Var a, Var b);
    Var add_bias(Var a, Var bias);  // N×C + 1×C broadcast over rows
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var row_softmax(Var a);
    Var col_softmax(Var a);
    Var sum(Var a);      // 1×1
    Var sum_sq(Var a);   // 1×1, sum of squared entries
    Var col_sum(Var a);  // 1×C

    // Negative log likelihood of Eq-10 form; see matcher/training modules.
    // matches: (i,j) index pairs into p; unmatched_a/b index the sigma vectors.
    Var assignment_nll(Var p, Var sigma_a, Var sigma_b,
                       const std::vector<std::pair<int, int>>& matches,
                       const std::vector<int>& unmatched_a,
                       const std::vector<int>& unmatched_b);

    void backward(Var root);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool needs_grad = false;
        std::function<void(Tape&)> backprop;
    };

    Var emit(Mat value, bool needs_grad, std::function<void(Tape&)> backprop);
    void accumulate(Var v, const Mat& delta);
    Mat& grad_ref(Var v);

    std::vector<Node> nodes_;
};

// Relative difference between analytic and finite-difference gradients,
// ||ga - gf|| / max(||ga||, ||gf||, eps). Used by the gradient suites.
double grad_rel_error(const Mat& analytic, const Mat& fd);

}  // namespace mif::ad
