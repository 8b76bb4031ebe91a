#pragma once

#include <vector>

#include "mif/core/autodiff.hpp"
#include "mif/core/mat.hpp"

namespace mif {

struct Match {
    int a = -1;
    int b = -1;
    double score = 0.0;  // match probability, or d1/d2 for ratio matches
};

// S = F_A (F_B)^T, plain inner products.
Mat score_matrix(const Mat& fm_a, const Mat& fm_b);

// Elementwise product of row-wise and column-wise softmax.
Mat dual_softmax(const Mat& s);
ad::Var dual_softmax_op(ad::Tape& t, ad::Var s);

// sigmoid(f·w + bias) per point; w is C×1.
std::vector<double> matchability(const Mat& fm, const Mat& w, double bias);

// Mutual argmax, probability floor, and matchability floor 0.1; sorted by
// probability descending.
std::vector<Match> extract_matches(const Mat& p, const std::vector<double>& sigma_a,
                                   const std::vector<double>& sigma_b, double p_threshold);

// Lowe ratio test against the two nearest neighbours by Euclidean distance.
std::vector<Match> knn_ratio_match(const Mat& desc_a, const Mat& desc_b, double ratio);

// d1/d2 for every A descriptor (needs at least two B rows).
std::vector<double> lowe_ratios(const Mat& desc_a, const Mat& desc_b);
std::vector<int> ratio_histogram(const Mat& desc_a, const Mat& desc_b, int bins);

}  // namespace mif
