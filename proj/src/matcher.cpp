#include "mif/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "mif/core/error.hpp"
#include "mif/core/kernels.hpp"

namespace mif {

Mat score_matrix(const Mat& fm_a, const Mat& fm_b) {
    if (fm_a.cols() != fm_b.cols())
        throw ShapeMismatch("score_matrix: descriptor widths differ, " +
                            std::to_string(fm_a.cols()) + " vs " + std::to_string(fm_b.cols()));
    return kern::matmul_nt(fm_a, fm_b);
}

namespace {

Mat col_softmax_plain(const Mat& s) {
    Mat out(s.rows(), s.cols());
    for (int j = 0; j < s.cols(); ++j) {
        double mx = s(0, j);
        for (int i = 1; i < s.rows(); ++i) mx = std::max(mx, s(i, j));
        double sum = 0.0;
        for (int i = 0; i < s.rows(); ++i) {
            out(i, j) = std::exp(s(i, j) - mx);
            sum += out(i, j);
        }
        const double inv = 1.0 / sum;
        for (int i = 0; i < s.rows(); ++i) out(i, j) *= inv;
    }
    return out;
}

}  // namespace

Mat dual_softmax(const Mat& s) {
    Mat rows = kern::row_softmax(s);
    const Mat cols = col_softmax_plain(s);
    for (std::size_t i = 0; i < rows.size(); ++i) rows.raw()[i] *= cols.raw()[i];
    return rows;
}

ad::Var dual_softmax_op(ad::Tape& t, ad::Var s) {
    return t.mul(t.row_softmax(s), t.col_softmax(s));
}

std::vector<double> matchability(const Mat& fm, const Mat& w, double bias) {
    if (w.rows() != fm.cols() || w.cols() != 1)
        throw ShapeMismatch("matchability: head must be C×1");
    std::vector<double> out(std::size_t(fm.rows()));
    for (int i = 0; i < fm.rows(); ++i) {
        double logit = bias;
        const double* f = fm.row(i);
        for (int j = 0; j < fm.cols(); ++j) logit += f[j] * w(j, 0);
        out[i] = 1.0 / (1.0 + std::exp(-logit));
    }
    return out;
}

std::vector<Match> extract_matches(const Mat& p, const std::vector<double>& sigma_a,
                                   const std::vector<double>& sigma_b, double p_threshold) {
    const int na = p.rows(), nb = p.cols();
    std::vector<int> best_col(na, -1), best_row(nb, -1);
    for (int i = 0; i < na; ++i) {
        int best = 0;
        for (int j = 1; j < nb; ++j)
            if (p(i, j) > p(i, best)) best = j;  // ties keep the lowest index
        best_col[i] = best;
    }
    for (int j = 0; j < nb; ++j) {
        int best = 0;
        for (int i = 1; i < na; ++i)
            if (p(i, j) > p(best, j)) best = i;
        best_row[j] = best;
    }
    std::vector<Match> out;
    for (int i = 0; i < na; ++i) {
        const int j = best_col[i];
        if (j < 0 || best_row[j] != i) continue;
        if (p(i, j) < p_threshold) continue;
        if (std::min(sigma_a[i], sigma_b[j]) < 0.1) continue;
        out.push_back({i, j, p(i, j)});
    }
    std::sort(out.begin(), out.end(), [](const Match& x, const Match& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });
    return out;
}

std::vector<Match> knn_ratio_match(const Mat& desc_a, const Mat& desc_b, double ratio) {
    if (desc_b.rows() < 2) throw ShapeMismatch("knn_ratio_match needs at least two B rows");
    const Mat d2 = kern::pairwise_sqdist(desc_a, desc_b);
    std::vector<Match> out;
    for (int i = 0; i < desc_a.rows(); ++i) {
        int n1 = -1, n2 = -1;
        for (int j = 0; j < desc_b.rows(); ++j) {
            if (n1 < 0 || d2(i, j) < d2(i, n1)) {
                n2 = n1;
                n1 = j;
            } else if (n2 < 0 || d2(i, j) < d2(i, n2)) {
                n2 = j;
            }
        }
        const double d1 = std::sqrt(d2(i, n1));
        const double dsecond = std::sqrt(d2(i, n2));
        const double r = dsecond > 0.0 ? d1 / dsecond : 1.0;
        if (r < ratio) out.push_back({i, n1, r});
    }
    return out;
}

std::vector<double> lowe_ratios(const Mat& desc_a, const Mat& desc_b) {
    if (desc_b.rows() < 2) throw ShapeMismatch("lowe_ratios needs at least two B rows");
    const Mat d2 = kern::pairwise_sqdist(desc_a, desc_b);
    std::vector<double> out(std::size_t(desc_a.rows()));
    for (int i = 0; i < desc_a.rows(); ++i) {
        int n1 = -1, n2 = -1;
        for (int j = 0; j < desc_b.rows(); ++j) {
            if (n1 < 0 || d2(i, j) < d2(i, n1)) {
                n2 = n1;
                n1 = j;
            } else if (n2 < 0 || d2(i, j) < d2(i, n2)) {
                n2 = j;
            }
        }
        const double d1 = std::sqrt(d2(i, n1));
        const double dsecond = std::sqrt(d2(i, n2));
        out[i] = dsecond > 0.0 ? d1 / dsecond : 1.0;
    }
    return out;
}

std::vector<int> ratio_histogram(const Mat& desc_a, const Mat& desc_b, int bins) {
    const std::vector<double> ratios = lowe_ratios(desc_a, desc_b);
    std::vector<int> hist(std::size_t(bins), 0);
    for (double r : ratios) {
        int bin = int(r * bins);
        if (bin >= bins) bin = bins - 1;
        if (bin < 0) bin = 0;
        ++hist[bin];
    }
    return hist;
}

}  // namespace mif
