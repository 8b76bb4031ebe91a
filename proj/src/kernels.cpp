#include "mif/core/kernels.hpp"

#include <cassert>
#include <cmath>

namespace mif::kern {

namespace {
Backend g_backend = Backend::openmp;
}

Backend active_backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

// Row i of the product, accumulated in fixed k order. Shared by both
// backends so the results are bitwise identical.
inline void gemm_row(const Mat& a, const Mat& b, Mat& out, int i) {
    const int kdim = a.cols();
    const int n = b.cols();
    double* o = out.row(i);
    for (int j = 0; j < n; ++j) o[j] = 0.0;
    const double* ar = a.row(i);
    for (int k = 0; k < kdim; ++k) {
        const double aik = ar[k];
        const double* br = b.row(k);
        for (int j = 0; j < n; ++j) o[j] += aik * br[j];
    }
}

inline void gemm_nt_row(const Mat& a, const Mat& b, Mat& out, int i) {
    const int kdim = a.cols();
    const int n = b.rows();
    const double* ar = a.row(i);
    double* o = out.row(i);
    for (int j = 0; j < n; ++j) {
        const double* br = b.row(j);
        double s = 0.0;
        for (int k = 0; k < kdim; ++k) s += ar[k] * br[k];
        o[j] = s;
    }
}

inline void gemm_tn_row(const Mat& a, const Mat& b, Mat& out, int i) {
    // out(i, j) = sum_k a(k, i) * b(k, j)
    const int kdim = a.rows();
    const int n = b.cols();
    double* o = out.row(i);
    for (int j = 0; j < n; ++j) o[j] = 0.0;
    for (int k = 0; k < kdim; ++k) {
        const double aki = a(k, i);
        const double* br = b.row(k);
        for (int j = 0; j < n; ++j) o[j] += aki * br[j];
    }
}

inline void softmax_row(const Mat& s, Mat& out, int i) {
    const int n = s.cols();
    const double* sr = s.row(i);
    double* o = out.row(i);
    double mx = sr[0];
    for (int j = 1; j < n; ++j) mx = sr[j] > mx ? sr[j] : mx;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        o[j] = std::exp(sr[j] - mx);
        sum += o[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < n; ++j) o[j] *= inv;
}

inline void sqdist_row(const Mat& a, const Mat& b, Mat& out, int i) {
    const int kdim = a.cols();
    const int n = b.rows();
    const double* ar = a.row(i);
    double* o = out.row(i);
    for (int j = 0; j < n; ++j) {
        const double* br = b.row(j);
        double s = 0.0;
        for (int k = 0; k < kdim; ++k) {
            const double d = ar[k] - br[k];
            s += d * d;
        }
        o[j] = s;
    }
}

}  // namespace

namespace serial {

void gemm(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols() == b.rows());
    for (int i = 0; i < a.rows(); ++i) gemm_row(a, b, out, i);
}

void gemm_nt(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols() == b.cols());
    for (int i = 0; i < a.rows(); ++i) gemm_nt_row(a, b, out, i);
}

void gemm_tn(const Mat& a, const Mat& b, Mat& out) {
    assert(a.rows() == b.rows());
    for (int i = 0; i < a.cols(); ++i) gemm_tn_row(a, b, out, i);
}

void row_softmax(const Mat& s, Mat& out) {
    for (int i = 0; i < s.rows(); ++i) softmax_row(s, out, i);
}

void pairwise_sqdist(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols() == b.cols());
    for (int i = 0; i < a.rows(); ++i) sqdist_row(a, b, out, i);
}

}  // namespace serial

namespace openmp {

void gemm(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols() == b.rows());
    const int n = a.rows();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) gemm_row(a, b, out, i);
}

void gemm_nt(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols() == b.cols());
    const int n = a.rows();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) gemm_nt_row(a, b, out, i);
}

void gemm_tn(const Mat& a, const Mat& b, Mat& out) {
    assert(a.rows() == b.rows());
    const int n = a.cols();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) gemm_tn_row(a, b, out, i);
}

void row_softmax(const Mat& s, Mat& out) {
    const int n = s.rows();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) softmax_row(s, out, i);
}

void pairwise_sqdist(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols() == b.cols());
    const int n = a.rows();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) sqdist_row(a, b, out, i);
}

}  // namespace openmp

#ifdef _OPENMP
#define MIF_DISPATCH(fn, ...)                          \
    if (active_backend() == Backend::openmp)           \
        openmp::fn(__VA_ARGS__);                       \
    else                                               \
        serial::fn(__VA_ARGS__)
#else
#define MIF_DISPATCH(fn, ...) serial::fn(__VA_ARGS__)
#endif

Mat matmul(const Mat& a, const Mat& b) {
    Mat out(a.rows(), b.cols());
    MIF_DISPATCH(gemm, a, b, out);
    return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    Mat out(a.rows(), b.rows());
    MIF_DISPATCH(gemm_nt, a, b, out);
    return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    Mat out(a.cols(), b.cols());
    MIF_DISPATCH(gemm_tn, a, b, out);
    return out;
}

Mat row_softmax(const Mat& s) {
    Mat out(s.rows(), s.cols());
    MIF_DISPATCH(row_softmax, s, out);
    return out;
}

Mat pairwise_sqdist(const Mat& a, const Mat& b) {
    Mat out(a.rows(), b.rows());
    MIF_DISPATCH(pairwise_sqdist, a, b, out);
    return out;
}

#undef MIF_DISPATCH

}  // namespace mif::kern
