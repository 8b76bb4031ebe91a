#pragma once

#include "mif/core/mat.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mif::kern {

// Every OpenMP kernel partitions work over disjoint output elements and keeps
// the per-element accumulation order identical to the serial reference, so
// both backends produce bitwise-equal results. Tests assert exact equality.
enum class Backend { serial, openmp };

Backend active_backend();
void set_backend(Backend b);
void set_threads(int n);
int max_threads();

template <class F>
void parallel_for(int n, F&& f) {
#ifdef _OPENMP
    if (active_backend() == Backend::openmp) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
#endif
    for (int i = 0; i < n; ++i) f(i);
}

// Serial reference implementations.
namespace serial {
void gemm(const Mat& a, const Mat& b, Mat& out);      // out = a * b
void gemm_nt(const Mat& a, const Mat& b, Mat& out);   // out = a * b^T
void gemm_tn(const Mat& a, const Mat& b, Mat& out);   // out = a^T * b
void row_softmax(const Mat& s, Mat& out);
void pairwise_sqdist(const Mat& a, const Mat& b, Mat& out);
}  // namespace serial

namespace openmp {
void gemm(const Mat& a, const Mat& b, Mat& out);
void gemm_nt(const Mat& a, const Mat& b, Mat& out);
void gemm_tn(const Mat& a, const Mat& b, Mat& out);
void row_softmax(const Mat& s, Mat& out);
void pairwise_sqdist(const Mat& a, const Mat& b, Mat& out);
}  // namespace openmp

// Dispatched entry points used by the rest of the library.
Mat matmul(const Mat& a, const Mat& b);
Mat matmul_nt(const Mat& a, const Mat& b);
Mat matmul_tn(const Mat& a, const Mat& b);
Mat row_softmax(const Mat& s);
Mat pairwise_sqdist(const Mat& a, const Mat& b);

}  // namespace mif::kern
