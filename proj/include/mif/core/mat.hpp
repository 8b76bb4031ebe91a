#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mif/core/rng.hpp"

namespace mif {

// Dense row-major matrix of doubles. All heavy math funnels through the
// kernels in kernels.hpp; this type only owns storage and trivial access.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, fill) {}

    static Mat from_rows(int rows, int cols, std::vector<double> values) {
        Mat m;
        m.rows_ = rows;
        m.cols_ = cols;
        assert(values.size() == std::size_t(rows) * cols);
        m.data_ = std::move(values);
        return m;
    }

    static Mat randn(int rows, int cols, double stddev, Rng& rng) {
        Mat m(rows, cols);
        for (auto& v : m.data_) v = rng.normal(0.0, stddev);
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[std::size_t(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[std::size_t(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(int r) { return data_.data() + std::size_t(r) * cols_; }
    const double* row(int r) const { return data_.data() + std::size_t(r) * cols_; }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

}  // namespace mif
