#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pcc/errors.hpp"
#include "pcc/parallel.hpp"

namespace pcc {

// Dense column-major matrix of doubles.  Values are immutable by
// convention once an operation has produced them; all operations below
// are pure and safe to call concurrently on shared inputs.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("DenseMatrix: entry count " +
                             std::to_string(data_.size()) + " does not match " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) {
        return data_[i + j * rows_];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return data_[i + j * rows_];
    }

    double* col(std::size_t j) { return data_.data() + j * rows_; }
    const double* col(std::size_t j) const { return data_.data() + j * rows_; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// c(i,j) = sum_k a(i,k) b(k,j), k ascending.  The summation order per
// entry is fixed, so the result does not depend on the worker count.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    DenseMatrix c(a.rows(), b.cols());
    const std::size_t k_count = a.cols();
    parallel_for(b.cols(), 8, [&](std::size_t j0, std::size_t j1) {
        for (std::size_t j = j0; j < j1; ++j) {
            const double* bj = b.col(j);
            double* cj = c.col(j);
            for (std::size_t k = 0; k < k_count; ++k) {
                const double bkj = bj[k];
                const double* ak = a.col(k);
                for (std::size_t i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bkj;
            }
        }
    });
    return c;
}

// (1/N) Z Z^T for a d x N sample matrix, without centering.  The upper
// triangle is accumulated (columns of Z scanned in ascending order) and
// mirrored, so the result is exactly symmetric.
inline DenseMatrix covariance(const DenseMatrix& z) {
    if (z.cols() == 0)
        throw PreconditionError("covariance: empty sample matrix");
    const std::size_t d = z.rows();
    const std::size_t n = z.cols();
    DenseMatrix cov(d, d);

    constexpr std::size_t kTile = 48;
    const std::size_t tiles = (d + kTile - 1) / kTile;
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t bi = 0; bi < tiles; ++bi)
        for (std::size_t bj = bi; bj < tiles; ++bj) blocks.emplace_back(bi, bj);

    parallel_for(blocks.size(), 1, [&](std::size_t t0, std::size_t t1) {
        double acc[kTile * kTile];
        for (std::size_t t = t0; t < t1; ++t) {
            const std::size_t i0 = blocks[t].first * kTile;
            const std::size_t j0 = blocks[t].second * kTile;
            const std::size_t ih = std::min(kTile, d - i0);
            const std::size_t jh = std::min(kTile, d - j0);
            for (std::size_t q = 0; q < ih * jh; ++q) acc[q] = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double* zs = z.col(s);
                for (std::size_t tj = 0; tj < jh; ++tj) {
                    const double zj = zs[j0 + tj];
                    const double* zi = zs + i0;
                    double* row = acc + tj * ih;
                    for (std::size_t ti = 0; ti < ih; ++ti)
                        row[ti] += zi[ti] * zj;
                }
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t tj = 0; tj < jh; ++tj)
                for (std::size_t ti = 0; ti < ih; ++ti) {
                    const std::size_t i = i0 + ti;
                    const std::size_t j = j0 + tj;
                    if (i <= j) cov(i, j) = acc[tj * ih + ti] * inv_n;
                }
        }
    });
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = j + 1; i < d; ++i) cov(i, j) = cov(j, i);
    return cov;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j)
        for (std::size_t i = 0; i < a.rows(); ++i)
            m = std::max(m, std::fabs(a(i, j) - b(i, j)));
    return m;
}

}  // namespace pcc
