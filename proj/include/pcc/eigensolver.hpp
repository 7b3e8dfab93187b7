#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pcc/errors.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

// Eigenvalues (non-increasing) and the matching orthonormal eigenvectors
// stored as columns.  Eigenvectors inside a degenerate eigenvalue block are
// only determined up to rotation; compare projectors, not raw columns.
struct SpectralDecomposition {
    std::vector<double> eigenvalues;
    DenseMatrix eigenvectors;

    std::size_t dim() const noexcept { return eigenvalues.size(); }
};

namespace detail {

// Sweep budget per eigenvalue in the QL iteration.
constexpr int kQlMaxSweeps = 64;

// Householder reduction of the symmetric matrix held in v to tridiagonal
// form (diagonal d, off-diagonal e), accumulating the transformation in v.
// Classic EISPACK tred2, zero-based.
inline void householder_tridiagonalize(DenseMatrix& v, std::vector<double>& d,
                                       std::vector<double>& e) {
    const std::size_t n = v.rows();
    for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::fabs(d[k]);
        if (scale == 0.0) {
            e[i] = d[l];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = v(l, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[l];
            double g = f > 0.0 ? -std::sqrt(h) : std::sqrt(h);
            e[i] = scale * g;
            h -= f * g;
            d[l] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (std::size_t k = j + 1; k <= l; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (std::size_t k = j; k <= l; ++k)
                    v(k, j) -= f * e[k] + g * d[k];
                d[j] = v(l, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the Householder transformations.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

// Implicit-shift QL iteration (Wilkinson shift) on the tridiagonal matrix,
// rotating the eigenvector accumulator v along.  EISPACK tql2 with an
// explicit sweep cap.
inline void ql_implicit_shift(std::vector<double>& d, std::vector<double>& e,
                              DenseMatrix& v) {
    const std::size_t n = d.size();
    if (n < 2) return;
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    const double eps = std::ldexp(1.0, -52);
    double f = 0.0, tst1 = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::fabs(d[l]) + std::fabs(e[l]));
        std::size_t m = l;
        while (std::fabs(e[m]) > eps * tst1) ++m;  // e[n-1] == 0 stops the scan

        if (m > l) {
            int sweeps = 0;
            do {
                if (++sweeps > kQlMaxSweeps)
                    throw ConvergenceError(
                        "eigensolver: no convergence for eigenvalue index " +
                            std::to_string(l) + " after " +
                            std::to_string(kQlMaxSweeps) + " sweeps",
                        l);
                const double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    const double gi = c * e[i];
                    const double hi = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * gi;
                    d[i + 1] = hi + s * (c * gi + s * d[i]);

                    double* vi = v.col(i);
                    double* vi1 = v.col(i + 1);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double t = vi1[k];
                        vi1[k] = s * vi[k] + c * t;
                        vi[k] = c * vi[k] - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::fabs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

// Deterministic orientation: the first coordinate of largest magnitude in
// each column is made positive.  Projectors and predictions are unaffected.
inline void normalize_column_signs(DenseMatrix& u) {
    for (std::size_t j = 0; j < u.cols(); ++j) {
        double* c = u.col(j);
        std::size_t arg = 0;
        double best = std::fabs(c[0]);
        for (std::size_t i = 1; i < u.rows(); ++i) {
            const double a = std::fabs(c[i]);
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (c[arg] < 0.0)
            for (std::size_t i = 0; i < u.rows(); ++i) c[i] = -c[i];
    }
}

inline void sort_descending(std::vector<double>& w, DenseMatrix& u) {
    const std::size_t n = w.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    std::vector<double> ws(n);
    DenseMatrix us(u.rows(), u.cols());
    for (std::size_t j = 0; j < n; ++j) {
        ws[j] = w[order[j]];
        const double* src = u.col(order[j]);
        std::copy(src, src + u.rows(), us.col(j));
    }
    w = std::move(ws);
    u = std::move(us);
}

}  // namespace detail

// Full eigendecomposition of a symmetric matrix: Householder reduction to
// tridiagonal form followed by implicit-shift QL.  Eigenvalues come out
// non-increasing, eigenvector columns are unit length with a deterministic
// sign.  Inputs asymmetric beyond a 1e-12 relative tolerance are rejected.
inline SpectralDecomposition sym_eigendecompose(const DenseMatrix& a) {
    if (a.rows() != a.cols())
        throw ShapeError("sym_eigendecompose: matrix is " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", expected square");
    const std::size_t n = a.rows();
    if (n == 0) throw ShapeError("sym_eigendecompose: empty matrix");
    if (!a.all_finite())
        throw PreconditionError("sym_eigendecompose: non-finite entries");

    double max_abs = 0.0, max_asym = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            max_abs = std::max(max_abs, std::fabs(a(i, j)));
            max_asym = std::max(max_asym, std::fabs(a(i, j) - a(j, i)));
        }
    if (max_asym > 1e-12 * std::max(1.0, max_abs))
        throw ShapeError("sym_eigendecompose: matrix is not symmetric "
                         "(max asymmetry " +
                         std::to_string(max_asym) + ")");

    SpectralDecomposition dec;
    dec.eigenvectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            dec.eigenvectors(i, j) = 0.5 * (a(i, j) + a(j, i));

    dec.eigenvalues.assign(n, 0.0);
    std::vector<double> off(n, 0.0);
    detail::householder_tridiagonalize(dec.eigenvectors, dec.eigenvalues, off);
    detail::ql_implicit_shift(dec.eigenvalues, off, dec.eigenvectors);
    detail::sort_descending(dec.eigenvalues, dec.eigenvectors);
    detail::normalize_column_signs(dec.eigenvectors);
    return dec;
}

enum class CovariancePath {
    Auto,        // Gram route when the sample count is much smaller than d
    Covariance,  // decompose the d x d matrix (1/N) Z Z^T
    Gram,        // decompose the N x N matrix (1/N) Z^T Z and map back
};

namespace detail {

inline void clamp_small_negatives(std::vector<double>& w) {
    double top = 0.0;
    for (double v : w) top = std::max(top, std::fabs(v));
    const double band = 1e-10 * std::max(1.0, top);
    for (double& v : w)
        if (v < 0.0 && v >= -band) v = 0.0;
}

// (1/N) Z^T Z, exactly symmetric.
inline DenseMatrix gram_matrix(const DenseMatrix& z) {
    const std::size_t n = z.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    DenseMatrix g(n, n);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a <= b; ++a) {
            const double v = dot(z.col(a), z.col(b), z.rows()) * inv_n;
            g(a, b) = v;
            g(b, a) = v;
        }
    return g;
}

// Extends the first `have` orthonormal columns of u to a full basis using
// re-orthogonalized coordinate vectors.
inline void complete_basis(DenseMatrix& u, std::size_t have) {
    const std::size_t d = u.rows();
    std::vector<double> w(d);
    std::size_t filled = have;
    for (double threshold : {0.5, 1e-8, 1e-15}) {
        for (std::size_t cand = 0; cand < d && filled < d; ++cand) {
            std::fill(w.begin(), w.end(), 0.0);
            w[cand] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t k = 0; k < filled; ++k) {
                    const double proj = dot(u.col(k), w.data(), d);
                    const double* uk = u.col(k);
                    for (std::size_t i = 0; i < d; ++i) w[i] -= proj * uk[i];
                }
            const double norm = std::sqrt(dot(w.data(), w.data(), d));
            if (norm > threshold) {
                double* dst = u.col(filled++);
                for (std::size_t i = 0; i < d; ++i) dst[i] = w[i] / norm;
            }
        }
        if (filled == d) break;
    }
}

}  // namespace detail

// Spectral decomposition of the un-centered covariance (1/N) Z Z^T.
// For d >> N the equivalent N x N Gram problem is solved instead and the
// eigenvectors mapped back through u = Z v / |Z v|; the trailing null
// space is completed to a full orthonormal basis with zero eigenvalues.
// Either route reports the same projectors; tiny negative eigenvalues are
// clamped to zero since the matrix is positive semi-definite.
inline SpectralDecomposition covariance_eigen(
    const DenseMatrix& z, CovariancePath path = CovariancePath::Auto) {
    if (z.cols() == 0)
        throw PreconditionError("covariance_eigen: empty sample matrix");
    const std::size_t d = z.rows();
    const std::size_t n = z.cols();
    if (path == CovariancePath::Auto)
        path = d > 4 * n ? CovariancePath::Gram : CovariancePath::Covariance;

    if (path == CovariancePath::Covariance) {
        SpectralDecomposition dec = sym_eigendecompose(covariance(z));
        detail::clamp_small_negatives(dec.eigenvalues);
        return dec;
    }

    const SpectralDecomposition gram =
        sym_eigendecompose(detail::gram_matrix(z));
    SpectralDecomposition dec;
    dec.eigenvalues.assign(d, 0.0);
    dec.eigenvectors = DenseMatrix(d, d);

    const double top = gram.eigenvalues.empty() ? 0.0 : gram.eigenvalues[0];
    const double cutoff = 1e-12 * std::max(1.0, top);
    std::size_t mapped = 0;
    for (std::size_t k = 0; k < n && gram.eigenvalues[k] > cutoff; ++k) {
        double* uk = dec.eigenvectors.col(mapped);
        const double* vk = gram.eigenvectors.col(k);
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < n; ++c) s += z(i, c) * vk[c];
            uk[i] = s;
        }
        const double norm = std::sqrt(dot(uk, uk, d));
        if (norm == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) uk[i] /= norm;
        dec.eigenvalues[mapped] = gram.eigenvalues[k];
        ++mapped;
    }
    detail::complete_basis(dec.eigenvectors, mapped);
    detail::clamp_small_negatives(dec.eigenvalues);
    detail::normalize_column_signs(dec.eigenvectors);
    return dec;
}

}  // namespace pcc
