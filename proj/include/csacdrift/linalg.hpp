#ifndef CSACDRIFT_LINALG_HPP
#define CSACDRIFT_LINALG_HPP

// Small dense linear algebra: just enough for 4x4 DOP covariance and the
// (degree+1)x(degree+1) normal equations of the drift fit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace csacdrift::linalg {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 scale(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

template <std::size_t N>
using Matrix = std::array<std::array<double, N>, N>;

template <std::size_t N>
struct SymmetricEigen {
    std::array<double, N> values{};
    Matrix<N> vectors{}; // column j is the eigenvector for values[j]
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Converges
/// quadratically; a handful of sweeps is enough for N <= 5.
template <std::size_t N>
SymmetricEigen<N> symmetric_eigen(Matrix<N> a) {
    SymmetricEigen<N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out.vectors[i][i] = 1.0;
    }
    auto& v = out.vectors;

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            diag += a[i][i] * a[i][i];
            for (std::size_t j = i + 1; j < N; ++j) {
                off += a[i][j] * a[i][j];
            }
        }
        if (off <= 1e-36 * diag || off == 0.0) {
            break;
        }

        for (std::size_t p = 0; p < N; ++p) {
            for (std::size_t q = p + 1; q < N; ++q) {
                if (a[p][q] == 0.0) {
                    continue;
                }
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < N; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    for (std::size_t i = 0; i < N; ++i) {
        out.values[i] = a[i][i];
    }
    return out;
}

/// Inverse of a symmetric positive-definite matrix together with its
/// 2-norm condition number. Returns nullopt when the smallest eigenvalue is
/// not positive or the condition number exceeds `max_condition`.
template <std::size_t N>
struct SpdInverse {
    Matrix<N> inverse{};
    double condition = 0.0;
};

template <std::size_t N>
std::optional<SpdInverse<N>> spd_inverse(const Matrix<N>& a, double max_condition) {
    const auto eig = symmetric_eigen<N>(a);
    const auto [lo, hi] = std::minmax_element(eig.values.begin(), eig.values.end());
    if (!(*lo > 0.0) || !std::isfinite(*hi)) {
        return std::nullopt;
    }
    const double cond = *hi / *lo;
    if (cond > max_condition) {
        return std::nullopt;
    }

    SpdInverse<N> out;
    out.condition = cond;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                sum += eig.vectors[i][k] * eig.vectors[j][k] / eig.values[k];
            }
            out.inverse[i][j] = sum;
        }
    }
    return out;
}

/// Solves A x = b for symmetric positive-definite A (row-major, n x n) by
/// Cholesky factorization. Returns nullopt if a pivot collapses below
/// `rel_tol` times the largest diagonal entry, i.e. A is numerically
/// rank-deficient.
inline std::optional<std::vector<double>> cholesky_solve(std::span<const double> a, std::span<const double> b,
                                                         double rel_tol = 1e-13) {
    const std::size_t n = b.size();
    std::vector<double> l(n * n, 0.0);
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        max_diag = std::max(max_diag, std::abs(a[i * n + i]));
    }
    if (max_diag == 0.0) {
        return std::nullopt;
    }

    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) {
            d -= l[j * n + k] * l[j * n + k];
        }
        if (!(d > rel_tol * max_diag)) {
            return std::nullopt;
        }
        const double ljj = std::sqrt(d);
        l[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) {
            s -= l[k * n + ii] * x[k];
        }
        x[ii] = s / l[ii * n + ii];
    }
    return x;
}

} // namespace csacdrift::linalg

#endif
