#pragma once

// Small dense linear algebra. Eigen handles factorizations at construction
// time; the hot paths (quadratic forms, box minimization) use flat row-major
// arrays and stack storage.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>

#include "dsim/types.hpp"

namespace dsim {

using Mat = Eigen::MatrixXd;

inline Mat to_mat(const std::vector<Vec>& rows) {
    const std::size_t n = rows.size();
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        require_dim(n, rows[i].size());
        for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

inline std::vector<Vec> from_mat(const Mat& m) {
    std::vector<Vec> rows(m.rows(), Vec(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
    return rows;
}

inline bool is_symmetric_positive_definite(const Mat& m) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    if (!m.allFinite()) return false;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    return es.eigenvalues().minCoeff() > 0.0;
}

/// Row-major copy of a symmetric matrix for allocation-free evaluation.
struct QuadForm {
    std::size_t n = 0;
    std::array<double, 64> p{};  // supports n <= 8

    QuadForm() = default;
    explicit QuadForm(const Mat& m) : n(static_cast<std::size_t>(m.rows())) {
        require(n <= 8, "quadratic forms are limited to dimension 8");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p[i * n + j] = m(i, j);
    }

    double at(std::size_t i, std::size_t j) const { return p[i * n + j]; }

    /// (x - c)^T P (x - c)
    double eval(std::span<const double> x, std::span<const double> c) const {
        std::array<double, 8> d{};
        for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - c[i];
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += p[i * n + j] * d[j];
            s += d[i] * row;
        }
        return s;
    }

    /// Maximum of the convex form over a box; attained at a vertex.
    double max_over_box(const Box& b, std::span<const double> c) const {
        double best = 0.0;
        for (std::uint64_t m = 0; m < b.vertex_count(); ++m) {
            std::array<double, 8> x{};
            for (std::size_t i = 0; i < n; ++i) x[i] = (m >> i) & 1U ? b.hi[i] : b.lo[i];
            best = std::max(best, eval(std::span<const double>(x.data(), n), c));
        }
        return best;
    }

    /// Exact minimum of the convex form over a box. Every face (each coordinate
    /// free, at lo, or at hi) is tried; the minimizer of the form restricted to
    /// a face's affine hull is kept when it lies in the box. The global
    /// minimizer is the feasible face minimizer of least value.
    double min_over_box(const Box& b, std::span<const double> c) const {
        std::uint64_t faces = 1;
        for (std::size_t i = 0; i < n; ++i) faces *= 3;
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t code = 0; code < faces; ++code) {
            std::array<int, 8> state{};  // 0 free, 1 lo, 2 hi
            std::uint64_t t = code;
            std::size_t nfree = 0;
            for (std::size_t i = 0; i < n; ++i) {
                state[i] = static_cast<int>(t % 3);
                t /= 3;
                if (state[i] == 0) ++nfree;
            }
            std::array<double, 8> x{};
            for (std::size_t i = 0; i < n; ++i)
                x[i] = state[i] == 1 ? b.lo[i] : state[i] == 2 ? b.hi[i] : c[i];
            if (nfree > 0 && nfree < n) {
                // Solve P_FF (x_F - c_F) = -P_FB (x_B - c_B) by Gaussian elimination.
                std::array<std::size_t, 8> fi{};
                std::size_t f = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if (state[i] == 0) fi[f++] = i;
                std::array<double, 64> a{};
                std::array<double, 8> rhs{};
                for (std::size_t r = 0; r < f; ++r) {
                    for (std::size_t s = 0; s < f; ++s) a[r * f + s] = at(fi[r], fi[s]);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        if (state[j] != 0) acc += at(fi[r], j) * (x[j] - c[j]);
                    rhs[r] = -acc;
                }
                for (std::size_t col = 0; col < f; ++col) {
                    const double piv = a[col * f + col];
                    for (std::size_t r = col + 1; r < f; ++r) {
                        const double factor = a[r * f + col] / piv;
                        for (std::size_t s = col; s < f; ++s) a[r * f + s] -= factor * a[col * f + s];
                        rhs[r] -= factor * rhs[col];
                    }
                }
                std::array<double, 8> y{};
                for (std::size_t r = f; r-- > 0;) {
                    double acc = rhs[r];
                    for (std::size_t s = r + 1; s < f; ++s) acc -= a[r * f + s] * y[s];
                    y[r] = acc / a[r * f + r];
                }
                for (std::size_t r = 0; r < f; ++r) x[fi[r]] = c[fi[r]] + y[r];
            }
            bool feasible = true;
            for (std::size_t i = 0; i < n && feasible; ++i)
                if (state[i] == 0 && (x[i] < b.lo[i] || x[i] > b.hi[i])) feasible = false;
            if (!feasible) continue;
            best = std::min(best, eval(std::span<const double>(x.data(), n), c));
        }
        return best;
    }
};

/// log2 of the determinant of a positive-definite matrix.
inline double log2_det(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    require(llt.info() == Eigen::Success, "matrix is not positive definite");
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log2(llt.matrixL()(i, i));
    return 2.0 * s;
}

/// Principal submatrix with row/column `drop` removed.
inline Mat drop_index(const Mat& m, std::size_t drop) {
    const Eigen::Index n = m.rows();
    Mat r(n - 1, n - 1);
    for (Eigen::Index i = 0, ri = 0; i < n; ++i) {
        if (static_cast<std::size_t>(i) == drop) continue;
        for (Eigen::Index j = 0, rj = 0; j < n; ++j) {
            if (static_cast<std::size_t>(j) == drop) continue;
            r(ri, rj++) = m(i, j);
        }
        ++ri;
    }
    return r;
}

}  // namespace dsim
