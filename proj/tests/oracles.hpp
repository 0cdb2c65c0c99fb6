#pragma once

// Independent reference implementations used only by tests. Each oracle takes
// a deliberately different algorithmic route from the library code it checks.

#include <cmath>
#include <limits>
#include <vector>

#include "scar/rng.hpp"
#include "scar/types.hpp"

namespace oracle {

// Global minimum of ||x - Ba||^2 + alpha*||a||_1 by exhaustive enumeration of
// all 3^S sign patterns. Each pattern is solved in closed form over its
// support; patterns whose solution contradicts the assumed signs are
// discarded. Intended for S <= 8.
inline double l1_ls_best_objective(const scar::Matrix& B, const scar::Vector& x, double alpha) {
    const Eigen::Index S = B.cols();
    const double zero_objective = x.squaredNorm();
    double best = zero_objective;

    std::vector<int> pattern(static_cast<std::size_t>(S), -1);  // each in {-1, 0, +1}
    const long total = static_cast<long>(std::pow(3.0, static_cast<double>(S)) + 0.5);
    for (long code = 0; code < total; ++code) {
        long rest = code;
        bool any = false;
        for (Eigen::Index j = 0; j < S; ++j) {
            pattern[static_cast<std::size_t>(j)] = static_cast<int>(rest % 3) - 1;
            rest /= 3;
            if (pattern[static_cast<std::size_t>(j)] != 0) any = true;
        }
        if (!any) continue;  // all-zero handled above

        std::vector<int> support;
        for (Eigen::Index j = 0; j < S; ++j)
            if (pattern[static_cast<std::size_t>(j)] != 0) support.push_back(static_cast<int>(j));
        const std::size_t m = support.size();

        scar::Matrix Bs(B.rows(), m);
        scar::Vector theta(m);
        for (std::size_t r = 0; r < m; ++r) {
            Bs.col(r) = B.col(support[r]);
            theta[r] = pattern[static_cast<std::size_t>(support[r])];
        }
        const scar::Matrix G = Bs.transpose() * Bs;
        const scar::Vector rhs = Bs.transpose() * x - 0.5 * alpha * theta;
        Eigen::FullPivLU<scar::Matrix> lu(G);
        if (!lu.isInvertible()) continue;
        const scar::Vector a = lu.solve(rhs);

        bool feasible = true;
        for (std::size_t r = 0; r < m; ++r) {
            if (a[r] * theta[r] <= 0.0) {
                feasible = false;
                break;
            }
        }
        if (!feasible) continue;

        const double obj = (x - Bs * a).squaredNorm() + alpha * a.cwiseAbs().sum();
        best = std::min(best, obj);
    }
    return best;
}

// Long-run projected gradient descent for min ||X - BA||_F^2 with unit-ball
// column constraints. Fixed step 1/L with L = 2*lambda_max(A A').
inline scar::Matrix basis_update_projected_gradient(const scar::Matrix& X, const scar::Matrix& A,
                                                    const scar::Matrix& B0, int iterations) {
    const scar::Matrix G = A * A.transpose();
    const scar::Matrix H = X * A.transpose();
    Eigen::SelfAdjointEigenSolver<scar::Matrix> eig(G);
    const double L = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 1e-12);
    const double step = 1.0 / L;

    scar::Matrix B = B0;
    for (int it = 0; it < iterations; ++it) {
        scar::Matrix grad = 2.0 * (B * G - H);
        B -= step * grad;
        for (Eigen::Index j = 0; j < B.cols(); ++j) {
            const double norm = B.col(j).norm();
            if (norm > 1.0) B.col(j) /= norm;
        }
    }
    return B;
}

// Direct naive summation of the sparse-coding objective in extended precision.
inline long double objective_naive(const scar::Matrix& B, const scar::Matrix& X,
                                   const scar::Matrix& A, double alpha) {
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            long double recon = 0.0L;
            for (Eigen::Index j = 0; j < B.cols(); ++j)
                recon += static_cast<long double>(B(r, j)) * static_cast<long double>(A(j, i));
            const long double diff = static_cast<long double>(X(r, i)) - recon;
            total += diff * diff;
        }
        for (Eigen::Index j = 0; j < A.rows(); ++j)
            total += static_cast<long double>(alpha) * std::abs(static_cast<long double>(A(j, i)));
    }
    return total;
}

// Random dictionary with exactly unit-norm columns.
inline scar::Matrix random_unit_dictionary(Eigen::Index n, Eigen::Index S, scar::Rng& rng) {
    scar::Matrix B(n, S);
    for (Eigen::Index j = 0; j < S; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) B(i, j) = rng.normal();
        B.col(j) /= B.col(j).norm();
    }
    return B;
}

inline scar::Vector random_vector(Eigen::Index n, scar::Rng& rng) {
    scar::Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal();
    return x;
}

inline scar::Matrix random_matrix(Eigen::Index r, Eigen::Index c, scar::Rng& rng) {
    scar::Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

}  // namespace oracle
