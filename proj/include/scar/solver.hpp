#pragma once

// Convex kernels behind codebook learning and feature extraction:
//   * solve_l1_ls / SparseEncoder — exact L1-regularised least squares via
//     feature-sign search, certified by a KKT residual;
//   * update_basis — least squares over the dictionary with unit-ball column
//     constraints, solved by cyclic block-coordinate minimisation with
//     closed-form column steps;
//   * sparse_coding_objective — the reconstruction + L1 objective both of the
//     above alternate on.
//
// All solvers are pure functions of their inputs and safe to call from many
// threads at once.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "scar/error.hpp"
#include "scar/types.hpp"

namespace scar {

struct SparseCodingProblem {
    Matrix dictionary;  // n x S, every column L2 norm <= 1 + 1e-9
    Vector target;      // length n
    double alpha = 0.1;

    void validate() const {
        if (dictionary.rows() < 1 || dictionary.cols() < 1)
            throw ConfigError("sparse coding problem: empty dictionary");
        if (target.size() != dictionary.rows())
            throw ConfigError("sparse coding problem: target length does not match dictionary rows");
        if (!(alpha > 0.0)) throw ConfigError("sparse coding problem: alpha must be positive");
        if (!all_finite(dictionary) || !all_finite(target))
            throw ConfigError("sparse coding problem: non-finite input");
        for (Eigen::Index j = 0; j < dictionary.cols(); ++j) {
            if (dictionary.col(j).norm() > 1.0 + 1e-9)
                throw ConfigError("sparse coding problem: dictionary column norm exceeds 1");
        }
    }
};

struct SolverOptions {
    double kkt_tol = 1e-6;
    int max_iterations = 1000;
};

struct SolverReport {
    Vector solution;
    double objective = 0.0;     // ||x - Ba||^2 + alpha*||a||_1 at solution
    int iterations = 0;         // accepted steps
    double kkt_residual = 0.0;  // max violation of the stationarity conditions
    bool converged = false;
    std::vector<double> trace;  // objective after each accepted step, starting at a = 0
};

namespace detail {

// Solves G x = rhs for symmetric positive semi-definite G, falling back to a
// tiny ridge when the factorization is unreliable (e.g. duplicate atoms).
inline Vector solve_spd(const Matrix& gram, const Vector& rhs) {
    Eigen::LDLT<Matrix> ldlt(gram);
    Vector x = ldlt.solve(rhs);
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (ldlt.info() == Eigen::Success && (gram * x - rhs).cwiseAbs().maxCoeff() <= 1e-8 * scale)
        return x;
    Matrix ridged = gram;
    const double ridge = 1e-10 * std::max(1.0, gram.trace() / static_cast<double>(gram.rows()));
    ridged.diagonal().array() += ridge;
    return ridged.ldlt().solve(rhs);
}

}  // namespace detail

/// Shares the Gram matrix of one dictionary across many solves. Immutable
/// after construction; encode() may be called concurrently.
class SparseEncoder {
public:
    SparseEncoder(Matrix dictionary, double alpha, SolverOptions options = {})
        : dictionary_(std::move(dictionary)),
          gram_(dictionary_.transpose() * dictionary_),
          alpha_(alpha),
          options_(options) {
        SparseCodingProblem probe{dictionary_, Vector::Zero(dictionary_.rows()), alpha_};
        probe.validate();
    }

    const Matrix& dictionary() const { return dictionary_; }
    double alpha() const { return alpha_; }
    const SolverOptions& options() const { return options_; }

    SolverReport encode(const Vector& target) const {
        if (target.size() != dictionary_.rows())
            throw ConfigError("encode: target length does not match dictionary rows");
        if (!all_finite(target)) throw ConfigError("encode: non-finite target");
        return feature_sign_search(target);
    }

private:
    // Feature-sign search (active-set over sign patterns). State is kept in
    // Gram form: for the smooth part f(a) = ||x - Ba||^2,
    //   grad f = 2(G a - c),  f = x'x - 2 a'c + a'G a
    // with G = B'B and c = B'x. Every accepted step lowers the objective.
    SolverReport feature_sign_search(const Vector& x) const {
        const Eigen::Index S = dictionary_.cols();
        const Vector c = dictionary_.transpose() * x;
        const double xsq = x.squaredNorm();

        Vector a = Vector::Zero(S);
        std::vector<int> active;
        std::vector<double> theta(static_cast<std::size_t>(S), 0.0);

        auto l1_norm = [&]() {
            double s = 0.0;
            for (int j : active) s += std::abs(a[j]);
            return s;
        };
        auto smooth_value = [&]() {
            double lin = 0.0, quad = 0.0;
            for (int j : active) {
                lin += a[j] * c[j];
                double gj = 0.0;
                for (int k : active) gj += gram_(j, k) * a[k];
                quad += a[j] * gj;
            }
            return xsq - 2.0 * lin + quad;
        };
        auto smooth_grad = [&]() -> Vector {
            Vector g = -2.0 * c;
            for (int j : active) g += (2.0 * a[j]) * gram_.col(j);
            return g;
        };

        SolverReport report;
        report.trace.push_back(xsq);

        int iterations = 0;
        bool zero_conditions_met = false;

        while (iterations < options_.max_iterations) {
            // Activation step: bring in the zero coefficient most violating
            // its subgradient bound |g_j| <= alpha.
            {
                const Vector g = smooth_grad();
                int pick = -1;
                double worst = alpha_ + options_.kkt_tol;
                for (Eigen::Index j = 0; j < S; ++j) {
                    if (a[j] != 0.0) continue;
                    const double v = std::abs(g[j]);
                    if (v > worst) {
                        worst = v;
                        pick = static_cast<int>(j);
                    }
                }
                if (pick < 0) {
                    zero_conditions_met = true;
                    break;
                }
                theta[static_cast<std::size_t>(pick)] = g[pick] > 0.0 ? -1.0 : 1.0;
                active.push_back(pick);
            }

            // Feature-sign steps: solve the QP restricted to the current sign
            // pattern, line-search through every sign flip on the segment,
            // drop coefficients that land exactly on zero, repeat until the
            // full step is accepted (nonzero stationarity holds).
            while (iterations < options_.max_iterations) {
                ++iterations;
                const std::size_t m = active.size();
                Matrix gram_act(m, m);
                Vector rhs(m), a_cur(m), c_act(m);
                for (std::size_t r = 0; r < m; ++r) {
                    for (std::size_t s2 = 0; s2 < m; ++s2)
                        gram_act(r, s2) = gram_(active[r], active[s2]);
                    c_act[r] = c[active[r]];
                    rhs[r] = c_act[r] - 0.5 * alpha_ * theta[static_cast<std::size_t>(active[r])];
                    a_cur[r] = a[active[r]];
                }
                const Vector a_hat = detail::solve_spd(gram_act, rhs);
                const Vector dir = a_hat - a_cur;

                // Objective along a_cur + t*dir for t in (0, 1]:
                // smooth(t) = f0 + q1*t + q2*t^2; L1 term evaluated per stop.
                const double f0 = smooth_value();
                const double q2 = dir.dot(gram_act * dir);
                const double q1 = 2.0 * dir.dot(gram_act * a_cur) - 2.0 * dir.dot(c_act);
                const double f_now = f0 + alpha_ * l1_norm();

                std::vector<std::pair<double, int>> stops;  // (t, crossing row or -1)
                stops.emplace_back(1.0, -1);
                for (std::size_t r = 0; r < m; ++r) {
                    if (a_cur[r] == 0.0) continue;
                    if ((a_cur[r] > 0.0) != (a_hat[r] > 0.0) || a_hat[r] == 0.0) {
                        const double t = a_cur[r] / (a_cur[r] - a_hat[r]);
                        if (t > 0.0 && t <= 1.0) stops.emplace_back(t, static_cast<int>(r));
                    }
                }

                double best_t = 0.0, best_f = f_now;
                int best_cross = -1;
                for (auto [t, cross] : stops) {
                    double l1t = 0.0;
                    for (std::size_t r = 0; r < m; ++r) {
                        if (cross == static_cast<int>(r)) continue;
                        l1t += std::abs(a_cur[r] + t * dir[r]);
                    }
                    const double f = f0 + q1 * t + q2 * t * t + alpha_ * l1t;
                    if (f < best_f - 1e-15 * std::max(1.0, std::abs(best_f))) {
                        best_f = f;
                        best_t = t;
                        best_cross = cross;
                    }
                }

                if (best_t == 0.0) break;  // numerically degenerate; try activation

                for (std::size_t r = 0; r < m; ++r) a[active[r]] = a_cur[r] + best_t * dir[r];
                if (best_cross >= 0) a[active[static_cast<std::size_t>(best_cross)]] = 0.0;

                std::vector<int> still;
                still.reserve(active.size());
                for (int j : active) {
                    if (a[j] == 0.0) {
                        theta[static_cast<std::size_t>(j)] = 0.0;
                    } else {
                        theta[static_cast<std::size_t>(j)] = a[j] > 0.0 ? 1.0 : -1.0;
                        still.push_back(j);
                    }
                }
                active.swap(still);
                report.trace.push_back(smooth_value() + alpha_ * l1_norm());

                if (best_t == 1.0 && best_cross < 0) break;  // full step accepted
            }
        }

        report.solution = a;
        report.objective = smooth_value() + alpha_ * l1_norm();
        report.iterations = iterations;
        report.kkt_residual = l1_ls_kkt_residual(dictionary_, x, alpha_, a);
        report.converged = zero_conditions_met && report.kkt_residual <= options_.kkt_tol;
        return report;
    }

public:
    /// Max violation of the optimality conditions of min ||x-Ba||^2 + alpha*||a||_1:
    ///   a_j != 0:  2 b_j'(Ba - x) + alpha*sign(a_j) = 0
    ///   a_j == 0:  |2 b_j'(Ba - x)| <= alpha
    /// Evaluated against the dictionary directly rather than the cached Gram.
    static double l1_ls_kkt_residual(const Matrix& dictionary, const Vector& x, double alpha,
                                     const Vector& a) {
        const Vector g = 2.0 * (dictionary.transpose() * (dictionary * a - x));
        double worst = 0.0;
        for (Eigen::Index j = 0; j < g.size(); ++j) {
            if (a[j] != 0.0)
                worst = std::max(worst, std::abs(g[j] + alpha * (a[j] > 0.0 ? 1.0 : -1.0)));
            else
                worst = std::max(worst, std::max(0.0, std::abs(g[j]) - alpha));
        }
        return worst;
    }

private:
    Matrix dictionary_;
    Matrix gram_;
    double alpha_;
    SolverOptions options_;
};

/// One-shot solve. Batch callers should hold a SparseEncoder instead so the
/// Gram matrix is computed once per dictionary.
inline SolverReport solve_l1_ls(const SparseCodingProblem& problem, SolverOptions options = {}) {
    problem.validate();
    SparseEncoder encoder(problem.dictionary, problem.alpha, options);
    return encoder.encode(problem.target);
}

struct BasisUpdateOptions {
    double kkt_tol = 1e-6;
    int max_sweeps = 10000;
    // Secondary stop: a sweep that improves the Frobenius objective by less
    // than this relative amount ends the iteration even if the first-order
    // residual is still above kkt_tol (slow tail on ill-conditioned Grams).
    double objective_rel_tol = 1e-11;
};

struct BasisUpdateReport {
    Matrix basis;               // n x S, every column norm <= 1 + 1e-9
    int sweeps = 0;
    double kkt_residual = 0.0;  // first-order violation, see below
    bool converged = false;
    bool degenerate = false;    // near-zero activation energy on a non-passthrough column
    std::vector<int> passthrough;  // columns returned unchanged (all-zero activation row)
};

/// Minimises ||X - B A||_F^2 over B subject to ||b_j|| <= 1, warm-started at
/// `warm_start`, by cyclic closed-form column updates projected onto the unit
/// ball. Columns whose activation row is identically zero are returned
/// unchanged. The reported residual is the max over columns of the
/// first-order violation: interior columns need a vanishing gradient; columns
/// on the sphere need the gradient anti-parallel to the column.
inline BasisUpdateReport update_basis(const Matrix& batch, const Matrix& activations,
                                      const Matrix& warm_start, BasisUpdateOptions options = {}) {
    const Eigen::Index n = batch.rows();
    const Eigen::Index K = batch.cols();
    const Eigen::Index S = activations.rows();
    if (K < 1) throw ConfigError("update_basis: empty batch");
    if (activations.cols() != K)
        throw ConfigError("update_basis: activation count does not match batch");
    if (warm_start.rows() != n || warm_start.cols() != S)
        throw ConfigError("update_basis: warm start shape mismatch");
    if (!all_finite(batch) || !all_finite(activations) || !all_finite(warm_start))
        throw ConfigError("update_basis: non-finite input");

    BasisUpdateReport report;
    report.basis = warm_start;
    Matrix& B = report.basis;

    const Matrix G = activations * activations.transpose();  // S x S
    const Matrix H = batch * activations.transpose();        // n x S
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());

    std::vector<int> update_cols;
    const double gmax = G.diagonal().maxCoeff();
    for (Eigen::Index j = 0; j < S; ++j) {
        const bool zero_row = (activations.row(j).cwiseAbs().maxCoeff() == 0.0);
        if (zero_row) {
            report.passthrough.push_back(static_cast<int>(j));
        } else {
            update_cols.push_back(static_cast<int>(j));
            if (G(j, j) <= 1e-12 * std::max(1.0, gmax)) report.degenerate = true;
        }
    }

    auto kkt_residual = [&]() {
        // grad_j = 2 (B G - H) e_j; at an optimum interior columns have
        // grad_j = 0 and boundary columns have grad_j = -2*lambda_j*b_j.
        const Matrix grad = 2.0 * (B * G - H);
        double worst = 0.0;
        for (int j : update_cols) {
            const Vector gj = grad.col(j);
            const double norm = B.col(j).norm();
            if (norm < 1.0 - 1e-9) {
                worst = std::max(worst, gj.cwiseAbs().maxCoeff());
            } else {
                const double along = B.col(j).dot(gj);
                const Vector ortho = gj - along * B.col(j);
                worst = std::max(worst, ortho.cwiseAbs().maxCoeff());
                worst = std::max(worst, std::max(0.0, along));
            }
        }
        return worst;
    };

    // Objective tracked in Gram form:
    //   ||X - BA||_F^2 = tr(X'X) - 2 tr(B'H) + tr(B'B G).
    const double x_energy = batch.squaredNorm();
    auto objective = [&]() {
        return x_energy - 2.0 * B.cwiseProduct(H).sum() +
               ((B.transpose() * B).cwiseProduct(G)).sum();
    };

    int sweep = 0;
    double residual = kkt_residual();
    double previous = objective();
    while (residual > options.kkt_tol * scale && sweep < options.max_sweeps) {
        ++sweep;
        for (int j : update_cols) {
            const double gjj = G(j, j);
            if (gjj <= 0.0) continue;
            // Unconstrained minimiser over column j with the rest held fixed,
            // then projection onto the unit ball.
            Vector u = B.col(j) + (H.col(j) - B * G.col(j)) / gjj;
            const double norm = u.norm();
            if (norm > 1.0) u /= norm;
            B.col(j) = u;
        }
        residual = kkt_residual();
        const double current = objective();
        if (previous - current < options.objective_rel_tol * std::max(1.0, std::abs(previous)))
            break;
        previous = current;
    }

    report.sweeps = sweep;
    report.kkt_residual = residual;
    report.converged = residual <= options.kkt_tol * scale;
    return report;
}

/// Full sparse-coding objective: sum_i ||x_i - B a_i||^2 + alpha * sum_i ||a_i||_1.
inline double sparse_coding_objective(const Matrix& dictionary, const Matrix& frames,
                                      const Matrix& activations, double alpha) {
    if (frames.rows() != dictionary.rows())
        throw ConfigError("objective: frame length does not match dictionary rows");
    if (activations.rows() != dictionary.cols() || activations.cols() != frames.cols())
        throw ConfigError("objective: activation shape mismatch");
    const double fit = (frames - dictionary * activations).squaredNorm();
    return fit + alpha * activations.cwiseAbs().sum();
}

}  // namespace scar
