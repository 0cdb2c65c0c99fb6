#pragma once

// Codebook learning by alternating minimisation over random batches:
// activations via the exact L1 solver, basis columns via the constrained
// least-squares update. Also hosts initialisation, reconstruction
// diagnostics and the greedy midpoint search over codebook sizes.

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "scar/error.hpp"
#include "scar/parallel.hpp"
#include "scar/rng.hpp"
#include "scar/solver.hpp"
#include "scar/types.hpp"

namespace scar {

struct Codebook {
    Matrix basis;               // n x S, column norms <= 1 + 1e-9
    double alpha = 0.1;
    int frame_length = 0;       // n
    std::vector<double> trace;  // full-data objective per epoch; [0] is at init
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(basis.cols()); }
};

struct LearnConfig {
    int size = 512;
    double alpha = 0.1;
    int batches = 16;
    int max_epochs = 50;
    double rel_tol = 1e-4;  // stop when the relative objective drop falls below this
    std::uint64_t seed = 0;
    int size_cap = 512;
    unsigned threads = 0;
    int dead_atom_epochs = 3;  // re-init atoms unused this many epochs in a row
    SolverOptions solver;

    void validate() const {
        if (size < 1) throw ConfigError("learn config: size must be >= 1");
        if (size > size_cap) throw ConfigError("learn config: size exceeds the cap");
        if (!(alpha > 0.0)) throw ConfigError("learn config: alpha must be positive");
        if (batches < 1) throw ConfigError("learn config: batches must be >= 1");
        if (max_epochs < 1) throw ConfigError("learn config: max_epochs must be >= 1");
        if (!(rel_tol > 0.0)) throw ConfigError("learn config: rel_tol must be positive");
    }
};

/// Basis columns drawn i.i.d. uniform(-0.5, 0.5), mean-subtracted, then
/// scaled to unit norm. Deterministic given the seed.
inline Codebook init_codebook(int S, int n, std::uint64_t seed) {
    if (S < 1) throw ConfigError("init_codebook: S must be >= 1");
    if (n < 2) throw ConfigError("init_codebook: n must be >= 2");
    Rng rng(seed);
    Codebook cb;
    cb.basis.resize(n, S);
    cb.frame_length = n;
    cb.seed = seed;
    for (int j = 0; j < S; ++j) {
        for (;;) {
            for (int i = 0; i < n; ++i) cb.basis(i, j) = rng.uniform(-0.5, 0.5);
            cb.basis.col(j).array() -= cb.basis.col(j).mean();
            const double norm = cb.basis.col(j).norm();
            if (norm > 1e-12) {  // a constant draw would normalise to nothing; redraw
                cb.basis.col(j) /= norm;
                break;
            }
        }
    }
    return cb;
}

struct ReinitEvent {
    int epoch;
    int atom;
    long frame;  // frame whose normalised copy replaced the atom
};

struct LearnResult {
    Codebook codebook;
    bool converged = false;
    int epochs = 0;
    std::vector<ReinitEvent> reinits;
    std::vector<std::string> warnings;
};

/// Shuffles 0..K-1 and splits it into M near-equal batches: every index lands
/// in exactly one batch.
inline std::vector<std::vector<Eigen::Index>> partition_batches(Eigen::Index K, int M, Rng& rng) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(K));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<Eigen::Index>> batches;
    batches.reserve(static_cast<std::size_t>(M));
    for (int q = 0; q < M; ++q) {
        const Eigen::Index begin = (K * q) / M;
        const Eigen::Index end = (K * (q + 1)) / M;
        if (end > begin)
            batches.emplace_back(order.begin() + begin, order.begin() + end);
    }
    return batches;
}

namespace detail {

// Optimal activations for every column of `frames` under a fixed dictionary.
inline Matrix encode_all(const SparseEncoder& encoder, const Matrix& frames, unsigned threads) {
    Matrix A(encoder.dictionary().cols(), frames.cols());
    parallel_for(static_cast<std::size_t>(frames.cols()), threads, [&](std::size_t i) {
        A.col(static_cast<Eigen::Index>(i)) =
            encoder.encode(frames.col(static_cast<Eigen::Index>(i))).solution;
    });
    return A;
}

}  // namespace detail

/// Alternating minimisation over random batches. Records the full-data
/// objective after every epoch (index 0 holds the value at initialisation,
/// both with optimal activations for the basis of that moment). With a
/// single batch the trace is non-increasing.
inline LearnResult learn_codebook_full(const Matrix& frames, const LearnConfig& config) {
    config.validate();
    const Eigen::Index n = frames.rows();
    const Eigen::Index K = frames.cols();
    if (K < 1) throw ConfigError("learn_codebook: empty frame set");
    if (n < 2) throw ConfigError("learn_codebook: frames must have length >= 2");
    for (Eigen::Index i = 0; i < K; ++i) {
        if (!all_finite(Vector(frames.col(i))))
            throw ConfigError("learn_codebook: non-finite frame at index " + std::to_string(i));
    }

    LearnResult result;
    if (K < config.size)
        result.warnings.push_back("fewer frames than basis vectors; codebook may be degenerate");

    Codebook cb = init_codebook(config.size, static_cast<int>(n), config.seed);
    cb.alpha = config.alpha;
    const int S = config.size;
    const int M = std::min<int>(config.batches, static_cast<int>(K));

    std::vector<int> unused_streak(static_cast<std::size_t>(S), 0);

    // Full-data pass: optimal activations, objective, per-frame errors, usage.
    Vector frame_error(K);
    std::vector<char> used(static_cast<std::size_t>(S));
    auto full_pass = [&]() {
        SparseEncoder encoder(cb.basis, cb.alpha, config.solver);
        const Matrix A = detail::encode_all(encoder, frames, config.threads);
        std::fill(used.begin(), used.end(), 0);
        for (Eigen::Index j = 0; j < S; ++j)
            if (A.row(j).cwiseAbs().maxCoeff() > 0.0) used[static_cast<std::size_t>(j)] = 1;
        for (Eigen::Index i = 0; i < K; ++i)
            frame_error[i] = (frames.col(i) - cb.basis * A.col(i)).norm();
        return sparse_coding_objective(cb.basis, frames, A, cb.alpha);
    };

    cb.trace.push_back(full_pass());

    int epoch = 0;
    for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        for (const auto& batch_ids : partition_batches(K, M, epoch_rng)) {
            const Eigen::Index count = static_cast<Eigen::Index>(batch_ids.size());
            Matrix batch(n, count);
            for (Eigen::Index i = 0; i < count; ++i)
                batch.col(i) = frames.col(batch_ids[static_cast<std::size_t>(i)]);

            SparseEncoder encoder(cb.basis, cb.alpha, config.solver);
            Matrix acts(S, count);
            parallel_for(static_cast<std::size_t>(count), config.threads, [&](std::size_t i) {
                acts.col(static_cast<Eigen::Index>(i)) =
                    encoder.encode(batch.col(static_cast<Eigen::Index>(i))).solution;
            });

            cb.basis = update_basis(batch, acts, cb.basis).basis;
        }

        cb.trace.push_back(full_pass());

        const double prev = cb.trace[cb.trace.size() - 2];
        const double cur = cb.trace.back();
        if (prev - cur < config.rel_tol * std::max(prev, 1e-300)) {
            result.converged = true;
            break;
        }

        // Dead-atom policy: an atom unused for `dead_atom_epochs` consecutive
        // epochs is re-seeded with the currently worst-reconstructed frame.
        // Replacing an atom with all-zero activations cannot raise the
        // objective, so the recorded trace stays monotone for M = 1.
        std::vector<Eigen::Index> worst(static_cast<std::size_t>(K));
        std::iota(worst.begin(), worst.end(), 0);
        std::sort(worst.begin(), worst.end(),
                  [&](Eigen::Index a, Eigen::Index b) { return frame_error[a] > frame_error[b]; });
        std::size_t next_worst = 0;
        for (int j = 0; j < S; ++j) {
            if (used[static_cast<std::size_t>(j)]) {
                unused_streak[static_cast<std::size_t>(j)] = 0;
                continue;
            }
            if (++unused_streak[static_cast<std::size_t>(j)] < config.dead_atom_epochs) continue;
            while (next_worst < worst.size() &&
                   frames.col(worst[next_worst]).norm() <= 1e-12)
                ++next_worst;
            if (next_worst >= worst.size()) break;
            const Eigen::Index pick = worst[next_worst++];
            cb.basis.col(j) = frames.col(pick) / frames.col(pick).norm();
            unused_streak[static_cast<std::size_t>(j)] = 0;
            result.reinits.push_back({epoch, j, static_cast<long>(pick)});
        }
    }

    result.epochs = std::min(epoch, config.max_epochs);
    result.codebook = std::move(cb);
    return result;
}

inline Codebook learn_codebook(const Matrix& frames, const LearnConfig& config) {
    return learn_codebook_full(frames, config).codebook;
}

struct Histogram {
    double lo = 0.0, hi = 0.0;
    std::vector<long> counts;
};

inline Histogram make_histogram(const Vector& values, int bins) {
    if (bins < 1) throw ConfigError("histogram: bins must be >= 1");
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    if (values.size() == 0) return h;
    h.lo = values.minCoeff();
    h.hi = values.maxCoeff();
    const double width = (h.hi - h.lo) / bins;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        int idx = width > 0.0 ? static_cast<int>((values[i] - h.lo) / width) : 0;
        if (idx >= bins) idx = bins - 1;
        if (idx < 0) idx = 0;
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    return h;
}

struct ReconstructionStats {
    Vector per_frame_rmse;              // ||x - Ba|| / sqrt(n)
    double mean_rmse = 0.0;
    std::vector<int> activation_counts;  // nonzeros per frame
    Histogram rmse_histogram;
};

/// Per-frame reconstruction diagnostics under the codebook's own alpha.
inline ReconstructionStats reconstruction_stats(const Codebook& cb, const Matrix& frames,
                                                int histogram_bins = 20, unsigned threads = 0) {
    if (frames.rows() != cb.basis.rows())
        throw ConfigError("reconstruction_stats: frame length does not match codebook");
    const Eigen::Index K = frames.cols();
    if (K < 1) throw ConfigError("reconstruction_stats: empty frame set");

    ReconstructionStats stats;
    stats.per_frame_rmse.resize(K);
    stats.activation_counts.assign(static_cast<std::size_t>(K), 0);

    SparseEncoder encoder(cb.basis, cb.alpha);
    const double root_n = std::sqrt(static_cast<double>(frames.rows()));
    parallel_for(static_cast<std::size_t>(K), threads, [&](std::size_t i) {
        const Eigen::Index col = static_cast<Eigen::Index>(i);
        const auto report = encoder.encode(frames.col(col));
        stats.per_frame_rmse[col] = (frames.col(col) - cb.basis * report.solution).norm() / root_n;
        int nz = 0;
        for (Eigen::Index j = 0; j < report.solution.size(); ++j)
            if (report.solution[j] != 0.0) ++nz;
        stats.activation_counts[i] = nz;
    });
    stats.mean_rmse = stats.per_frame_rmse.mean();
    stats.rmse_histogram = make_histogram(stats.per_frame_rmse, histogram_bins);
    return stats;
}

struct SizeSearchResult {
    int best_size = 0;
    std::vector<std::pair<int, double>> error_table;  // (size, mean RMSE) in evaluation order
};

/// Greedy midpoint search over codebook sizes. Evaluates the ladder in
/// ascending order; when the error at the cap fails to improve on the
/// previous rung, probes midpoints between the best size so far and the last
/// size tried, stopping as soon as a probe is the overall minimiser or the
/// interval closes. `evaluate` maps a size to its mean reconstruction error.
inline SizeSearchResult search_codebook_size(const std::vector<int>& ladder, int cap,
                                             const std::function<double(int)>& evaluate) {
    if (ladder.empty()) throw ConfigError("size search: empty ladder");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (ladder[i] < 1 || ladder[i] > cap)
            throw ConfigError("size search: ladder entry outside [1, cap]");
        if (i > 0 && ladder[i] <= ladder[i - 1])
            throw ConfigError("size search: ladder must be strictly ascending");
    }

    SizeSearchResult result;
    auto probe = [&](int size) {
        const double err = evaluate(size);
        result.error_table.emplace_back(size, err);
        return err;
    };
    auto best_entry = [&]() {
        std::size_t best = 0;
        for (std::size_t i = 1; i < result.error_table.size(); ++i) {
            if (result.error_table[i].second < result.error_table[best].second ||
                (result.error_table[i].second == result.error_table[best].second &&
                 result.error_table[i].first < result.error_table[best].first))
                best = i;
        }
        return result.error_table[best];
    };

    for (int size : ladder) probe(size);

    if (ladder.size() >= 2) {
        double last_err = result.error_table.back().second;
        double prev_err = result.error_table[result.error_table.size() - 2].second;
        if (last_err >= prev_err) {
            int lo = best_entry().first;
            int hi = ladder.back();
            while (hi - lo > 1) {
                const int mid = lo + (hi - lo) / 2;
                bool seen = false;
                for (const auto& [s, e] : result.error_table)
                    if (s == mid) seen = true;
                if (seen) break;
                probe(mid);
                if (best_entry().first == mid) break;  // the probe is the minimiser
                hi = mid;
                lo = best_entry().first;
                if (lo >= hi) break;
            }
        }
    }

    result.best_size = best_entry().first;
    return result;
}

/// Production wrapper: learns a codebook per candidate size on `frames` and
/// scores it by mean reconstruction RMSE on the same frames.
inline SizeSearchResult search_codebook_size(const Matrix& frames, const LearnConfig& base,
                                             const std::vector<int>& ladder = {64, 128, 256, 384,
                                                                               512},
                                             int cap = 512) {
    return search_codebook_size(ladder, cap, [&](int size) {
        LearnConfig config = base;
        config.size = size;
        config.size_cap = std::max(base.size_cap, cap);
        const Codebook cb = learn_codebook(frames, config);
        return reconstruction_stats(cb, frames, 20, base.threads).mean_rmse;
    });
}

}  // namespace scar
