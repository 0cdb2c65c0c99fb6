#pragma once

// Shared synthetic fixtures for codebook and pipeline tests.

#include <vector>

#include "scar/rng.hpp"
#include "scar/types.hpp"

namespace fixtures {

// Unit-norm dictionary with bounded pairwise coherence so that recovery
// experiments are well-posed.
inline scar::Matrix planted_dictionary(Eigen::Index n, Eigen::Index S, scar::Rng& rng,
                                       double max_coherence = 0.7) {
    scar::Matrix D(n, S);
    for (Eigen::Index j = 0; j < S; ++j) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            scar::Vector v(n);
            for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
            v /= v.norm();
            bool ok = true;
            for (Eigen::Index k = 0; k < j && ok; ++k)
                if (std::abs(v.dot(D.col(k))) > max_coherence) ok = false;
            if (ok || attempt == 999) {
                D.col(j) = v;
                break;
            }
        }
    }
    return D;
}

// Frames built as sparse combinations of planted atoms plus Gaussian noise.
// Each frame uses 1..max_atoms distinct atoms with coefficients of magnitude
// in [0.9, 1.8] and random sign.
inline scar::Matrix sparse_frames(const scar::Matrix& dictionary, Eigen::Index count,
                                  int max_atoms, double noise_sigma, scar::Rng& rng) {
    const Eigen::Index n = dictionary.rows();
    const Eigen::Index S = dictionary.cols();
    scar::Matrix X(n, count);
    for (Eigen::Index i = 0; i < count; ++i) {
        scar::Vector x = scar::Vector::Zero(n);
        const int atoms = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_atoms)));
        auto picks = rng.sample_without_replacement(static_cast<std::size_t>(S),
                                                    static_cast<std::size_t>(atoms));
        for (std::size_t p : picks) {
            const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
            x += sign * rng.uniform(0.9, 1.8) * dictionary.col(static_cast<Eigen::Index>(p));
        }
        for (Eigen::Index r = 0; r < n; ++r) x[r] += noise_sigma * rng.normal();
        X.col(i) = x;
    }
    return X;
}

}  // namespace fixtures
