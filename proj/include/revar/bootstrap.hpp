#pragma once

#include <cstddef>
#include <vector>

#include "revar/error.hpp"
#include "revar/random.hpp"

namespace revar {

/// Stationary bootstrap (Politis-Romano): blocks start at uniform positions,
/// wrap around the sample and have geometric length with the given mean.
inline std::vector<std::size_t> stationary_bootstrap_indices(std::size_t n, double mean_block, Rng& rng) {
    if (n == 0) throw Error(ErrorKind::InsufficientData, "cannot resample an empty series");
    if (!(mean_block >= 1.0)) throw Error(ErrorKind::Config, "mean block length must be at least 1");
    const double restart = 1.0 / mean_block;
    std::vector<std::size_t> idx(n);
    idx[0] = static_cast<std::size_t>(rng.below(n));
    for (std::size_t t = 1; t < n; ++t)
        idx[t] = rng.uniform() < restart ? static_cast<std::size_t>(rng.below(n)) : (idx[t - 1] + 1) % n;
    return idx;
}

/// I.i.d. (pairs) resample of n indices.
inline std::vector<std::size_t> iid_bootstrap_indices(std::size_t n, Rng& rng) {
    if (n == 0) throw Error(ErrorKind::InsufficientData, "cannot resample an empty series");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    return idx;
}

}  // namespace revar
