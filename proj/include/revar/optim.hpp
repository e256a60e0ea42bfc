#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace revar {

struct SimplexOptions {
    std::size_t max_evals = 20000;
    double f_tol = 1e-9;
    double x_tol = 1e-8;
    /// Initial simplex edge per coordinate.
    double initial_step = 0.1;
    /// Re-seed the simplex around the best point after convergence.
    std::size_t max_restarts = 3;
};

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    bool converged = false;
};

/// Derivative-free Nelder-Mead minimisation with dimension-adaptive
/// coefficients. Non-finite objective values count as +infinity.
inline SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                                 std::vector<double> start, const SimplexOptions& opt = {}) {
    const std::size_t n = start.size();
    const double dn = static_cast<double>(n);
    const double reflect = 1.0;
    const double expand = 1.0 + 2.0 / dn;
    const double contract = 0.75 - 1.0 / (2.0 * dn);
    const double shrink = 1.0 - 1.0 / dn;

    SimplexResult result;
    auto eval = [&](const std::vector<double>& x) {
        ++result.evals;
        const double v = objective(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> simplex(n + 1);
    std::vector<double> values(n + 1);
    std::vector<double> best = start;
    double best_value = eval(start);

    for (std::size_t restart = 0; restart <= opt.max_restarts; ++restart) {
        const double before = best_value;
        simplex[0] = best;
        values[0] = best_value;
        for (std::size_t i = 0; i < n; ++i) {
            simplex[i + 1] = best;
            simplex[i + 1][i] += opt.initial_step * (std::abs(best[i]) > 1.0 ? std::abs(best[i]) : 1.0);
            values[i + 1] = eval(simplex[i + 1]);
        }
        std::vector<std::size_t> order(n + 1);
        std::vector<double> centroid(n), trial(n), trial2(n);
        bool converged = false;
        while (result.evals < opt.max_evals) {
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
            const auto lo = order.front(), hi = order.back(), second = order[n - 1];

            double diameter = 0.0;
            for (std::size_t i = 0; i <= n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    diameter = std::max(diameter, std::abs(simplex[i][j] - simplex[lo][j]));
            if (std::isfinite(values[hi]) && values[hi] - values[lo] <= opt.f_tol * (1.0 + std::abs(values[lo])) &&
                diameter <= opt.x_tol) {
                converged = true;
                break;
            }

            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (std::size_t i = 0; i <= n; ++i)
                if (i != hi)
                    for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / dn;

            for (std::size_t j = 0; j < n; ++j) trial[j] = centroid[j] + reflect * (centroid[j] - simplex[hi][j]);
            const double f_reflect = eval(trial);
            if (f_reflect < values[lo]) {
                for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + expand * (trial[j] - centroid[j]);
                const double f_expand = eval(trial2);
                if (f_expand < f_reflect) {
                    simplex[hi] = trial2;
                    values[hi] = f_expand;
                } else {
                    simplex[hi] = trial;
                    values[hi] = f_reflect;
                }
                continue;
            }
            if (f_reflect < values[second]) {
                simplex[hi] = trial;
                values[hi] = f_reflect;
                continue;
            }
            const bool outside = f_reflect < values[hi];
            for (std::size_t j = 0; j < n; ++j)
                trial2[j] = outside ? centroid[j] + contract * (trial[j] - centroid[j])
                                    : centroid[j] - contract * (centroid[j] - simplex[hi][j]);
            const double f_contract = eval(trial2);
            if (f_contract < (outside ? f_reflect : values[hi])) {
                simplex[hi] = trial2;
                values[hi] = f_contract;
                continue;
            }
            for (std::size_t i = 0; i <= n; ++i) {
                if (i == lo) continue;
                for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[lo][j] + shrink * (simplex[i][j] - simplex[lo][j]);
                values[i] = eval(simplex[i]);
            }
        }
        const auto lo = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
        if (values[lo] < best_value) {
            best_value = values[lo];
            best = simplex[lo];
        }
        result.converged = converged;
        if (!converged || result.evals >= opt.max_evals) break;
        if (before - best_value <= opt.f_tol * (1.0 + std::abs(best_value))) break;
    }
    result.x = std::move(best);
    result.value = best_value;
    return result;
}

}  // namespace revar
