#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revar/error.hpp"

namespace revar {

constexpr double kRhatThreshold = 1.1;

struct RhatResult {
    double value = std::numeric_limits<double>::quiet_NaN();
    /// Zero within-chain variance.
    bool degenerate = false;
    bool exceeds_threshold() const noexcept { return !degenerate && value > kRhatThreshold; }
};

struct EssResult {
    double n_eff = 0.0;
    /// Integrated autocorrelation time; act * n_eff == m * n.
    double act = 1.0;
    bool degenerate = false;
};

namespace detail {

struct ChainMoments {
    std::size_t m = 0;
    std::size_t n = 0;
    std::vector<double> means;
    std::vector<double> variances;
    double within = 0.0;
    double between_over_n = 0.0;
};

inline ChainMoments chain_moments(std::span<const std::span<const double>> chains, std::size_t min_m, std::size_t min_n) {
    ChainMoments cm;
    cm.m = chains.size();
    if (cm.m < min_m) throw Error(ErrorKind::InsufficientData, "need at least " + std::to_string(min_m) + " chains");
    cm.n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != cm.n) throw Error(ErrorKind::InsufficientData, "chains differ in length");
    if (cm.n < min_n) throw Error(ErrorKind::InsufficientData, "need at least " + std::to_string(min_n) + " draws per chain");
    const double dn = static_cast<double>(cm.n);
    for (const auto& c : chains) {
        double mean = 0.0;
        for (double v : c) mean += v;
        mean /= dn;
        double ss = 0.0;
        for (double v : c) ss += (v - mean) * (v - mean);
        cm.means.push_back(mean);
        cm.variances.push_back(ss / (dn - 1.0));
    }
    for (double v : cm.variances) cm.within += v;
    cm.within /= static_cast<double>(cm.m);
    if (cm.m > 1) {
        double grand = 0.0;
        for (double v : cm.means) grand += v;
        grand /= static_cast<double>(cm.m);
        double ss = 0.0;
        for (double v : cm.means) ss += (v - grand) * (v - grand);
        cm.between_over_n = ss / static_cast<double>(cm.m - 1);
    }
    return cm;
}

}  // namespace detail

/// Classic (non-split) potential scale reduction:
/// sqrt(((n-1)/n W + B/n) / W).
inline RhatResult gelman_rubin(std::span<const std::span<const double>> chains) {
    const auto cm = detail::chain_moments(chains, 2, 10);
    RhatResult r;
    if (!(cm.within > 0.0)) {
        r.degenerate = true;
        return r;
    }
    const double dn = static_cast<double>(cm.n);
    r.value = std::sqrt(((dn - 1.0) / dn * cm.within + cm.between_over_n) / cm.within);
    return r;
}

/// Multi-chain effective sample size with Geyer's initial positive sequence.
inline EssResult effective_sample_size(std::span<const std::span<const double>> chains) {
    const auto cm = detail::chain_moments(chains, 1, 50);
    EssResult out;
    const double total = static_cast<double>(cm.m * cm.n);
    if (!(cm.within > 0.0)) {
        out.degenerate = true;
        out.n_eff = 0.0;
        out.act = std::numeric_limits<double>::infinity();
        return out;
    }
    const double dn = static_cast<double>(cm.n);
    const double var_plus = (dn - 1.0) / dn * cm.within + cm.between_over_n;

    auto mean_autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t j = 0; j < cm.m; ++j) {
            const auto& c = chains[j];
            const double mu = cm.means[j];
            double acc = 0.0;
            for (std::size_t t = lag; t < cm.n; ++t) acc += (c[t] - mu) * (c[t - lag] - mu);
            s += acc / dn;
        }
        return s / static_cast<double>(cm.m);
    };
    auto rho = [&](std::size_t lag) { return lag == 0 ? 1.0 : 1.0 - (cm.within - mean_autocov(lag)) / var_plus; };

    double tau = -1.0;
    for (std::size_t k = 0; 2 * k + 1 < cm.n; ++k) {
        const double pair = rho(2 * k) + rho(2 * k + 1);
        if (!(pair > 0.0)) break;
        tau += 2.0 * pair;
    }
    out.act = std::max(tau, 1.0);
    out.n_eff = total / out.act;
    return out;
}

/// Autocorrelation time of a single chain.
inline double autocorrelation_time(std::span<const double> chain) {
    const std::span<const double> one[] = {chain};
    return effective_sample_size(one).act;
}

struct ParamDiagnostics {
    std::string name;
    std::optional<double> rhat;
    double n_eff = 0.0;
    double act = 1.0;
    bool degenerate = false;
};

struct DiagnosticsReport {
    std::vector<ParamDiagnostics> params;

    bool all_rhat_below(double threshold) const {
        return std::all_of(params.begin(), params.end(),
                           [&](const auto& p) { return p.rhat && !p.degenerate && *p.rhat < threshold; });
    }
};

}  // namespace revar
