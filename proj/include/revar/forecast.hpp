#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "revar/distributions.hpp"
#include "revar/error.hpp"
#include "revar/market_data.hpp"
#include "revar/mcmc.hpp"
#include "revar/model.hpp"
#include "revar/parallel.hpp"
#include "revar/random.hpp"
#include "revar/realized_measures.hpp"

namespace revar {

/// One tail-risk forecast. VaR and ES are return-side (negative) numbers at
/// lower-tail probability alpha.
struct ForecastRecord {
    Date date;
    double alpha = 0.0;
    double var = 0.0;
    double es = 0.0;
    double ret = 0.0;
    std::string model;
};

struct VarEs {
    double var = 0.0;
    double es = 0.0;
};

/// VaR and ES given the next-day log variance.
inline VarEs var_es_from_log_variance(const ModelParams& p, double log_h_next, double alpha) {
    const double scale = std::exp(0.5 * log_h_next);
    return {p.mu + scale * quantile(p.dist, alpha), p.mu + scale * tail_expectation(p.dist, alpha)};
}

/// h_{t+1} from the filter state at t, then VaR = mu + sqrt(h) q, ES = mu + sqrt(h) E[eps | eps < q].
inline VarEs one_step_var_es(const ModelParams& p, const FilterState& state, double alpha) {
    return var_es_from_log_variance(p, next_log_variance(p, state), alpha);
}

/// Return-side probabilities 1 - u_j of the loss-side grid
/// u_j = u_1 + (j - 1)(1 - u_1)/p with u_1 = 1 - alpha.
inline std::vector<double> mqr_return_levels(double alpha, std::size_t p) {
    if (p < 2) throw Error(ErrorKind::Config, "the quantile grid needs p >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Domain, "alpha must lie in (0, 1)");
    // 1 - u_j = alpha (1 - j/p), written so the first level is exactly alpha.
    std::vector<double> levels;
    for (std::size_t j = 0; j < p; ++j)
        levels.push_back(alpha * (1.0 - static_cast<double>(j) / static_cast<double>(p)));
    return levels;
}

struct PosteriorForecast {
    std::vector<double> alphas;
    std::vector<double> var;
    std::vector<double> es;
    std::size_t draws_used = 0;
    std::size_t diverged = 0;
};

/// Evenly spaced draw indices, all of them when max_draws is 0.
inline std::vector<std::size_t> thin_indices(std::size_t n, std::size_t max_draws) {
    std::vector<std::size_t> idx;
    if (max_draws == 0 || max_draws >= n) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < max_draws; ++i) idx.push_back(i * n / max_draws);
    return idx;
}

/// Posterior-mean VaR/ES for the day after the window: each draw filters the
/// window, the per-draw forecasts are averaged. More than 1% diverging draws
/// is an error.
inline PosteriorForecast posterior_forecast(const Chain& chain, const ModelData& window, const std::vector<double>& alphas,
                                            std::size_t threads = 1, std::size_t max_draws = 0) {
    if (chain.size() == 0) throw Error(ErrorKind::InsufficientData, "empty chain");
    if (alphas.empty()) throw Error(ErrorKind::Config, "no alpha levels requested");
    const auto draws = thin_indices(chain.size(), max_draws);
    const std::size_t A = alphas.size();
    std::vector<double> var(draws.size() * A), es(draws.size() * A);
    std::vector<char> ok(draws.size(), 0);
    parallel_for(draws.size(), threads, [&](std::size_t i) {
        const auto p = chain.params(draws[i]);
        const auto state = filter_final_state(p, window);
        if (!state) return;
        const double log_h = next_log_variance(p, *state);
        if (!std::isfinite(log_h) || std::abs(log_h) > 700.0) return;
        for (std::size_t a = 0; a < A; ++a) {
            const auto f = var_es_from_log_variance(p, log_h, alphas[a]);
            if (!std::isfinite(f.var) || !std::isfinite(f.es)) return;
            var[i * A + a] = f.var;
            es[i * A + a] = f.es;
        }
        ok[i] = 1;
    });

    PosteriorForecast out;
    out.alphas = alphas;
    out.var.assign(A, 0.0);
    out.es.assign(A, 0.0);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        if (!ok[i]) {
            ++out.diverged;
            continue;
        }
        ++out.draws_used;
        for (std::size_t a = 0; a < A; ++a) {
            out.var[a] += var[i * A + a];
            out.es[a] += es[i * A + a];
        }
    }
    if (static_cast<double>(out.diverged) > 0.01 * static_cast<double>(draws.size()) || out.draws_used == 0)
        throw Error(ErrorKind::ForecastQuality, std::to_string(out.diverged) + " of " + std::to_string(draws.size()) +
                                                    " draws diverged while filtering");
    for (std::size_t a = 0; a < A; ++a) {
        out.var[a] /= static_cast<double>(out.draws_used);
        out.es[a] /= static_cast<double>(out.draws_used);
    }
    return out;
}

/// Single-alpha convenience overload.
inline ForecastRecord posterior_forecast(const Chain& chain, const ModelData& window, double alpha) {
    const auto f = posterior_forecast(chain, window, std::vector<double>{alpha});
    ForecastRecord r;
    r.alpha = alpha;
    r.var = f.var[0];
    r.es = f.es[0];
    return r;
}

/// A model to forecast with: error distribution plus the panel columns it uses.
struct ModelSpec {
    std::string id;
    DistKind dist = DistKind::SkewT;
    std::vector<std::size_t> columns;
    std::optional<ModelParams> init;
};

enum class FailurePolicy { Gap, Abort };

struct RollingConfig {
    std::size_t in_sample = 0;
    std::size_t forecasts = 1000;
    std::size_t stride = 1;
    std::vector<double> alphas{0.025, 0.01};
    /// Also emit the VaR grid consumed by the multi-quantile ES backtest.
    bool emit_mqr_grid = true;
    std::size_t mqr_p = 6;
    McmcConfig mcmc;
    /// Posterior draws used per forecast (0 = all).
    std::size_t max_draws = 0;
    FailurePolicy on_failure = FailurePolicy::Gap;
    std::size_t threads = 1;

    void validate(std::size_t data_length) const {
        if (stride == 0) throw Error(ErrorKind::Config, "stride must be at least 1");
        if (forecasts == 0) throw Error(ErrorKind::Config, "need at least one forecast");
        if (in_sample < 2) throw Error(ErrorKind::Config, "in-sample size must be at least 2");
        if (in_sample + forecasts > data_length)
            throw Error(ErrorKind::InsufficientData, "data length " + std::to_string(data_length) +
                                                         " is shorter than in-sample + forecasts");
        for (double a : alphas)
            if (!(a > 0.0 && a < 0.5)) throw Error(ErrorKind::Config, "alpha levels must lie in (0, 0.5)");
    }

    /// Requested alphas followed by any grid levels not already present.
    std::vector<double> all_levels() const {
        std::vector<double> levels = alphas;
        if (emit_mqr_grid)
            for (double a : alphas)
                for (double g : mqr_return_levels(a, mqr_p))
                    if (std::find(levels.begin(), levels.end(), g) == levels.end()) levels.push_back(g);
        return levels;
    }
};

struct RollingResult {
    std::string model;
    std::vector<ForecastRecord> records;
    /// Forecast indices skipped because the refit covering them failed.
    std::vector<std::size_t> gaps;
    std::vector<std::string> failures;
    std::size_t refits = 0;
};

/// Rolling one-step-ahead forecasts: forecast s uses the window
/// [s, s + in_sample) and targets day in_sample + s. The model is re-estimated
/// every `stride` forecasts; in between, the latest chain is re-filtered on the
/// current window.
inline RollingResult rolling_forecast(const ModelData& data, const ModelSpec& spec, const RollingConfig& cfg,
                                      std::uint64_t seed) {
    cfg.validate(data.size());
    const auto levels = cfg.all_levels();
    const ModelParams init = spec.init ? *spec.init : default_initial_params(data.measure_count(), spec.dist);
    if (init.measures.size() != data.measure_count() || kind_of(init.dist) != spec.dist)
        throw Error(ErrorKind::Layout, "initial parameters do not match model " + spec.id);

    RollingResult out;
    out.model = spec.id;
    std::optional<Chain> chain;
    for (std::size_t s = 0; s < cfg.forecasts; ++s) {
        const auto window = data.window(s, cfg.in_sample);
        if (s % cfg.stride == 0) {
            McmcConfig mc = cfg.mcmc;
            mc.seed = derive_seed(seed, s);
            mc.chains = 1;
            try {
                auto post = estimate(window, init, mc);
                chain = std::move(post.chains.front());
                ++out.refits;
            } catch (const Error& e) {
                if (cfg.on_failure == FailurePolicy::Abort) throw;
                chain.reset();
                out.failures.push_back("refit at forecast " + std::to_string(s) + ": " + e.what());
            }
        }
        if (!chain) {
            out.gaps.push_back(s);
            continue;
        }
        PosteriorForecast f;
        try {
            f = posterior_forecast(*chain, window, levels, cfg.threads, cfg.max_draws);
        } catch (const Error& e) {
            if (cfg.on_failure == FailurePolicy::Abort || e.kind() != ErrorKind::ForecastQuality) throw;
            out.gaps.push_back(s);
            out.failures.push_back("forecast " + std::to_string(s) + ": " + e.what());
            continue;
        }
        const std::size_t target = cfg.in_sample + s;
        for (std::size_t a = 0; a < levels.size(); ++a)
            out.records.push_back({data.dates[target], levels[a], f.var[a], f.es[a], data.returns[target], spec.id});
    }
    return out;
}

/// Rolling forecasts for several models, each aligned on its own measure
/// subset. Models run in parallel; each seed is derived from the model id, so
/// the order of `models` does not matter.
inline std::vector<RollingResult> rolling_forecast(const ReturnSeries& returns, const RealizedPanel& panel,
                                                   const std::vector<ModelSpec>& models, const RollingConfig& cfg,
                                                   std::uint64_t seed) {
    std::vector<RollingResult> results(models.size());
    RollingConfig inner = cfg;
    inner.threads = 1;
    parallel_for(models.size(), cfg.threads, [&](std::size_t i) {
        const auto data = align(returns, panel, models[i].columns);
        results[i] = rolling_forecast(data, models[i], inner, derive_seed(seed, models[i].id));
    });
    return results;
}

/// Records for one model and alpha, in date order of appearance.
inline std::vector<ForecastRecord> select(const std::vector<ForecastRecord>& records, const std::string& model,
                                          double alpha) {
    std::vector<ForecastRecord> out;
    for (const auto& r : records)
        if (r.model == model && r.alpha == alpha) out.push_back(r);
    return out;
}

}  // namespace revar
