#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revar/distributions.hpp"
#include "revar/error.hpp"
#include "revar/market_data.hpp"
#include "revar/random.hpp"
#include "revar/realized_measures.hpp"

namespace revar {

/// Measurement-equation parameters of one realized measure:
/// log x_t = xi + phi log h_t + delta1 eps_t + delta2 (eps_t^2 - 1) + u_t, u_t ~ N(0, sigma2_u).
struct MeasureParams {
    double xi = 0.0;
    double phi = 0.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double sigma2_u = 1.0;

    friend bool operator==(const MeasureParams&, const MeasureParams&) = default;
};

/// Realized EGARCH parameters for K measures:
///   r_t      = mu + sqrt(h_t) eps_t
///   log h_t  = omega + beta log h_{t-1} + tau1 eps_{t-1} + tau2 (eps_{t-1}^2 - 1) + gamma' u_{t-1}
/// plus one measurement equation per measure.
struct ModelParams {
    double mu = 0.0;
    double omega = 0.0;
    double beta = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    std::vector<double> gamma;
    std::vector<MeasureParams> measures;
    ErrorDist dist = Normal{};

    std::size_t measure_count() const noexcept { return measures.size(); }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline double leverage(double c1, double c2, double eps) { return c1 * eps + c2 * (eps * eps - 1.0); }

/// beta - gamma' phi < 1 (strict).
inline bool stationarity_ok(const ModelParams& p) {
    double s = p.beta;
    for (std::size_t k = 0; k < p.gamma.size() && k < p.measures.size(); ++k) s -= p.gamma[k] * p.measures[k].phi;
    return s < 1.0;
}

constexpr double kNuLower = 4.0;
constexpr double kNuUpper = 200.0;

/// Membership in the admissible region: positive measurement variances,
/// nu in (4, 200), lambda in (-1, 1) and the stationarity restriction.
inline bool admissible(const ModelParams& p) {
    if (p.gamma.size() != p.measures.size() || p.measures.empty()) return false;
    for (const auto& m : p.measures)
        if (!(m.sigma2_u > 0.0) || !std::isfinite(m.sigma2_u)) return false;
    const bool shape_ok = std::visit(
        [](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) return true;
            else if constexpr (std::is_same_v<D, StudentT>) return d.nu > kNuLower && d.nu < kNuUpper;
            else return d.nu > kNuLower && d.nu < kNuUpper && d.lambda > -1.0 && d.lambda < 1.0;
        },
        p.dist);
    return shape_ok && stationarity_ok(p);
}

/// Returns and log realized measures aligned on common dates, plus the
/// initial log conditional variance used by the filter.
struct ModelData {
    std::vector<Date> dates;
    std::vector<double> returns;
    std::vector<std::vector<double>> log_measures;
    double log_h0 = 0.0;

    std::size_t size() const noexcept { return returns.size(); }
    std::size_t measure_count() const noexcept { return log_measures.size(); }

    /// Contiguous sub-window [begin, begin + length) with its own log h0.
    ModelData window(std::size_t begin, std::size_t length, std::optional<double> log_h0_override = {}) const;
};

/// Log of the sample variance (1/n, mean removed).
inline double log_sample_variance(std::span<const double> r) {
    if (r.size() < 2) throw Error(ErrorKind::InsufficientData, "need at least 2 returns for the sample variance");
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double v : r) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(r.size());
    if (!(var > 0.0)) throw Error(ErrorKind::Domain, "returns have zero sample variance");
    return std::log(var);
}

inline ModelData ModelData::window(std::size_t begin, std::size_t length, std::optional<double> override) const {
    if (begin + length > size()) throw Error(ErrorKind::InsufficientData, "window exceeds data length");
    ModelData w;
    w.dates.assign(dates.begin() + begin, dates.begin() + begin + length);
    w.returns.assign(returns.begin() + begin, returns.begin() + begin + length);
    for (const auto& m : log_measures) w.log_measures.emplace_back(m.begin() + begin, m.begin() + begin + length);
    w.log_h0 = override ? *override : log_sample_variance(w.returns);
    return w;
}

/// Intersects return and panel dates and takes logs of the selected columns
/// (all columns when `columns` is empty).
inline ModelData align(const ReturnSeries& r, const RealizedPanel& panel, std::vector<std::size_t> columns = {},
                       std::optional<double> log_h0 = {}) {
    if (columns.empty())
        for (std::size_t c = 0; c < panel.measures(); ++c) columns.push_back(c);
    if (columns.empty() || columns.size() > 3) throw Error(ErrorKind::Config, "model uses 1 to 3 realized measures");
    for (auto c : columns)
        if (c >= panel.measures()) throw Error(ErrorKind::Config, "measure column out of range");
    ModelData d;
    d.log_measures.resize(columns.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        while (j < panel.days() && panel.dates[j] < r.dates[i]) ++j;
        if (j == panel.days()) break;
        if (panel.dates[j] != r.dates[i]) continue;
        d.dates.push_back(r.dates[i]);
        d.returns.push_back(r.values[i]);
        for (std::size_t c = 0; c < columns.size(); ++c) d.log_measures[c].push_back(std::log(panel.columns[columns[c]][j]));
    }
    if (d.returns.size() < 2) throw Error(ErrorKind::Alignment, "returns and measures share fewer than 2 dates");
    d.log_h0 = log_h0 ? *log_h0 : log_sample_variance(d.returns);
    return d;
}

struct FilterOutput {
    std::vector<double> log_h;
    std::vector<double> eps;
    /// u[k][t]
    std::vector<std::vector<double>> u;
};

/// Conditional state after observing day t, enough to step the variance forward.
struct FilterState {
    double log_h = 0.0;
    double eps = 0.0;
    std::vector<double> u;
};

/// log h_{t+1} = omega + beta log h_t + tau(eps_t) + gamma' u_t.
inline double next_log_variance(const ModelParams& p, const FilterState& s) {
    double v = p.omega + p.beta * s.log_h + leverage(p.tau1, p.tau2, s.eps);
    for (std::size_t k = 0; k < p.gamma.size(); ++k) v += p.gamma[k] * s.u[k];
    return v;
}

namespace detail {

inline void check_shapes(const ModelParams& p, const ModelData& data) {
    if (p.gamma.size() != p.measures.size()) throw Error(ErrorKind::Layout, "gamma and measure counts differ");
    if (p.measures.size() != data.measure_count())
        throw Error(ErrorKind::Layout, "parameter K does not match the number of measures");
    for (const auto& m : data.log_measures)
        if (m.size() != data.returns.size()) throw Error(ErrorKind::Alignment, "measure and return lengths differ");
}

}  // namespace detail

/// Runs the return, measurement and GARCH recursions; the first day uses log h_1 = data.log_h0.
inline FilterOutput filter(const ModelParams& p, const ModelData& data) {
    detail::check_shapes(p, data);
    const std::size_t n = data.size();
    const std::size_t K = p.measures.size();
    FilterOutput out;
    out.log_h.resize(n);
    out.eps.resize(n);
    out.u.assign(K, std::vector<double>(n));
    double log_h = data.log_h0;
    for (std::size_t t = 0; t < n; ++t) {
        const double h_sqrt = std::exp(0.5 * log_h);
        if (!std::isfinite(log_h) || !(h_sqrt > 0.0) || !std::isfinite(h_sqrt)) throw FilterDivergence(t);
        const double eps = (data.returns[t] - p.mu) / h_sqrt;
        out.log_h[t] = log_h;
        out.eps[t] = eps;
        double next = p.omega + p.beta * log_h + leverage(p.tau1, p.tau2, eps);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& m = p.measures[k];
            const double u = data.log_measures[k][t] - m.xi - m.phi * log_h - leverage(m.delta1, m.delta2, eps);
            out.u[k][t] = u;
            next += p.gamma[k] * u;
        }
        log_h = next;
    }
    return out;
}

inline FilterState last_state(const FilterOutput& f) {
    if (f.eps.empty()) throw Error(ErrorKind::InsufficientData, "empty filter output");
    FilterState s{f.log_h.back(), f.eps.back(), {}};
    for (const auto& uk : f.u) s.u.push_back(uk.back());
    return s;
}

/// Filter state at the end of the sample without storing the path; nullopt on divergence.
inline std::optional<FilterState> filter_final_state(const ModelParams& p, const ModelData& data) {
    detail::check_shapes(p, data);
    const std::size_t K = p.measures.size();
    FilterState s{data.log_h0, 0.0, std::vector<double>(K, 0.0)};
    double log_h = data.log_h0;
    for (std::size_t t = 0; t < data.size(); ++t) {
        const double h_sqrt = std::exp(0.5 * log_h);
        if (!std::isfinite(log_h) || !(h_sqrt > 0.0) || !std::isfinite(h_sqrt)) return std::nullopt;
        const double eps = (data.returns[t] - p.mu) / h_sqrt;
        double next = p.omega + p.beta * log_h + leverage(p.tau1, p.tau2, eps);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& m = p.measures[k];
            const double u = data.log_measures[k][t] - m.xi - m.phi * log_h - leverage(m.delta1, m.delta2, eps);
            s.u[k] = u;
            next += p.gamma[k] * u;
        }
        s.log_h = log_h;
        s.eps = eps;
        log_h = next;
    }
    if (!std::isfinite(log_h)) return std::nullopt;
    return s;
}

/// Joint log-likelihood of returns and measures. Returns -infinity (never
/// NaN) outside the admissible region or when the filter diverges.
inline double log_likelihood(const ModelParams& p, const ModelData& data) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    detail::check_shapes(p, data);
    if (!admissible(p)) return neg_inf;
    const std::size_t n = data.size();
    const std::size_t K = p.measures.size();

    // Return-equation density: const + kernel(eps) per observation.
    const auto kind = kind_of(p.dist);
    double nu = 0.0, lambda = 0.0, return_const = 0.0;
    SkewTConstants sk;
    if (kind == DistKind::Normal) {
        return_const = -0.5 * std::log(2.0 * std::numbers::pi);
    } else if (kind == DistKind::StudentT) {
        nu = std::get<StudentT>(p.dist).nu;
        return_const = student_log_norm(nu);
    } else {
        nu = std::get<SkewT>(p.dist).nu;
        lambda = std::get<SkewT>(p.dist).lambda;
        sk = skewt_constants(nu, lambda);
        return_const = std::log(sk.b) + std::log(sk.c);
    }
    const double half_nu1 = 0.5 * (nu + 1.0);
    const double inv_nu2 = kind == DistKind::Normal ? 0.0 : 1.0 / (nu - 2.0);
    const double knot = kind == DistKind::SkewT ? -sk.a / sk.b : 0.0;

    double meas_const = static_cast<double>(K) * std::log(2.0 * std::numbers::pi);
    std::vector<double> inv_var(K);
    for (std::size_t k = 0; k < K; ++k) {
        meas_const += std::log(p.measures[k].sigma2_u);
        inv_var[k] = 1.0 / p.measures[k].sigma2_u;
    }

    double total = static_cast<double>(n) * (return_const - 0.5 * meas_const);
    double log_h = data.log_h0;
    for (std::size_t t = 0; t < n; ++t) {
        if (!std::isfinite(log_h) || std::abs(log_h) > 700.0) return neg_inf;
        const double eps = (data.returns[t] - p.mu) * std::exp(-0.5 * log_h);
        double kern;
        if (kind == DistKind::Normal) {
            kern = -0.5 * eps * eps;
        } else if (kind == DistKind::StudentT) {
            kern = -half_nu1 * std::log1p(eps * eps * inv_nu2);
        } else {
            const double z = (sk.b * eps + sk.a) / (eps < knot ? 1.0 - lambda : 1.0 + lambda);
            kern = -half_nu1 * std::log1p(z * z * inv_nu2);
        }
        double quad = 0.0;
        double next = p.omega + p.beta * log_h + leverage(p.tau1, p.tau2, eps);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& m = p.measures[k];
            const double u = data.log_measures[k][t] - m.xi - m.phi * log_h - leverage(m.delta1, m.delta2, eps);
            quad += u * u * inv_var[k];
            next += p.gamma[k] * u;
        }
        total += kern - 0.5 * log_h - 0.5 * quad;
        log_h = next;
    }
    if (!std::isfinite(total)) return neg_inf;
    return total;
}

struct SimulatedData {
    std::vector<double> returns;
    /// x[k][t], in variance units.
    std::vector<std::vector<double>> measures;
    std::vector<double> log_h;
    std::vector<double> eps;
    std::vector<std::vector<double>> u;
    double log_h0 = 0.0;
    std::uint64_t seed = 0;

    /// Returns and log measures as model input, dated 1..n.
    ModelData as_model_data() const {
        ModelData d;
        for (std::size_t t = 0; t < returns.size(); ++t) d.dates.push_back(Date::index(static_cast<std::int64_t>(t + 1)));
        d.returns = returns;
        for (const auto& x : measures) {
            std::vector<double> lx(x.size());
            std::transform(x.begin(), x.end(), lx.begin(), [](double v) { return std::log(v); });
            d.log_measures.push_back(std::move(lx));
        }
        d.log_h0 = log_h0;
        return d;
    }
};

/// Draws a path of length n; eps by inverse CDF, u Gaussian. log h_1 = log(h0).
inline SimulatedData simulate(const ModelParams& p, std::size_t n, std::uint64_t seed, double h0 = 0.0025) {
    if (!stationarity_ok(p) || !admissible(p)) throw Error(ErrorKind::Domain, "simulation refused: parameters not admissible");
    if (!(h0 > 0.0)) throw Error(ErrorKind::Domain, "h0 must be positive");
    Rng rng(seed);
    const std::size_t K = p.measures.size();
    SimulatedData s;
    s.seed = seed;
    s.log_h0 = std::log(h0);
    s.returns.resize(n);
    s.log_h.resize(n);
    s.eps.resize(n);
    s.measures.assign(K, std::vector<double>(n));
    s.u.assign(K, std::vector<double>(n));
    double log_h = s.log_h0;
    for (std::size_t t = 0; t < n; ++t) {
        if (!std::isfinite(log_h)) throw FilterDivergence(t);
        const double eps = draw(p.dist, rng.uniform());
        s.log_h[t] = log_h;
        s.eps[t] = eps;
        s.returns[t] = p.mu + std::exp(0.5 * log_h) * eps;
        double next = p.omega + p.beta * log_h + leverage(p.tau1, p.tau2, eps);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& m = p.measures[k];
            const double u = std::sqrt(m.sigma2_u) * rng.normal();
            s.u[k][t] = u;
            s.measures[k][t] = std::exp(m.xi + m.phi * log_h + leverage(m.delta1, m.delta2, eps) + u);
            next += p.gamma[k] * u;
        }
        log_h = next;
    }
    return s;
}

/// Vector layout shared by samplers and optimisers:
///   mu, omega, beta, tau1, tau2, gamma_1..K, (xi, phi, delta1, delta2, sigma2_u)_k, [nu], [lambda].
struct ParamLayout {
    std::size_t measures = 1;
    DistKind dist = DistKind::Normal;

    std::size_t size() const noexcept { return 5 + 6 * measures + shape_count(dist); }
    std::size_t gamma(std::size_t k) const noexcept { return 5 + k; }
    std::size_t measure_base(std::size_t k) const noexcept { return 5 + measures + 5 * k; }
    std::size_t xi(std::size_t k) const noexcept { return measure_base(k); }
    std::size_t phi(std::size_t k) const noexcept { return measure_base(k) + 1; }
    std::size_t delta1(std::size_t k) const noexcept { return measure_base(k) + 2; }
    std::size_t delta2(std::size_t k) const noexcept { return measure_base(k) + 3; }
    std::size_t sigma2(std::size_t k) const noexcept { return measure_base(k) + 4; }
    std::size_t nu() const noexcept { return 5 + 6 * measures; }
    std::size_t lambda() const noexcept { return 5 + 6 * measures + 1; }

    std::vector<std::string> names() const {
        std::vector<std::string> n{"mu", "omega", "beta", "tau1", "tau2"};
        const bool one = measures == 1;
        auto suffix = [&](std::size_t k) { return one ? std::string() : "_" + std::to_string(k + 1); };
        for (std::size_t k = 0; k < measures; ++k) n.push_back("gamma" + suffix(k));
        for (std::size_t k = 0; k < measures; ++k) {
            n.push_back("xi" + suffix(k));
            n.push_back("phi" + suffix(k));
            n.push_back("delta1" + suffix(k));
            n.push_back("delta2" + suffix(k));
            n.push_back("sigma2_u" + suffix(k));
        }
        if (shape_count(dist) >= 1) n.push_back("nu");
        if (shape_count(dist) == 2) n.push_back("lambda");
        return n;
    }
};

inline ParamLayout layout_of(const ModelParams& p) { return {p.measures.size(), kind_of(p.dist)}; }

/// Parameters in layout order on their natural scale.
inline std::vector<double> to_natural(const ModelParams& p) {
    const auto L = layout_of(p);
    std::vector<double> v(L.size());
    v[0] = p.mu;
    v[1] = p.omega;
    v[2] = p.beta;
    v[3] = p.tau1;
    v[4] = p.tau2;
    for (std::size_t k = 0; k < L.measures; ++k) {
        v[L.gamma(k)] = p.gamma[k];
        const auto& m = p.measures[k];
        v[L.xi(k)] = m.xi;
        v[L.phi(k)] = m.phi;
        v[L.delta1(k)] = m.delta1;
        v[L.delta2(k)] = m.delta2;
        v[L.sigma2(k)] = m.sigma2_u;
    }
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, StudentT>) v[L.nu()] = d.nu;
            if constexpr (std::is_same_v<D, SkewT>) {
                v[L.nu()] = d.nu;
                v[L.lambda()] = d.lambda;
            }
        },
        p.dist);
    return v;
}

inline ModelParams from_natural(std::span<const double> v, std::size_t measures, DistKind dist) {
    const ParamLayout L{measures, dist};
    if (measures == 0 || v.size() != L.size())
        throw Error(ErrorKind::Layout, "parameter vector of length " + std::to_string(v.size()) + ", expected " +
                                           std::to_string(L.size()));
    ModelParams p;
    p.mu = v[0];
    p.omega = v[1];
    p.beta = v[2];
    p.tau1 = v[3];
    p.tau2 = v[4];
    for (std::size_t k = 0; k < measures; ++k) {
        p.gamma.push_back(v[L.gamma(k)]);
        p.measures.push_back({v[L.xi(k)], v[L.phi(k)], v[L.delta1(k)], v[L.delta2(k)], v[L.sigma2(k)]});
    }
    if (dist == DistKind::StudentT) p.dist = StudentT{v[L.nu()]};
    if (dist == DistKind::SkewT) p.dist = SkewT{v[L.nu()], v[L.lambda()]};
    return p;
}

namespace transform {

inline double nu_to_real(double nu) {
    const long double x = nu;
    return static_cast<double>(std::log((x - kNuLower) / (kNuUpper - x)));
}
inline double real_to_nu(double z) {
    const long double e = std::exp(static_cast<long double>(z));
    return static_cast<double>((kNuLower + kNuUpper * e) / (1.0L + e));
}
/// log |d nu / d z|
inline double nu_log_jacobian(double nu) {
    return std::log((nu - kNuLower) * (kNuUpper - nu) / (kNuUpper - kNuLower));
}
inline double lambda_to_real(double lambda) {
    const long double x = lambda;
    return static_cast<double>(std::log((1.0L + x) / (1.0L - x)));
}
inline double real_to_lambda(double w) {
    return static_cast<double>(std::tanh(static_cast<long double>(w) / 2.0L));
}
inline double lambda_log_jacobian(double lambda) { return std::log((1.0 - lambda * lambda) / 2.0); }

}  // namespace transform

/// Unconstrained vector: log sigma2_u, log((nu-4)/(200-nu)), log((1+lambda)/(1-lambda)); others as is.
inline std::vector<double> pack(const ModelParams& p) {
    const auto L = layout_of(p);
    auto v = to_natural(p);
    for (std::size_t k = 0; k < L.measures; ++k) v[L.sigma2(k)] = std::log(v[L.sigma2(k)]);
    if (shape_count(L.dist) >= 1) v[L.nu()] = transform::nu_to_real(v[L.nu()]);
    if (shape_count(L.dist) == 2) v[L.lambda()] = transform::lambda_to_real(v[L.lambda()]);
    return v;
}

inline ModelParams unpack(std::span<const double> v, std::size_t measures, DistKind dist) {
    const ParamLayout L{measures, dist};
    if (measures == 0 || v.size() != L.size())
        throw Error(ErrorKind::Layout, "packed vector of length " + std::to_string(v.size()) + ", expected " +
                                           std::to_string(L.size()));
    std::vector<double> nat(v.begin(), v.end());
    for (std::size_t k = 0; k < measures; ++k) nat[L.sigma2(k)] = std::exp(nat[L.sigma2(k)]);
    if (shape_count(dist) >= 1) nat[L.nu()] = transform::real_to_nu(nat[L.nu()]);
    if (shape_count(dist) == 2) nat[L.lambda()] = transform::real_to_lambda(nat[L.lambda()]);
    return from_natural(nat, measures, dist);
}

/// log |d natural / d packed| at p.
inline double log_jacobian(const ModelParams& p) {
    const auto L = layout_of(p);
    double j = 0.0;
    for (const auto& m : p.measures) j += std::log(m.sigma2_u);
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, StudentT>) j += transform::nu_log_jacobian(d.nu);
            if constexpr (std::is_same_v<D, SkewT>) j += transform::nu_log_jacobian(d.nu) + transform::lambda_log_jacobian(d.lambda);
        },
        p.dist);
    (void)L;
    return j;
}

/// Parameters used by the simulation study, phi = 0.94 as in the generating equations.
inline ModelParams simulation_study_params() {
    ModelParams p;
    p.mu = 0.0;
    p.omega = -0.12;
    p.beta = 0.98;
    p.tau1 = -0.12;
    p.tau2 = 0.04;
    p.gamma = {0.47};
    p.measures = {{-0.17, 0.94, -0.09, 0.06, 0.15}};
    p.dist = SkewT{4.4, 0.5};
    return p;
}

/// Starting point with every coefficient at 0.1 and nu = 5.
inline ModelParams default_initial_params(std::size_t measures, DistKind dist) {
    ModelParams p;
    p.mu = p.omega = p.beta = p.tau1 = p.tau2 = 0.1;
    p.gamma.assign(measures, 0.1);
    p.measures.assign(measures, {0.1, 0.1, 0.1, 0.1, 0.1});
    if (dist == DistKind::StudentT) p.dist = StudentT{5.0};
    if (dist == DistKind::SkewT) p.dist = SkewT{5.0, 0.1};
    return p;
}

}  // namespace revar
