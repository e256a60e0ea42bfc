#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "revar/bootstrap.hpp"
#include "revar/error.hpp"
#include "revar/optim.hpp"
#include "revar/parallel.hpp"
#include "revar/random.hpp"

namespace revar {

struct TestResult {
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    bool reject = false;
    /// Test not computable on this input (no hits, singular design, optimiser failure).
    bool degenerate = false;
    std::string note;
};

inline constexpr double kTestLevel = 0.05;

namespace detail {

inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

inline double chi2_sf(double stat, double df) {
    if (!(stat > 0.0)) return 1.0;
    if (std::isinf(stat)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), stat));
}

inline TestResult finish(double stat, double p) {
    TestResult r;
    r.statistic = stat;
    r.p_value = std::clamp(p, 0.0, 1.0);
    r.reject = r.p_value < kTestLevel;
    return r;
}

inline TestResult degenerate(std::string note) {
    TestResult r;
    r.degenerate = true;
    r.note = std::move(note);
    return r;
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Domain, "alpha must lie in (0, 1)");
}

inline void check_same_length(std::size_t a, std::size_t b) {
    if (a != b) throw Error(ErrorKind::Alignment, "series lengths differ");
    if (a == 0) throw Error(ErrorKind::InsufficientData, "empty series");
}

}  // namespace detail

/// I(r_t < VaR_t).
inline std::vector<int> hit_series(std::span<const double> returns, std::span<const double> var) {
    detail::check_same_length(returns.size(), var.size());
    std::vector<int> h(returns.size());
    for (std::size_t t = 0; t < h.size(); ++t) h[t] = returns[t] < var[t] ? 1 : 0;
    return h;
}

inline double vrate(std::span<const int> hits) {
    if (hits.empty()) throw Error(ErrorKind::InsufficientData, "empty hit series");
    return static_cast<double>(std::accumulate(hits.begin(), hits.end(), 0L)) / static_cast<double>(hits.size());
}

/// Kupiec likelihood ratio against Binomial(m, alpha), chi-square(1). With no
/// hits or only hits the p-value is the exact two-sided Binomial tail.
inline TestResult uc_test(std::span<const int> hits, double alpha) {
    detail::check_alpha(alpha);
    if (hits.empty()) throw Error(ErrorKind::InsufficientData, "empty hit series");
    const double m = static_cast<double>(hits.size());
    const double x = static_cast<double>(std::accumulate(hits.begin(), hits.end(), 0L));
    const double pi = x / m;
    const double stat = std::max(0.0, -2.0 * (detail::xlogy(m - x, 1.0 - alpha) + detail::xlogy(x, alpha) -
                                              detail::xlogy(m - x, 1.0 - pi) - detail::xlogy(x, pi)));
    if (x == 0.0 || x == m) {
        const boost::math::binomial_distribution<double> bin(m, alpha);
        const double tail = x == 0.0 ? boost::math::pdf(bin, 0.0) : boost::math::pdf(bin, m);
        auto r = detail::finish(stat, std::min(1.0, 2.0 * tail));
        r.note = "exact binomial tail";
        return r;
    }
    return detail::finish(stat, detail::chi2_sf(stat, 1.0));
}

/// Christoffersen conditional coverage: UC plus the first-order Markov
/// independence ratio, chi-square(2).
inline TestResult cc_test(std::span<const int> hits, double alpha) {
    const auto uc = uc_test(hits, alpha);
    const long x = std::accumulate(hits.begin(), hits.end(), 0L);
    if (x == 0 || x == static_cast<long>(hits.size())) return detail::degenerate("no variation in hits");
    double n[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t t = 1; t < hits.size(); ++t) n[hits[t - 1]][hits[t]] += 1.0;
    const double n0 = n[0][0] + n[0][1], n1 = n[1][0] + n[1][1];
    const double pi01 = n0 > 0 ? n[0][1] / n0 : 0.0;
    const double pi11 = n1 > 0 ? n[1][1] / n1 : 0.0;
    const double pi = (n[0][1] + n[1][1]) / (n0 + n1);
    const double restricted = detail::xlogy(n[0][0] + n[1][0], 1.0 - pi) + detail::xlogy(n[0][1] + n[1][1], pi);
    const double markov = detail::xlogy(n[0][0], 1.0 - pi01) + detail::xlogy(n[0][1], pi01) +
                          detail::xlogy(n[1][0], 1.0 - pi11) + detail::xlogy(n[1][1], pi11);
    const double ind = std::max(0.0, -2.0 * (restricted - markov));
    const double stat = uc.statistic + ind;
    return detail::finish(stat, detail::chi2_sf(stat, 2.0));
}

/// Engle-Manganelli dynamic quantile test: demeaned hits regressed on a
/// constant, `lags` lagged hits and the contemporaneous VaR;
/// DQ = b'X'Xb / (alpha(1 - alpha)), chi-square(lags + 2).
inline TestResult dq_test(std::span<const int> hits, std::span<const double> var, double alpha, std::size_t lags = 4) {
    detail::check_alpha(alpha);
    detail::check_same_length(hits.size(), var.size());
    const long x = std::accumulate(hits.begin(), hits.end(), 0L);
    if (x == 0 || x == static_cast<long>(hits.size())) return detail::degenerate("no variation in hits");
    if (hits.size() <= lags + lags + 2) throw Error(ErrorKind::InsufficientData, "too few observations for the DQ test");
    const auto rows = static_cast<Eigen::Index>(hits.size() - lags);
    const auto cols = static_cast<Eigen::Index>(lags + 2);
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const std::size_t t = static_cast<std::size_t>(i) + lags;
        y(i) = hits[t] - alpha;
        X(i, 0) = 1.0;
        for (std::size_t l = 1; l <= lags; ++l) X(i, static_cast<Eigen::Index>(l)) = hits[t - l] - alpha;
        X(i, cols - 1) = var[t];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) return detail::degenerate("singular DQ design");
    const Eigen::VectorXd b = qr.solve(y);
    const double stat = (X * b).squaredNorm() / (alpha * (1.0 - alpha));
    return detail::finish(stat, detail::chi2_sf(stat, static_cast<double>(cols)));
}

/// Total tick loss sum (r - Q)(alpha - I(r < Q)).
inline double quantile_loss(std::span<const double> returns, std::span<const double> var, double alpha) {
    detail::check_same_length(returns.size(), var.size());
    double total = 0.0;
    for (std::size_t t = 0; t < returns.size(); ++t)
        total += (returns[t] - var[t]) * (alpha - (returns[t] < var[t] ? 1.0 : 0.0));
    return total;
}

/// Per-day joint VaR/ES loss with G1(x) = x, G2 = H = exp and
/// a(r) = 1 - log(1 - alpha).
inline double fz_loss_day(double r, double var, double es, double alpha) {
    if (!(es < var)) throw Error(ErrorKind::ContractViolation, "ES must lie below VaR");
    const double hit = r < var ? 1.0 : 0.0;
    const double g = std::exp(es);
    return (hit - alpha) * var - hit * r + g * (es - var + hit / alpha * (var - r)) - g + 1.0 - std::log(1.0 - alpha);
}

inline std::vector<double> fz_losses(std::span<const double> returns, std::span<const double> var,
                                     std::span<const double> es, double alpha) {
    detail::check_same_length(returns.size(), var.size());
    detail::check_same_length(returns.size(), es.size());
    std::vector<double> out(returns.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = fz_loss_day(returns[t], var[t], es[t], alpha);
    return out;
}

/// Total joint loss over the sample.
inline double fz_joint_loss(std::span<const double> returns, std::span<const double> var, std::span<const double> es,
                            double alpha) {
    const auto l = fz_losses(returns, var, es, alpha);
    return std::accumulate(l.begin(), l.end(), 0.0);
}

/// Negative asymmetric-Laplace log-likelihood of one day.
inline double al_score_day(double r, double var, double es, double alpha) {
    if (!(es < 0.0)) throw Error(ErrorKind::Domain, "AL score needs negative ES");
    const double hit = r <= var ? 1.0 : 0.0;
    return -std::log((alpha - 1.0) / es) - (r - var) * (alpha - hit) / (alpha * es);
}

inline std::vector<double> al_scores(std::span<const double> returns, std::span<const double> var,
                                     std::span<const double> es, double alpha) {
    detail::check_same_length(returns.size(), var.size());
    detail::check_same_length(returns.size(), es.size());
    std::vector<double> out(returns.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = al_score_day(returns[t], var[t], es[t], alpha);
    return out;
}

/// Mean AL log score.
inline double al_log_score(std::span<const double> returns, std::span<const double> var, std::span<const double> es,
                           double alpha) {
    const auto s = al_scores(returns, var, es, alpha);
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

struct QuantRegFit {
    double intercept = 0.0;
    double slope = 0.0;
    double loss = 0.0;
};

namespace detail {

/// Pinball loss with the intercept profiled out: for a fixed slope the best
/// intercept is the u-quantile of y - slope x.
inline QuantRegFit profile_quantreg(double slope, std::span<const double> y, std::span<const double> x,
                                    std::span<const std::size_t> idx, double u, std::vector<double>& work) {
    const std::size_t n = idx.size();
    work.resize(n);
    for (std::size_t i = 0; i < n; ++i) work[i] = y[idx[i]] - slope * x[idx[i]];
    auto k = static_cast<std::size_t>(std::ceil(u * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n) - 1;
    std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k), work.end());
    const double b0 = work[k];
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double res = y[idx[i]] - b0 - slope * x[idx[i]];
        loss += res * (u - (res < 0.0 ? 1.0 : 0.0));
    }
    return {b0, slope, loss};
}

}  // namespace detail

/// Linear quantile regression of y on (1, x) at level u. The profile loss is
/// convex in the slope; a bracketing search followed by golden sections
/// locates the minimum.
inline QuantRegFit quantile_regression(std::span<const double> y, std::span<const double> x, double u,
                                       std::span<const std::size_t> idx = {}) {
    detail::check_same_length(y.size(), x.size());
    std::vector<std::size_t> all;
    if (idx.empty()) {
        all.resize(y.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        idx = all;
    }
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    if (*lo_it == *hi_it) throw Error(ErrorKind::Domain, "quantile regression on a constant regressor");
    std::vector<double> work;
    auto f = [&](double b) { return detail::profile_quantreg(b, y, x, idx, u, work).loss; };

    double centre = 1.0, width = 1.0;
    double fc = f(centre);
    for (int i = 0; i < 200; ++i) {
        const double fl = f(centre - width), fr = f(centre + width);
        if (fl < fc && fl <= fr) {
            centre -= width;
            fc = fl;
            width *= 2.0;
        } else if (fr < fc) {
            centre += width;
            fc = fr;
            width *= 2.0;
        } else {
            break;
        }
    }
    double a = centre - width, b = centre + width;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fcv = f(c), fdv = f(d);
    while (b - a > 1e-12 * (1.0 + std::abs(centre))) {
        if (fcv <= fdv) {
            b = d;
            d = c;
            fdv = fcv;
            c = b - g * (b - a);
            fcv = f(c);
        } else {
            a = c;
            c = d;
            fcv = fdv;
            d = a + g * (b - a);
            fdv = f(d);
        }
    }
    const double best = fcv <= fdv ? c : d;
    auto fit = detail::profile_quantreg(best, y, x, idx, u, work);
    if (fc < fit.loss) fit = detail::profile_quantreg(centre, y, x, idx, u, work);
    return fit;
}

struct BootstrapSpec {
    std::size_t replications = 1000;
    double mean_block = 20.0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct EsrResult {
    TestResult test;
    /// Quantile equation r = a_q + b_q e, ES equation r = a_e + b_e e.
    double a_q = 0.0, b_q = 0.0, a_e = 0.0, b_e = 0.0;
    std::size_t failed_replications = 0;
};

namespace detail {

/// Mean AL score of the regression pair on standardised data; theta = (a_q, b_q, a_e, b_e).
inline double esr_objective(std::span<const double> theta, std::span<const double> y, std::span<const double> x,
                            std::span<const std::size_t> idx, double alpha) {
    double total = 0.0;
    for (std::size_t i : idx) {
        const double q = theta[0] + theta[1] * x[i];
        const double e = theta[2] + theta[3] * x[i];
        if (!(e < 0.0)) return std::numeric_limits<double>::infinity();
        const double hit = y[i] <= q ? 1.0 : 0.0;
        total += -std::log((alpha - 1.0) / e) - (y[i] - q) * (alpha - hit) / (alpha * e);
    }
    return total / static_cast<double>(idx.size());
}

/// Joint fit in three stages: exact quantile regression for (a_q, b_q), the
/// ES pair with the quantile equation held fixed, then a joint polish.
inline SimplexResult esr_fit(std::span<const double> y, std::span<const double> x, std::span<const std::size_t> idx,
                             double alpha) {
    SimplexOptions opt;
    opt.f_tol = 1e-10;
    opt.x_tol = 1e-7;
    const auto q = quantile_regression(y, x, alpha, idx);

    // Start the ES slope at the ratio of the tail mean to the mean quantile.
    double tail = 0.0, qsum = 0.0;
    std::size_t count = 0;
    for (std::size_t i : idx) {
        const double qi = q.intercept + q.slope * x[i];
        if (y[i] <= qi) {
            tail += y[i];
            qsum += qi;
            ++count;
        }
    }
    const double ratio = count > 0 && qsum < 0.0 && tail < 0.0 ? tail / qsum : 1.2;
    SimplexResult best;
    for (const std::vector<double>& start : {std::vector<double>{0.0, q.slope * ratio}, std::vector<double>{0.0, 1.0}}) {
        auto r = nelder_mead(
            [&](std::span<const double> e) {
                const double th[4] = {q.intercept, q.slope, e[0], e[1]};
                return esr_objective(th, y, x, idx, alpha);
            },
            start, opt);
        if (r.value < best.value) best = std::move(r);
    }
    if (!std::isfinite(best.value)) return best;
    opt.max_restarts = 2;
    auto joint = nelder_mead([&](std::span<const double> th) { return esr_objective(th, y, x, idx, alpha); },
                             {q.intercept, q.slope, best.x[0], best.x[1]}, opt);
    joint.evals += best.evals;
    return joint;
}

}  // namespace detail

/// Expected-shortfall regression backtest. Quantile and ES equations both
/// regress the return on the ES forecast and are fitted jointly by minimising
/// the AL score. H0: (a_e, b_e) = (0, 1). The statistic sums squared
/// deviations of the ES line at the mean forecast and of its slope, each
/// scaled by its stationary-bootstrap variance; the p-value is recentred.
inline EsrResult esr_backtest(std::span<const double> returns, std::span<const double> es, double alpha,
                              const BootstrapSpec& boot = {}) {
    detail::check_alpha(alpha);
    detail::check_same_length(returns.size(), es.size());
    const std::size_t n = returns.size();
    if (n < 250) throw Error(ErrorKind::InsufficientData, "the ESR backtest needs at least 250 observations");
    if (boot.replications < 10) throw Error(ErrorKind::Config, "ESR bootstrap needs at least 10 replications");

    // Scale invariance of the AL score lets us work with unit-variance data.
    double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    const double scale = std::sqrt(ss / static_cast<double>(n));
    if (!(scale > 0.0)) throw Error(ErrorKind::Domain, "returns have zero variance");
    std::vector<double> y(n), x(n);
    for (std::size_t t = 0; t < n; ++t) {
        y[t] = returns[t] / scale;
        x[t] = es[t] / scale;
        if (!(es[t] < 0.0)) throw Error(ErrorKind::Domain, "ES forecasts must be negative");
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});

    EsrResult out;
    SimplexResult fit;
    try {
        fit = detail::esr_fit(y, x, all, alpha);
    } catch (const Error&) {
    }
    if (!std::isfinite(fit.value)) {
        out.test = detail::degenerate("ESR optimiser failed");
        return out;
    }
    const auto& th = fit.x;
    out.a_q = th[0] * scale;
    out.b_q = th[1];
    out.a_e = th[2] * scale;
    out.b_e = th[3];

    std::vector<double> ae(boot.replications), be(boot.replications);
    std::vector<char> ok(boot.replications, 0);
    parallel_for(boot.replications, boot.threads, [&](std::size_t b) {
        Rng rng(derive_seed(boot.seed, b));
        const auto idx = stationary_bootstrap_indices(n, boot.mean_block, rng);
        SimplexResult r;
        try {
            r = detail::esr_fit(y, x, idx, alpha);
        } catch (const Error&) {
            return;
        }
        if (!std::isfinite(r.value)) return;
        ae[b] = r.x[2];
        be[b] = r.x[3];
        ok[b] = 1;
    });
    std::vector<Eigen::Vector2d> dev;
    for (std::size_t b = 0; b < boot.replications; ++b)
        if (ok[b]) dev.emplace_back(ae[b] - th[2], be[b] - th[3]);
        else ++out.failed_replications;
    if (dev.size() < 10) {
        out.test = detail::degenerate("too few successful bootstrap fits");
        return out;
    }
    // Evaluate the ES line at the mean forecast so the two coordinates are
    // close to uncorrelated, then sum the squared standardised deviations.
    const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    for (auto& d : dev) d(0) += xbar * d(1);
    Eigen::Vector2d centre = Eigen::Vector2d::Zero();
    for (const auto& d : dev) centre += d;
    centre /= static_cast<double>(dev.size());
    Eigen::Vector2d var = Eigen::Vector2d::Zero();
    for (const auto& d : dev) var += (d - centre).cwiseAbs2();
    var /= static_cast<double>(dev.size() - 1);
    if (!(var.minCoeff() > 0.0)) {
        out.test = detail::degenerate("zero bootstrap variance");
        return out;
    }
    const Eigen::Vector2d d0(th[2] + xbar * (th[3] - 1.0), th[3] - 1.0);
    const double stat = d0.cwiseAbs2().cwiseQuotient(var).sum();
    std::size_t exceed = 0;
    for (const auto& d : dev)
        if (d.cwiseAbs2().cwiseQuotient(var).sum() >= stat) ++exceed;
    out.test = detail::finish(stat, static_cast<double>(exceed) / static_cast<double>(dev.size()));
    return out;
}

struct MqrSpec {
    std::size_t p = 6;
    /// Return-side tail probability; the loss-side base level is 1 - alpha.
    double alpha = 0.025;
    std::size_t replications = 1000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct MqrResult {
    TestResult j1, j2, intercept, slope;
    /// Per level u_j.
    std::vector<double> levels, beta0, beta1;
    double sum_beta0 = 0.0, sum_beta1 = 0.0;
    std::size_t failed_replications = 0;
};

/// Multi-quantile ES backtest. Losses L = -r are regressed on the loss-side
/// VaR at each u_j; Wald tests on sum(beta0) and sum(beta1) use a pairs
/// bootstrap covariance and recentred bootstrap p-values.
/// `var_grid[j]` holds the return-side VaR at level 1 - u_j.
inline MqrResult mqr_backtest(std::span<const double> returns, const std::vector<std::vector<double>>& var_grid,
                              const MqrSpec& spec) {
    detail::check_alpha(spec.alpha);
    if (spec.p < 2) throw Error(ErrorKind::Config, "MQR needs p >= 2");
    if (var_grid.size() != spec.p) throw Error(ErrorKind::Alignment, "VaR grid does not have p levels");
    const std::size_t n = returns.size();
    for (const auto& v : var_grid) detail::check_same_length(n, v.size());
    if (spec.replications < 10) throw Error(ErrorKind::Config, "MQR bootstrap needs at least 10 replications");

    MqrResult out;
    std::vector<double> loss(n);
    for (std::size_t t = 0; t < n; ++t) loss[t] = -returns[t];
    std::vector<std::vector<double>> xs(spec.p, std::vector<double>(n));
    const double base = 1.0 - spec.alpha;
    for (std::size_t j = 0; j < spec.p; ++j) {
        out.levels.push_back(base + static_cast<double>(j) * (1.0 - base) / static_cast<double>(spec.p));
        for (std::size_t t = 0; t < n; ++t) xs[j][t] = -var_grid[j][t];
        const auto [lo, hi] = std::minmax_element(xs[j].begin(), xs[j].end());
        if (*lo == *hi) {
            out.j1 = out.j2 = out.intercept = out.slope = detail::degenerate("constant VaR regressor");
            return out;
        }
    }
    auto sums = [&](std::span<const std::size_t> idx, std::vector<double>* b0, std::vector<double>* b1) {
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t j = 0; j < spec.p; ++j) {
            const auto f = quantile_regression(loss, xs[j], out.levels[j], idx);
            s0 += f.intercept;
            s1 += f.slope;
            if (b0) b0->push_back(f.intercept);
            if (b1) b1->push_back(f.slope);
        }
        return Eigen::Vector2d(s0, s1);
    };
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Eigen::Vector2d s_hat = sums(all, &out.beta0, &out.beta1);
    out.sum_beta0 = s_hat(0);
    out.sum_beta1 = s_hat(1);

    std::vector<Eigen::Vector2d> draws(spec.replications);
    std::vector<char> ok(spec.replications, 0);
    parallel_for(spec.replications, spec.threads, [&](std::size_t b) {
        Rng rng(derive_seed(spec.seed, b));
        const auto idx = iid_bootstrap_indices(n, rng);
        try {
            draws[b] = sums(idx, nullptr, nullptr) - s_hat;
            ok[b] = 1;
        } catch (const Error&) {
        }
    });
    std::vector<Eigen::Vector2d> dev;
    for (std::size_t b = 0; b < spec.replications; ++b)
        if (ok[b]) dev.push_back(draws[b]);
        else ++out.failed_replications;
    if (dev.size() < 10) {
        out.j1 = out.j2 = out.intercept = out.slope = detail::degenerate("too few successful bootstrap fits");
        return out;
    }
    Eigen::Vector2d centre = Eigen::Vector2d::Zero();
    for (const auto& d : dev) centre += d;
    centre /= static_cast<double>(dev.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& d : dev) cov += (d - centre) * (d - centre).transpose();
    cov /= static_cast<double>(dev.size() - 1);

    const double p = static_cast<double>(spec.p);
    const Eigen::Vector2d null_gap(s_hat(0), s_hat(1) - p);
    // Each hypothesis is a linear restriction R s = r on s = (sum beta0, sum beta1).
    auto wald = [&](const Eigen::MatrixXd& R, const Eigen::VectorXd& gap) {
        const Eigen::MatrixXd V = R * cov * R.transpose();
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
        if (ldlt.info() != Eigen::Success || !(V.determinant() > 0.0))
            return detail::degenerate("singular bootstrap covariance");
        const double stat = gap.dot(ldlt.solve(gap));
        std::size_t exceed = 0;
        for (const auto& d : dev) {
            const Eigen::VectorXd rd = R * d;
            if (rd.dot(ldlt.solve(rd)) >= stat) ++exceed;
        }
        return detail::finish(stat, static_cast<double>(exceed) / static_cast<double>(dev.size()));
    };
    Eigen::MatrixXd r_j1(1, 2), r_i(1, 2), r_s(1, 2);
    r_j1 << 1.0, 1.0;
    r_i << 1.0, 0.0;
    r_s << 0.0, 1.0;
    out.j1 = wald(r_j1, Eigen::VectorXd::Constant(1, s_hat(0) + s_hat(1) - p));
    out.j2 = wald(Eigen::MatrixXd::Identity(2, 2), null_gap);
    out.intercept = wald(r_i, Eigen::VectorXd::Constant(1, s_hat(0)));
    out.slope = wald(r_s, Eigen::VectorXd::Constant(1, s_hat(1) - p));
    return out;
}

}  // namespace revar
