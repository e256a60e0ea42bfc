#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "revar/model.hpp"
#include "revar/optim.hpp"
#include "revar/random.hpp"

namespace revar {

struct MLOptions {
    /// Objective evaluations allowed per start.
    std::size_t max_evals = 20000;
    /// Jittered restarts in addition to the start at `init`.
    std::size_t restarts = 3;
    double jitter = 0.1;
    std::uint64_t seed = 0;
    double hessian_step = 1e-4;
};

struct MLFit {
    ModelParams params;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    double initial_log_likelihood = -std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t evaluations = 0;
    /// Natural-scale standard errors in layout order; empty entries where the
    /// Hessian is not negative definite.
    std::vector<std::optional<double>> std_errors;
};

namespace detail {

/// d natural / d packed for each coordinate at p.
inline std::vector<double> natural_derivatives(const ModelParams& p) {
    const auto L = layout_of(p);
    std::vector<double> d(L.size(), 1.0);
    for (std::size_t k = 0; k < L.measures; ++k) d[L.sigma2(k)] = p.measures[k].sigma2_u;
    if (L.dist != DistKind::Normal) d[L.nu()] = std::exp(transform::nu_log_jacobian(degrees_of_freedom(p.dist)));
    if (L.dist == DistKind::SkewT) d[L.lambda()] = std::exp(transform::lambda_log_jacobian(std::get<SkewT>(p.dist).lambda));
    return d;
}

}  // namespace detail

/// Central-difference Hessian of the log-likelihood on the packed scale.
inline Eigen::MatrixXd packed_hessian(const ModelData& data, const std::vector<double>& z, std::size_t measures,
                                      DistKind dist, double step) {
    const std::size_t n = z.size();
    auto f = [&](const std::vector<double>& x) { return log_likelihood(unpack(x, measures, dist), data); };
    Eigen::MatrixXd H(n, n);
    const double f0 = f(z);
    std::vector<double> x = z;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = z[i] + step;
        const double fp = f(x);
        x[i] = z[i] - step;
        const double fm = f(x);
        x[i] = z[i];
        H(i, i) = (fp - 2.0 * f0 + fm) / (step * step);
        for (std::size_t j = 0; j < i; ++j) {
            double s = 0.0;
            for (int si : {1, -1})
                for (int sj : {1, -1}) {
                    x[i] = z[i] + si * step;
                    x[j] = z[j] + sj * step;
                    s += si * sj * f(x);
                }
            x[i] = z[i];
            x[j] = z[j];
            H(i, j) = H(j, i) = s / (4.0 * step * step);
        }
    }
    return H;
}

/// Maximum likelihood by Nelder-Mead on the packed (unconstrained) scale,
/// started at `init` and at `restarts` jittered copies of it; the best
/// attained optimum is returned.
inline MLFit fit_ml(const ModelData& data, const ModelParams& init, const MLOptions& opt = {}) {
    const std::size_t K = init.measures.size();
    const DistKind dist = kind_of(init.dist);
    auto objective = [&](std::span<const double> z) {
        const double ll = log_likelihood(unpack(z, K, dist), data);
        return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    };

    MLFit fit;
    fit.initial_log_likelihood = log_likelihood(init, data);
    const auto z0 = pack(init);
    Rng rng(opt.seed);
    SimplexOptions sopt;
    sopt.max_evals = opt.max_evals;

    std::vector<double> best_z = z0;
    double best_value = std::isfinite(fit.initial_log_likelihood) ? -fit.initial_log_likelihood
                                                                  : std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (std::size_t s = 0; s <= opt.restarts; ++s) {
        std::vector<double> start = z0;
        if (s > 0)
            for (auto& v : start) v += opt.jitter * rng.normal();
        auto r = nelder_mead(objective, start, sopt);
        fit.evaluations += r.evals;
        if (r.value < best_value) {
            best_value = r.value;
            best_z = r.x;
            any_converged = r.converged;
        } else if (r.converged && r.value == best_value) {
            any_converged = true;
        }
    }

    fit.params = unpack(best_z, K, dist);
    fit.log_likelihood = std::isfinite(best_value) ? -best_value : -std::numeric_limits<double>::infinity();
    fit.converged = std::isfinite(best_value) && any_converged &&
                    (!std::isfinite(fit.initial_log_likelihood) || fit.log_likelihood > fit.initial_log_likelihood ||
                     fit.log_likelihood == fit.initial_log_likelihood);

    fit.std_errors.assign(best_z.size(), std::nullopt);
    if (std::isfinite(best_value)) {
        const Eigen::MatrixXd info = -packed_hessian(data, best_z, K, dist, opt.hessian_step);
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (info.allFinite() && llt.info() == Eigen::Success) {
            const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
            const auto deriv = detail::natural_derivatives(fit.params);
            for (std::size_t i = 0; i < best_z.size(); ++i)
                if (cov(i, i) > 0.0) fit.std_errors[i] = std::abs(deriv[i]) * std::sqrt(cov(i, i));
        }
    }
    return fit;
}

}  // namespace revar
