#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "revar/diagnostics.hpp"
#include "revar/error.hpp"
#include "revar/model.hpp"
#include "revar/parallel.hpp"
#include "revar/random.hpp"

namespace revar {

/// Target acceptance by block dimension: 0.44 (d = 1), 0.35 (2..4), 0.234 (> 4).
inline double target_acceptance(std::size_t dim) {
    if (dim <= 1) return 0.44;
    if (dim <= 4) return 0.35;
    return 0.234;
}

/// Disjoint, exhaustive partition of parameter indices.
struct BlockScheme {
    std::vector<std::vector<std::size_t>> blocks;

    static BlockScheme single(std::size_t dim) {
        BlockScheme s;
        s.blocks.emplace_back(dim);
        for (std::size_t i = 0; i < dim; ++i) s.blocks[0][i] = i;
        return s;
    }

    /// 1 block, or the 4-block grouping (mu), (omega, beta, tau, gamma, phi),
    /// (xi, delta, sigma2_u), (nu, lambda). Empty blocks are dropped.
    static BlockScheme for_model(const ParamLayout& L, int count) {
        if (count == 1) return single(L.size());
        if (count != 4) throw Error(ErrorKind::Config, "block setting must be 1 or 4");
        BlockScheme s;
        s.blocks.push_back({0});
        std::vector<std::size_t> dynamics{1, 2, 3, 4};
        std::vector<std::size_t> measurement;
        for (std::size_t k = 0; k < L.measures; ++k) dynamics.push_back(L.gamma(k));
        for (std::size_t k = 0; k < L.measures; ++k) {
            dynamics.push_back(L.phi(k));
            measurement.insert(measurement.end(), {L.xi(k), L.delta1(k), L.delta2(k), L.sigma2(k)});
        }
        s.blocks.push_back(dynamics);
        s.blocks.push_back(measurement);
        std::vector<std::size_t> shape;
        if (shape_count(L.dist) >= 1) shape.push_back(L.nu());
        if (shape_count(L.dist) == 2) shape.push_back(L.lambda());
        if (!shape.empty()) s.blocks.push_back(shape);
        return s;
    }

    void validate(std::size_t dim) const {
        std::vector<int> seen(dim, 0);
        for (const auto& b : blocks) {
            if (b.empty()) throw Error(ErrorKind::Config, "empty parameter block");
            for (auto i : b) {
                if (i >= dim) throw Error(ErrorKind::Config, "block index out of range");
                ++seen[i];
            }
        }
        if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
            throw Error(ErrorKind::Config, "blocks must partition the parameter vector");
    }
};

struct RamSettings {
    /// eta_n = min(1, d n^{-exponent}).
    double exponent = 2.0 / 3.0;
    double initial_scale = 0.1;
};

/// Robust adaptive Metropolis state of one block.
struct RamBlock {
    std::vector<std::size_t> indices;
    /// Lower-triangular proposal factor S with positive diagonal.
    Eigen::MatrixXd factor;
    double target = 0.234;
    std::size_t iteration = 0;
    std::size_t accepted = 0;
    std::size_t skipped_adaptations = 0;

    static RamBlock make(std::vector<std::size_t> indices, double scale) {
        RamBlock b;
        const auto d = static_cast<Eigen::Index>(indices.size());
        b.factor = scale * Eigen::MatrixXd::Identity(d, d);
        b.target = target_acceptance(indices.size());
        b.indices = std::move(indices);
        return b;
    }
};

/// In-place rank-one update (sign = +1) or downdate (sign = -1) of a lower
/// Cholesky factor: L L' + sign x x'. Leaves L untouched and returns false
/// when the downdate would lose positive definiteness.
inline bool cholesky_rank_one(Eigen::MatrixXd& L, Eigen::VectorXd x, double sign) {
    Eigen::MatrixXd work = L;
    const auto n = work.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double lkk = work(k, k);
        const double r2 = lkk * lkk + sign * x(k) * x(k);
        if (!(r2 > 0.0) || !std::isfinite(r2)) return false;
        const double r = std::sqrt(r2);
        if (!(r > 1e-300)) return false;
        const double c = r / lkk;
        const double s = x(k) / lkk;
        work(k, k) = r;
        for (Eigen::Index i = k + 1; i < n; ++i) {
            work(i, k) = (work(i, k) + sign * s * x(i)) / c;
            x(i) = c * x(i) - s * work(i, k);
        }
    }
    L = std::move(work);
    return true;
}

/// eta_n = min(1, d n^{-exponent}).
inline double ram_step_size(std::size_t dim, std::size_t n, double exponent = 2.0 / 3.0) {
    return std::min(1.0, static_cast<double>(dim) * std::pow(static_cast<double>(n), -exponent));
}

/// One RAM iteration on a block of `point`: propose Y = X + S U, accept with
/// min(1, pi(Y)/pi(X)), then adapt S so that
/// S S' = S (I + eta (alpha - alpha*) U U' / |U|^2) S'.
template <class LogDensity>
bool ram_step(RamBlock& block, Eigen::VectorXd& point, double& log_density, LogDensity&& log_density_fn, Rng& rng,
              const RamSettings& settings = {}) {
    const auto d = static_cast<Eigen::Index>(block.indices.size());
    Eigen::VectorXd u(d);
    for (Eigen::Index i = 0; i < d; ++i) u(i) = rng.normal();
    const Eigen::VectorXd step = block.factor.triangularView<Eigen::Lower>() * u;

    Eigen::VectorXd proposal = point;
    for (Eigen::Index i = 0; i < d; ++i) proposal(static_cast<Eigen::Index>(block.indices[i])) += step(i);
    const double proposed = log_density_fn(proposal);
    double accept_prob = 0.0;
    if (std::isfinite(proposed)) accept_prob = proposed >= log_density ? 1.0 : std::exp(proposed - log_density);
    const bool accepted = rng.uniform() < accept_prob;
    if (accepted) {
        point = std::move(proposal);
        log_density = proposed;
        ++block.accepted;
    }

    ++block.iteration;
    const double eta = ram_step_size(block.indices.size(), block.iteration, settings.exponent);
    const double gap = accept_prob - block.target;
    const double unorm = u.norm();
    if (gap != 0.0 && unorm > 0.0) {
        const Eigen::VectorXd v = std::sqrt(eta * std::abs(gap)) * step / unorm;
        if (!cholesky_rank_one(block.factor, v, gap > 0.0 ? 1.0 : -1.0)) ++block.skipped_adaptations;
    }
    return accepted;
}

/// Burn-in output: second-half moments feed the sampling-phase proposals.
struct BurnInSummary {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd last_point;
    double last_log_density = -std::numeric_limits<double>::infinity();
    std::vector<RamBlock> blocks;
    std::vector<double> acceptance;
    std::size_t iterations = 0;
};

/// RAM burn-in over all blocks in turn. Moments are taken from the second half.
template <class LogDensity>
BurnInSummary run_burnin(LogDensity&& log_density_fn, Eigen::VectorXd start, const BlockScheme& scheme,
                         std::size_t n_burn, Rng& rng, const RamSettings& settings = {},
                         std::size_t min_accepted = 100) {
    const auto dim = start.size();
    scheme.validate(static_cast<std::size_t>(dim));
    if (n_burn < 2) throw Error(ErrorKind::Config, "burn-in needs at least 2 iterations");
    double current = log_density_fn(start);
    if (!std::isfinite(current)) throw Error(ErrorKind::Domain, "initial point has zero posterior density");

    BurnInSummary s;
    for (const auto& b : scheme.blocks) s.blocks.push_back(RamBlock::make(b, settings.initial_scale));
    Eigen::VectorXd point = std::move(start);

    const std::size_t keep_from = n_burn / 2;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(dim, dim);
    std::size_t kept = 0;
    for (std::size_t it = 0; it < n_burn; ++it) {
        for (auto& block : s.blocks) ram_step(block, point, current, log_density_fn, rng, settings);
        if (it >= keep_from) {
            ++kept;
            const Eigen::VectorXd delta = point - mean;
            mean += delta / static_cast<double>(kept);
            m2 += delta * (point - mean).transpose();
        }
    }
    s.mean = mean;
    s.covariance = kept > 1 ? Eigen::MatrixXd(m2 / static_cast<double>(kept - 1)) : Eigen::MatrixXd(m2);
    s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
    s.last_point = point;
    s.last_log_density = current;
    s.iterations = n_burn;
    for (const auto& b : s.blocks) {
        s.acceptance.push_back(static_cast<double>(b.accepted) / static_cast<double>(n_burn));
        if (b.accepted < std::min(min_accepted, n_burn))
            throw Error(ErrorKind::AdaptationFailure,
                        "block with " + std::to_string(b.indices.size()) + " parameters accepted only " +
                            std::to_string(b.accepted) + " burn-in draws");
    }
    return s;
}

/// Three-component scale mixture for the sampling-phase random walk.
struct MixtureProposal {
    std::array<double, 3> scales{1.0, 100.0, 0.01};
    std::array<double, 3> weights{0.85, 0.05, 0.10};
    /// Multiply the block covariance by 2.38^2 / d.
    bool dimension_scaling = true;
};

struct SamplingResult {
    /// Rows are iterations, on the sampler's (packed) scale.
    Eigen::MatrixXd draws;
    std::vector<double> acceptance;
};

/// Cholesky factor of a covariance, adding a ridge (starting at 1e-10) when
/// the matrix is not numerically positive definite.
inline Eigen::MatrixXd ridge_cholesky(Eigen::MatrixXd cov) {
    cov = 0.5 * (cov + cov.transpose());
    double ridge = 1e-10;
    for (int attempt = 0; attempt < 40; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) return llt.matrixL();
        cov.diagonal().array() += ridge;
        ridge *= 10.0;
    }
    throw Error(ErrorKind::Domain, "proposal covariance cannot be repaired");
}

/// Block-wise random-walk Metropolis from the end of burn-in, proposal
/// covariance C_i * (2.38^2/d) * Sigma_block with C_i drawn from the mixture.
template <class LogDensity>
SamplingResult run_sampling(LogDensity&& log_density_fn, const BurnInSummary& burnin, const BlockScheme& scheme,
                            std::size_t n_samp, Rng& rng, const MixtureProposal& mixture = {}) {
    const auto dim = burnin.last_point.size();
    scheme.validate(static_cast<std::size_t>(dim));
    std::vector<Eigen::MatrixXd> factors;
    for (const auto& b : scheme.blocks) {
        const auto d = static_cast<Eigen::Index>(b.size());
        Eigen::MatrixXd cov(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                cov(i, j) = burnin.covariance(static_cast<Eigen::Index>(b[i]), static_cast<Eigen::Index>(b[j]));
        if (mixture.dimension_scaling) cov *= 2.38 * 2.38 / static_cast<double>(d);
        factors.push_back(ridge_cholesky(cov));
    }
    const double wsum = mixture.weights[0] + mixture.weights[1] + mixture.weights[2];

    SamplingResult out;
    out.draws.resize(static_cast<Eigen::Index>(n_samp), dim);
    std::vector<std::size_t> accepted(scheme.blocks.size(), 0);
    Eigen::VectorXd point = burnin.last_point;
    double current = burnin.last_log_density;
    for (std::size_t it = 0; it < n_samp; ++it) {
        for (std::size_t bi = 0; bi < scheme.blocks.size(); ++bi) {
            const auto& b = scheme.blocks[bi];
            const double pick = rng.uniform() * wsum;
            const double scale = pick < mixture.weights[0]                          ? mixture.scales[0]
                                 : pick < mixture.weights[0] + mixture.weights[1] ? mixture.scales[1]
                                                                                  : mixture.scales[2];
            const auto d = static_cast<Eigen::Index>(b.size());
            Eigen::VectorXd z(d);
            for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
            const Eigen::VectorXd step = std::sqrt(scale) * Eigen::VectorXd(factors[bi].triangularView<Eigen::Lower>() * z);
            Eigen::VectorXd proposal = point;
            for (Eigen::Index i = 0; i < d; ++i) proposal(static_cast<Eigen::Index>(b[i])) += step(i);
            const double proposed = log_density_fn(proposal);
            if (std::isfinite(proposed) && (proposed >= current || rng.uniform() < std::exp(proposed - current))) {
                point = std::move(proposal);
                current = proposed;
                ++accepted[bi];
            }
        }
        out.draws.row(static_cast<Eigen::Index>(it)) = point.transpose();
    }
    for (auto a : accepted) out.acceptance.push_back(n_samp ? static_cast<double>(a) / static_cast<double>(n_samp) : 0.0);
    return out;
}

/// Log prior up to a constant: flat on unbounded coefficients,
/// prod 1/sigma2_u,k, 1/nu^2, restricted to the admissible region.
inline double log_prior(const ModelParams& p) {
    if (!admissible(p)) return -std::numeric_limits<double>::infinity();
    double lp = 0.0;
    for (const auto& m : p.measures) lp -= std::log(m.sigma2_u);
    const double nu = degrees_of_freedom(p.dist);
    if (std::isfinite(nu)) lp -= 2.0 * std::log(nu);
    return lp;
}

/// Log posterior density of the packed vector (likelihood + prior + Jacobian).
inline double log_posterior_packed(std::span<const double> z, const ModelData& data, const ParamLayout& L) {
    const auto p = unpack(z, L.measures, L.dist);
    const double lp = log_prior(p);
    if (!std::isfinite(lp)) return lp;
    const double ll = log_likelihood(p, data);
    if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
    return ll + lp + log_jacobian(p);
}

/// Moves sigma2_u, nu and lambda strictly inside their bounds.
inline ModelParams repair_initial(ModelParams p) {
    for (auto& m : p.measures)
        if (!(m.sigma2_u > 1e-8)) m.sigma2_u = 1e-8;
    std::visit(
        [](auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (!std::is_same_v<D, Normal>) d.nu = std::clamp(d.nu, kNuLower + 1e-3, kNuUpper - 1e-3);
            if constexpr (std::is_same_v<D, SkewT>) d.lambda = std::clamp(d.lambda, -1.0 + 1e-6, 1.0 - 1e-6);
        },
        p.dist);
    return p;
}

struct McmcConfig {
    std::size_t n_burn = 20000;
    std::size_t n_samp = 10000;
    int blocks = 4;
    std::uint64_t seed = 0;
    std::size_t chains = 1;
    std::size_t threads = 1;
    std::size_t min_accepted = 100;
    RamSettings ram;
    MixtureProposal mixture;
};

/// Post-burn-in draws on the natural parameter scale.
struct Chain {
    ParamLayout layout;
    std::vector<std::string> names;
    /// iterations x parameters
    Eigen::MatrixXd draws;
    std::vector<double> acceptance;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(draws.rows()); }

    ModelParams params(std::size_t i) const {
        const Eigen::VectorXd row = draws.row(static_cast<Eigen::Index>(i)).transpose();
        return from_natural(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), layout.measures,
                            layout.dist);
    }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(size());
        for (std::size_t i = 0; i < size(); ++i) c[i] = draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        return c;
    }
};

/// Model-level burn-in from `init` (repaired into the admissible region).
inline BurnInSummary run_burnin(const ModelData& data, const ModelParams& init, const BlockScheme& scheme,
                                std::size_t n_burn, std::uint64_t seed, const RamSettings& settings = {},
                                std::size_t min_accepted = 100) {
    const auto start = repair_initial(init);
    const auto L = layout_of(start);
    const auto z = pack(start);
    Rng rng(seed);
    auto density = [&](const Eigen::VectorXd& x) {
        return log_posterior_packed(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), data, L);
    };
    return run_burnin(density, Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())), scheme,
                      n_burn, rng, settings, min_accepted);
}

/// Model-level sampling phase; draws are converted to the natural scale.
inline Chain run_sampling(const ModelData& data, const ParamLayout& L, const BurnInSummary& burnin,
                          const BlockScheme& scheme, std::size_t n_samp, std::uint64_t seed,
                          const MixtureProposal& mixture = {}) {
    Rng rng(seed);
    auto density = [&](const Eigen::VectorXd& x) {
        return log_posterior_packed(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), data, L);
    };
    auto sampled = run_sampling(density, burnin, scheme, n_samp, rng, mixture);
    Chain chain;
    chain.layout = L;
    chain.names = L.names();
    chain.seed = seed;
    chain.acceptance = sampled.acceptance;
    chain.draws.resize(sampled.draws.rows(), sampled.draws.cols());
    for (Eigen::Index i = 0; i < sampled.draws.rows(); ++i) {
        const Eigen::VectorXd row = sampled.draws.row(i).transpose();
        const auto p = unpack(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), L.measures, L.dist);
        const auto nat = to_natural(p);
        for (std::size_t j = 0; j < nat.size(); ++j) chain.draws(i, static_cast<Eigen::Index>(j)) = nat[j];
    }
    return chain;
}

struct PosteriorResult {
    ParamLayout layout;
    std::vector<Chain> chains;
    std::vector<BurnInSummary> burnin;
    DiagnosticsReport diagnostics;

    /// Posterior mean across all chains, natural scale, layout order.
    std::vector<double> mean() const {
        std::vector<double> m(layout.size(), 0.0);
        std::size_t count = 0;
        for (const auto& c : chains) {
            for (std::size_t j = 0; j < m.size(); ++j) m[j] += c.draws.col(static_cast<Eigen::Index>(j)).sum();
            count += c.size();
        }
        for (auto& v : m) v /= static_cast<double>(count);
        return m;
    }

    std::vector<double> stddev() const {
        const auto mu = mean();
        std::vector<double> s(layout.size(), 0.0);
        std::size_t count = 0;
        for (const auto& c : chains) {
            for (std::size_t j = 0; j < s.size(); ++j)
                s[j] += (c.draws.col(static_cast<Eigen::Index>(j)).array() - mu[j]).square().sum();
            count += c.size();
        }
        for (auto& v : s) v = std::sqrt(v / static_cast<double>(count > 1 ? count - 1 : 1));
        return s;
    }
};

/// R-hat (when there are at least 2 chains), ESS and autocorrelation time per parameter.
inline DiagnosticsReport diagnose(const std::vector<Chain>& chains) {
    DiagnosticsReport rep;
    if (chains.empty()) return rep;
    const auto names = chains.front().names;
    for (std::size_t j = 0; j < names.size(); ++j) {
        std::vector<std::vector<double>> cols;
        for (const auto& c : chains) cols.push_back(c.column(j));
        std::vector<std::span<const double>> spans(cols.begin(), cols.end());
        ParamDiagnostics pd;
        pd.name = names[j];
        if (cols.front().size() >= 50) {
            const auto ess = effective_sample_size(spans);
            pd.n_eff = ess.n_eff;
            pd.act = ess.act;
            pd.degenerate = ess.degenerate;
        }
        if (spans.size() >= 2 && cols.front().size() >= 10) {
            const auto r = gelman_rubin(spans);
            pd.degenerate = pd.degenerate || r.degenerate;
            if (!r.degenerate) pd.rhat = r.value;
        }
        rep.params.push_back(pd);
    }
    return rep;
}

/// Burn-in then sampling for each chain (seeds derived from config.seed),
/// with diagnostics over all chains.
inline PosteriorResult estimate(const ModelData& data, const ModelParams& init, const McmcConfig& config) {
    if (config.chains == 0) throw Error(ErrorKind::Config, "need at least one chain");
    const auto L = layout_of(init);
    const auto scheme = BlockScheme::for_model(L, config.blocks);
    PosteriorResult result;
    result.layout = L;
    result.chains.resize(config.chains);
    result.burnin.resize(config.chains);
    parallel_for(config.chains, config.threads, [&](std::size_t c) {
        const auto chain_seed = derive_seed(config.seed, c);
        result.burnin[c] = run_burnin(data, init, scheme, config.n_burn, derive_seed(chain_seed, 0), config.ram,
                                      config.min_accepted);
        result.chains[c] = run_sampling(data, L, result.burnin[c], scheme, config.n_samp, derive_seed(chain_seed, 1),
                                        config.mixture);
    });
    result.diagnostics = diagnose(result.chains);
    return result;
}

}  // namespace revar
