#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "revar/bootstrap.hpp"
#include "revar/error.hpp"
#include "revar/random.hpp"

namespace revar {

enum class McsMethod { R, SQ };

inline std::string_view to_string(McsMethod m) { return m == McsMethod::R ? "R" : "SQ"; }

inline McsMethod parse_mcs_method(std::string_view s) {
    if (s == "R" || s == "r") return McsMethod::R;
    if (s == "SQ" || s == "sq") return McsMethod::SQ;
    throw Error(ErrorKind::Config, "unknown MCS method '" + std::string(s) + "'");
}

struct McsConfig {
    McsMethod method = McsMethod::R;
    /// Confidence level; models with MCS p-value >= 1 - level survive.
    double level = 0.90;
    std::size_t replications = 1000;
    double mean_block = 20.0;
    std::uint64_t seed = 0;
};

struct McsResult {
    std::vector<std::string> models;
    /// Indices into `models`, first eliminated first; survivors last.
    std::vector<std::size_t> elimination_order;
    /// MCS p-value per model (input order).
    std::vector<double> p_values;
    std::vector<std::size_t> survivors;
    McsMethod method = McsMethod::R;
    double level = 0.90;
};

/// Model confidence set over a days x models loss matrix. Pairwise mean loss
/// differentials are studentised with a stationary-bootstrap variance; the R
/// statistic is max |t_ij|, SQ is the sum over pairs of t_ij^2. While EPA is
/// rejected the model with the largest max_j t_ij is removed (ties within
/// 1e-12 go to the lexicographically smallest id). MCS p-values are the
/// running maximum of the test p-values.
inline McsResult model_confidence_set(const Eigen::MatrixXd& losses, const std::vector<std::string>& models,
                                      const McsConfig& cfg) {
    const auto T = static_cast<std::size_t>(losses.rows());
    const auto M = static_cast<std::size_t>(losses.cols());
    if (M < 2) throw Error(ErrorKind::InsufficientData, "MCS needs at least two models");
    if (models.size() != M) throw Error(ErrorKind::Alignment, "model names do not match loss columns");
    if (T < 2) throw Error(ErrorKind::InsufficientData, "MCS needs at least two days");
    if (!losses.allFinite()) throw Error(ErrorKind::Domain, "loss matrix has non-finite cells");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw Error(ErrorKind::Config, "MCS level must lie in (0, 1)");
    if (cfg.replications < 10) throw Error(ErrorKind::Config, "MCS needs at least 10 bootstrap replications");

    McsResult out;
    out.models = models;
    out.method = cfg.method;
    out.level = cfg.level;
    out.p_values.assign(M, 1.0);

    // Bootstrap means per model; differentials of means are means of differentials.
    const Eigen::VectorXd mean = losses.colwise().mean().transpose();
    Eigen::MatrixXd boot(static_cast<Eigen::Index>(cfg.replications), static_cast<Eigen::Index>(M));
    Rng rng(cfg.seed);
    for (std::size_t b = 0; b < cfg.replications; ++b) {
        const auto idx = stationary_bootstrap_indices(T, cfg.mean_block, rng);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
        for (auto t : idx) acc += losses.row(static_cast<Eigen::Index>(t)).transpose();
        boot.row(static_cast<Eigen::Index>(b)) = (acc / static_cast<double>(T)).transpose();
    }
    const double scale = std::max(1.0, mean.cwiseAbs().maxCoeff());
    const double tiny = 1e-12 * scale;

    auto dbar = [&](std::size_t i, std::size_t j) { return mean(static_cast<Eigen::Index>(i)) - mean(static_cast<Eigen::Index>(j)); };
    auto dboot = [&](std::size_t b, std::size_t i, std::size_t j) {
        return boot(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) -
               boot(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) - dbar(i, j);
    };
    std::vector<double> sd(M * M, 0.0);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = i + 1; j < M; ++j) {
            double v = 0.0;
            for (std::size_t b = 0; b < cfg.replications; ++b) v += dboot(b, i, j) * dboot(b, i, j);
            sd[i * M + j] = sd[j * M + i] = std::sqrt(v / static_cast<double>(cfg.replications));
        }
    // Studentised differential; a zero-variance pair is +-infinity when the means differ, else 0.
    auto tstat = [&](double diff, std::size_t i, std::size_t j) {
        const double s = sd[i * M + j];
        if (s > tiny) return diff / s;
        if (std::abs(diff) <= tiny) return 0.0;
        return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    };
    auto combine = [&](double acc, double t) {
        return cfg.method == McsMethod::R ? std::max(acc, std::abs(t)) : acc + t * t;
    };

    std::vector<std::size_t> alive(M);
    for (std::size_t i = 0; i < M; ++i) alive[i] = i;
    double running = 0.0;
    while (alive.size() > 1) {
        double stat = 0.0;
        for (std::size_t a = 0; a < alive.size(); ++a)
            for (std::size_t c = a + 1; c < alive.size(); ++c)
                stat = combine(stat, tstat(dbar(alive[a], alive[c]), alive[a], alive[c]));
        double p = 1.0;
        if (stat > 0.0) {
            std::size_t exceed = 0;
            for (std::size_t b = 0; b < cfg.replications; ++b) {
                double bs = 0.0;
                for (std::size_t a = 0; a < alive.size(); ++a)
                    for (std::size_t c = a + 1; c < alive.size(); ++c) {
                        const std::size_t i = alive[a], j = alive[c];
                        bs = combine(bs, sd[i * M + j] > tiny ? dboot(b, i, j) / sd[i * M + j] : 0.0);
                    }
                if (bs >= stat) ++exceed;
            }
            p = static_cast<double>(exceed) / static_cast<double>(cfg.replications);
        }
        running = std::max(running, p);

        // Worst model: largest max_j t_ij, ties to the smallest id.
        std::size_t worst = alive.front();
        double worst_score = -std::numeric_limits<double>::infinity();
        for (auto i : alive) {
            double score = -std::numeric_limits<double>::infinity();
            for (auto j : alive)
                if (j != i) score = std::max(score, tstat(dbar(i, j), i, j));
            const bool tie = std::abs(score - worst_score) <= 1e-12 || score == worst_score;
            if ((!tie && score > worst_score) || (tie && models[i] < models[worst])) {
                worst = i;
                worst_score = score;
            }
        }
        out.p_values[worst] = running;
        out.elimination_order.push_back(worst);
        alive.erase(std::find(alive.begin(), alive.end(), worst));
    }
    out.elimination_order.push_back(alive.front());
    out.p_values[alive.front()] = 1.0;

    for (auto i : out.elimination_order)
        if (out.p_values[i] >= 1.0 - cfg.level) out.survivors.push_back(i);
    std::sort(out.survivors.begin(), out.survivors.end());
    return out;
}

}  // namespace revar
