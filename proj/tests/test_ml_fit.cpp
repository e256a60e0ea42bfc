#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "revar/ml_fit.hpp"

using namespace revar;

namespace {

ModelParams normal_dgp() {
    auto p = simulation_study_params();
    p.dist = Normal{};
    return p;
}

}  // namespace

TEST(NelderMead, FindsRosenbrockMinimum) {
    auto rosen = [](std::span<const double> x) {
        return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    const auto r = nelder_mead(rosen, {-1.2, 1.0});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, TreatsNonFiniteAsInfinity) {
    auto f = [](std::span<const double> x) {
        return x[0] < 0 ? std::nan("") : (x[0] - 2) * (x[0] - 2) + x[1] * x[1];
    };
    const auto r = nelder_mead(f, {0.5, 0.5});
    EXPECT_NEAR(r.x[0], 2.0, 1e-4);
    EXPECT_TRUE(std::isfinite(r.value));
}

TEST(MLFit, HessianOfMeanUnderUnitVariance) {
    ModelParams p;
    p.gamma = {0.0};
    p.measures = {{0.0, 0.0, 0.0, 0.0, 1.0}};
    const auto d = simulate(p, 500, 2, 1.0).as_model_data();
    const auto H = packed_hessian(d, pack(p), 1, DistKind::Normal, 1e-4);
    EXPECT_NEAR(H(0, 0), -500.0, 1e-2);
}

TEST(MLFit, InitAtTruthNeverWorsens) {
    const auto p = simulation_study_params();
    const auto d = simulate(p, 1000, 4).as_model_data();
    MLOptions opt;
    opt.restarts = 1;
    const auto fit = fit_ml(d, p, opt);
    EXPECT_GE(fit.log_likelihood, log_likelihood(p, d) - 1e-6);
    EXPECT_TRUE(admissible(fit.params));
}

TEST(MLFit, DefaultStartRunsOnSkewTData) {
    const auto p = simulation_study_params();
    const auto d = simulate(p, 2000, 1).as_model_data();
    MLOptions opt;
    opt.restarts = 1;
    const auto fit = fit_ml(d, default_initial_params(1, DistKind::SkewT), opt);
    ASSERT_TRUE(std::isfinite(fit.log_likelihood));
    EXPECT_TRUE(admissible(fit.params));
    EXPECT_GT(fit.log_likelihood, fit.initial_log_likelihood);
    for (const auto& se : fit.std_errors)
        if (se) EXPECT_GT(*se, 0.0);
}

TEST(MLFit, RecoversBetaOnNormalData) {
    const auto truth = normal_dgp();
    int close = 0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto d = simulate(truth, 2000, derive_seed(77, rep)).as_model_data();
        MLOptions opt;
        opt.restarts = 1;
        opt.seed = rep;
        const auto fit = fit_ml(d, default_initial_params(1, DistKind::Normal), opt);
        if (std::abs(fit.params.beta - truth.beta) < 0.05) ++close;
    }
    EXPECT_GE(close, 16);
}
