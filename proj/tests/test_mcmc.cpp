#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "revar/mcmc.hpp"

using namespace revar;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Acceptance of a random walk with proposal c^2 I on a standard 2-D normal,
// by plain Monte Carlo on a fixed stream.
double rw_acceptance(double c) {
    std::mt19937_64 g(123);
    std::normal_distribution<double> N;
    double acc = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x1 = N(g), x2 = N(g), z1 = N(g), z2 = N(g);
        const double y1 = x1 + c * z1, y2 = x2 + c * z2;
        acc += std::min(1.0, std::exp(-0.5 * (y1 * y1 + y2 * y2 - x1 * x1 - x2 * x2)));
    }
    return acc / n;
}

double scale_for_acceptance(double target) {
    double lo = 0.1, hi = 10.0;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rw_acceptance(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Gaussian2 {
    Eigen::Matrix2d precision;
    double operator()(const Eigen::VectorXd& x) const { return -0.5 * x.dot(precision * x); }
};

}  // namespace

TEST(Mcmc, TargetAcceptanceByDimension) {
    EXPECT_EQ(target_acceptance(1), 0.44);
    EXPECT_EQ(target_acceptance(2), 0.35);
    EXPECT_EQ(target_acceptance(4), 0.35);
    EXPECT_EQ(target_acceptance(5), 0.234);
}

TEST(Mcmc, StepSizeSchedule) {
    EXPECT_DOUBLE_EQ(ram_step_size(3, 1), 1.0);
    EXPECT_NEAR(ram_step_size(3, 8), 0.75, 1e-15);
    EXPECT_NEAR(ram_step_size(1, 1000), 0.01, 1e-15);
}

TEST(Mcmc, CholeskyRankOneMatchesDirectProduct) {
    std::mt19937_64 g(5);
    std::normal_distribution<double> N;
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 16; ++i) A.data()[i] = N(g);
    const Eigen::MatrixXd M = A * A.transpose() + Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd L = M.llt().matrixL();
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = N(g);

    ASSERT_TRUE(cholesky_rank_one(L, x, 1.0));
    EXPECT_LT((L * L.transpose() - (M + x * x.transpose())).norm(), 1e-10);
    EXPECT_TRUE(L.isLowerTriangular());
    ASSERT_TRUE(cholesky_rank_one(L, 0.5 * x, -1.0));
    EXPECT_LT((L * L.transpose() - (M + 0.75 * x * x.transpose())).norm(), 1e-10);
    for (int i = 0; i < 4; ++i) EXPECT_GT(L(i, i), 0.0);

    const Eigen::MatrixXd before = L;
    EXPECT_FALSE(cholesky_rank_one(L, 100.0 * x, -1.0));
    EXPECT_EQ(L, before);
}

TEST(Mcmc, RamTunesToOptimalScaleOnGaussian) {
    Eigen::Matrix2d cov;
    cov << 2.0, 0.9, 0.9, 1.0;
    const Gaussian2 target{cov.inverse()};
    Rng rng(42);
    auto block = RamBlock::make({0, 1}, 1.0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    double lp = target(x);
    std::size_t late_accepts = 0;
    for (std::size_t i = 1; i <= 20000; ++i) {
        const bool a = ram_step(block, x, lp, target, rng);
        if (i > 5000 && a) ++late_accepts;
        ASSERT_GT(block.factor(0, 0), 0.0);
        ASSERT_GT(block.factor(1, 1), 0.0);
        ASSERT_EQ(block.factor(0, 1), 0.0);
    }
    const double rate = static_cast<double>(late_accepts) / 15000.0;
    EXPECT_GE(rate, 0.30);
    EXPECT_LE(rate, 0.40);

    const double c = scale_for_acceptance(0.35);
    const Eigen::Matrix2d optimal = c * c * cov;
    const Eigen::Matrix2d ss = block.factor * block.factor.transpose();
    EXPECT_LT((ss - optimal).norm() / optimal.norm(), 0.25) << ss << "\nvs\n" << optimal;
}

TEST(Mcmc, SamplerReproducesStandardNormal) {
    auto target = [](const Eigen::VectorXd& x) { return -0.5 * x(0) * x(0); };
    const auto scheme = BlockScheme::single(1);
    Rng rng(7);
    const auto burn = run_burnin(target, Eigen::VectorXd::Constant(1, 3.0), scheme, 5000, rng);
    const auto s = run_sampling(target, burn, scheme, 50000, rng);
    const double mean = s.draws.col(0).mean();
    const double var = (s.draws.col(0).array() - mean).square().sum() / 49999.0;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_GE(var, 0.9);
    EXPECT_LE(var, 1.1);
}

TEST(Mcmc, ChainInvariantToDensityConstant) {
    auto target = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
    auto shifted = [&](const Eigen::VectorXd& x) { return target(x) + 1234.5; };
    const auto scheme = BlockScheme::single(2);
    Rng r1(3), r2(3);
    const auto b1 = run_burnin(target, Eigen::VectorXd::Zero(2), scheme, 2000, r1);
    const auto b2 = run_burnin(shifted, Eigen::VectorXd::Zero(2), scheme, 2000, r2);
    // The shift only perturbs the last bits of exp(difference) fed into the adaptation.
    EXPECT_LT((b1.last_point - b2.last_point).cwiseAbs().maxCoeff(), 1e-9);
    const auto s1 = run_sampling(target, b1, scheme, 1000, r1);
    const auto s2 = run_sampling(shifted, b2, scheme, 1000, r2);
    EXPECT_LT((s1.draws - s2.draws).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Mcmc, BurnInRejectsStarvedBlocks) {
    auto target = [](const Eigen::VectorXd& x) { return x(0) == 0.0 ? 0.0 : kNegInf; };
    Rng rng(1);
    try {
        run_burnin(target, Eigen::VectorXd::Zero(1), BlockScheme::single(1), 500, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::AdaptationFailure);
    }
}

TEST(Mcmc, RidgeRepairsSingularCovariance) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(3, 3);
    const auto L = ridge_cholesky(cov);
    EXPECT_TRUE(L.allFinite());
    EXPECT_LT((L * L.transpose() - cov).norm(), 1e-4);
}

TEST(Mcmc, BlockSchemes) {
    const ParamLayout L{1, DistKind::SkewT};
    const auto four = BlockScheme::for_model(L, 4);
    ASSERT_EQ(four.blocks.size(), 4u);
    EXPECT_EQ(four.blocks[0].size(), 1u);
    EXPECT_EQ(four.blocks[1].size(), 6u);
    EXPECT_EQ(four.blocks[2].size(), 4u);
    EXPECT_EQ(four.blocks[3].size(), 2u);
    EXPECT_NO_THROW(four.validate(L.size()));
    EXPECT_EQ(BlockScheme::for_model({2, DistKind::Normal}, 4).blocks.size(), 3u);
    EXPECT_THROW(BlockScheme::for_model(L, 3), Error);
    BlockScheme overlap{{{0, 1}, {1, 2}}};
    EXPECT_THROW(overlap.validate(3), Error);
}

TEST(Mcmc, PriorExamples) {
    auto p = simulation_study_params();
    const double base = log_prior(p);
    auto q = p;
    q.mu = 2 * p.mu + 0.3;
    EXPECT_EQ(log_prior(q), base);
    q = p;
    q.measures[0].sigma2_u = 1.0;
    auto r = q;
    r.measures[0].sigma2_u = 2.0;
    EXPECT_NEAR(log_prior(r) - log_prior(q), -std::log(2.0), 1e-15);
    q.dist = SkewT{3.9, 0.5};
    EXPECT_EQ(log_prior(q), kNegInf);
}

TEST(Mcmc, RepairMovesStartInsideBounds) {
    auto p = default_initial_params(1, DistKind::SkewT);
    p.measures[0].sigma2_u = -1;
    p.dist = SkewT{2.0, 1.5};
    EXPECT_TRUE(admissible(repair_initial(p)));
}

class McmcOnSimulatedData : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        data_ = new ModelData(simulate(simulation_study_params(), 2000, 1).as_model_data());
        McmcConfig cfg;
        cfg.seed = 9;
        result_ = new PosteriorResult(estimate(*data_, default_initial_params(1, DistKind::SkewT), cfg));
    }
    static void TearDownTestSuite() {
        delete data_;
        delete result_;
    }
    static ModelData* data_;
    static PosteriorResult* result_;
};

ModelData* McmcOnSimulatedData::data_ = nullptr;
PosteriorResult* McmcOnSimulatedData::result_ = nullptr;

TEST_F(McmcOnSimulatedData, BlockAcceptanceNearTargets) {
    const auto& burn = result_->burnin.front();
    for (std::size_t b = 0; b < burn.blocks.size(); ++b)
        EXPECT_NEAR(burn.acceptance[b], burn.blocks[b].target, 0.1) << b;
}

TEST_F(McmcOnSimulatedData, ChainLengthAndSupport) {
    const auto& c = result_->chains.front();
    EXPECT_EQ(c.size(), 10000u);
    for (std::size_t i = 0; i < c.size(); i += 7) ASSERT_TRUE(admissible(c.params(i)));
}

TEST_F(McmcOnSimulatedData, BetaNearTruth) {
    const auto m = result_->mean();
    const auto s = result_->stddev();
    EXPECT_LT(std::abs(m[2] - 0.98), 3 * s[2]) << m[2] << " sd " << s[2];
}

TEST_F(McmcOnSimulatedData, DeterministicUnderSeed) {
    McmcConfig cfg;
    cfg.seed = 9;
    cfg.n_burn = 1000;
    cfg.n_samp = 200;
    cfg.min_accepted = 10;
    const auto init = default_initial_params(1, DistKind::SkewT);
    const auto a = estimate(*data_, init, cfg);
    const auto b = estimate(*data_, init, cfg);
    EXPECT_EQ(a.chains.front().draws, b.chains.front().draws);
    cfg.blocks = 1;
    const auto one = estimate(*data_, init, cfg);
    EXPECT_EQ(one.chains.front().size(), 200u);
    EXPECT_EQ(one.burnin.front().blocks.size(), 1u);
}
