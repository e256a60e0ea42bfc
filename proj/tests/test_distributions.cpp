#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "revar/distributions.hpp"

using namespace revar;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Hansen density transcribed directly, independent of the library code path.
double skewt_pdf_oracle(double z, double nu, double lam) {
    const double c = std::tgamma((nu + 1) / 2) / (std::sqrt(std::numbers::pi * (nu - 2)) * std::tgamma(nu / 2));
    const double a = 4 * lam * c * (nu - 2) / (nu - 1);
    const double b = std::sqrt(1 + 3 * lam * lam - a * a);
    const double s = z < -a / b ? 1 - lam : 1 + lam;
    const double w = (b * z + a) / s;
    return b * c * std::pow(1 + w * w / (nu - 2), -(nu + 1) / 2);
}

// Integral over [lo, hi] where either end may be infinite.
template <class F>
double integrate(F f, double lo, double hi) {
    if (std::isfinite(lo) && std::isfinite(hi)) {
        boost::math::quadrature::tanh_sinh<double> ts;
        return ts.integrate(f, lo, hi);
    }
    boost::math::quadrature::exp_sinh<double> es;
    if (std::isfinite(lo)) return es.integrate(f, lo, kInf);
    return es.integrate([&](double x) { return f(-x); }, -hi, kInf);
}

// Splits the real line at the skew-t mode so each piece is smooth.
template <class F>
double integrate_line(F f, double split) {
    return integrate(f, -kInf, split) + integrate(f, split, kInf);
}

double knot(double nu, double lam) {
    const auto k = skewt_constants(nu, lam);
    return -k.a / k.b;
}

struct Shape {
    double nu, lambda;
};

const std::vector<Shape> kShapes = {{4.4, 0.5}, {4.4, -0.5}, {6.0, 0.0}, {10.0, 0.3}, {30.0, -0.7}, {8.0, 0.9}};

}  // namespace

TEST(Distributions, NormalLogPdfAtZero) {
    EXPECT_NEAR(log_pdf(Normal{}, 0.0), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
}

TEST(Distributions, SkewTWithZeroLambdaIsStudentT) {
    for (double nu : {4.5, 7.0, 25.0})
        for (double e = -6.0; e <= 6.0; e += 0.25)
            EXPECT_NEAR(log_pdf(SkewT{nu, 0.0}, e), log_pdf(StudentT{nu}, e), 1e-12) << nu << " " << e;
}

TEST(Distributions, SkewTMatchesTranscribedDensity) {
    for (const auto& s : kShapes)
        for (double e = -5.0; e <= 5.0; e += 0.37)
            EXPECT_NEAR(std::exp(log_pdf(SkewT{s.nu, s.lambda}, e)), skewt_pdf_oracle(e, s.nu, s.lambda), 1e-12);
}

TEST(Distributions, SkewTIsAUnitVarianceDensity) {
    for (const auto& s : kShapes) {
        const SkewT d{s.nu, s.lambda};
        const double k = knot(s.nu, s.lambda);
        auto f = [&](double x) { return std::exp(log_pdf(d, x)); };
        const double mass = integrate_line(f, k);
        const double mean = integrate_line([&](double x) { return x * f(x); }, k);
        const double var = integrate_line([&](double x) { return x * x * f(x); }, k) - mean * mean;
        EXPECT_NEAR(mass, 1.0, 1e-6) << s.nu << " " << s.lambda;
        EXPECT_NEAR(mean, 0.0, 1e-6) << s.nu << " " << s.lambda;
        EXPECT_NEAR(var, 1.0, 1e-5) << s.nu << " " << s.lambda;
    }
}

TEST(Distributions, StudentTIsAUnitVarianceDensity) {
    const StudentT d{5.0};
    auto f = [&](double x) { return std::exp(log_pdf(d, x)); };
    EXPECT_NEAR(integrate_line(f, 0.0), 1.0, 1e-8);
    EXPECT_NEAR(integrate_line([&](double x) { return x * x * f(x); }, 0.0), 1.0, 1e-6);
}

TEST(Distributions, SkewnessFollowsLambdaSign) {
    for (double lam : {-0.5, 0.5}) {
        const SkewT d{8.0, lam};
        const double k = knot(8.0, lam);
        const double m3 = integrate_line(
            [&](double x) {
                const double v = x * x * x * std::exp(log_pdf(d, x));
                return std::isfinite(v) ? v : 0.0;
            },
            k);
        EXPECT_EQ(m3 > 0, lam > 0);
    }
}

TEST(Distributions, CdfMatchesIntegratedDensity) {
    const std::vector<ErrorDist> dists = {Normal{}, StudentT{5.0}, SkewT{4.4, 0.5}, SkewT{10.0, -0.3}};
    for (const auto& d : dists)
        for (double e : {-3.0, -1.2, -0.4, 0.0, 0.3, 1.7}) {
            auto f = [&](double x) { return std::exp(log_pdf(d, x)); };
            const auto* s = std::get_if<SkewT>(&d);
            const double k = s ? knot(s->nu, s->lambda) : kInf;
            const double num = e > k ? integrate(f, -kInf, k) + integrate(f, k, e) : integrate(f, -kInf, e);
            EXPECT_NEAR(cdf(d, e), num, 1e-8) << d.index() << " " << e;
        }
}

TEST(Distributions, SkewTCdfAtModeBoundary) {
    for (const auto& s : kShapes)
        EXPECT_NEAR(cdf(SkewT{s.nu, s.lambda}, knot(s.nu, s.lambda)), (1 - s.lambda) / 2, 1e-12);
}

TEST(Distributions, QuantileInvertsCdf) {
    const std::vector<ErrorDist> dists = {Normal{}, StudentT{4.5}, StudentT{50.0}, SkewT{4.4, 0.5}, SkewT{12.0, -0.8}};
    for (const auto& d : dists)
        for (double a : {0.01, 0.025, 0.5, 0.975}) EXPECT_NEAR(cdf(d, quantile(d, a)), a, 1e-8);
}

TEST(Distributions, SkewTQuantileAtKnotIsModeBoundary) {
    for (const auto& s : kShapes)
        EXPECT_NEAR(quantile(SkewT{s.nu, s.lambda}, (1 - s.lambda) / 2), knot(s.nu, s.lambda), 1e-10);
}

TEST(Distributions, NormalReferenceValues) {
    EXPECT_NEAR(quantile(Normal{}, 0.025), -1.959964, 1e-6);
    EXPECT_NEAR(tail_expectation(Normal{}, 0.025), -2.337803, 1e-6);
}

TEST(Distributions, LargeNuApproachesNormal) {
    // At 1% the unit-variance t(200) sits 7e-3 below the normal, so the grid starts at 2.5%.
    for (double a : {0.025, 0.05, 0.1, 0.5, 0.9, 0.975})
        EXPECT_NEAR(quantile(StudentT{200.0}, a), quantile(Normal{}, a), 5e-3);
}

TEST(Distributions, QuantileIsIncreasing) {
    const SkewT d{4.4, 0.5};
    double prev = -kInf;
    for (int i = 1; i < 200; ++i) {
        const double q = quantile(d, i / 200.0);
        EXPECT_GT(q, prev);
        prev = q;
    }
}

TEST(Distributions, SkewTConstantAIsOddInLambda) {
    for (double nu : {4.4, 9.0})
        for (double lam : {0.1, 0.5, 0.9}) EXPECT_NEAR(skewt_constants(nu, lam).a, -skewt_constants(nu, -lam).a, 1e-15);
    EXPECT_DOUBLE_EQ(skewt_constants(5.0, 0.0).a, 0.0);
    EXPECT_DOUBLE_EQ(skewt_constants(5.0, 0.0).b, 1.0);
}

TEST(Distributions, TailExpectationMatchesQuadrature) {
    const std::vector<ErrorDist> dists = {Normal{}, StudentT{4.5}, StudentT{20.0}, SkewT{4.4, 0.5}, SkewT{4.4, -0.5},
                                          SkewT{10.0, 0.3}};
    for (const auto& d : dists)
        for (double a : {0.01, 0.025, 0.05, 0.4, 0.8}) {
            const double q = quantile(d, a);
            const double num = integrate([&](double x) { return x * std::exp(log_pdf(d, x)); }, -kInf, q) / a;
            EXPECT_NEAR(tail_expectation(d, a), num, 1e-6) << d.index() << " " << a;
            EXPECT_LT(tail_expectation(d, a), q);
        }
}

TEST(Distributions, DomainErrors) {
    EXPECT_THROW(quantile(Normal{}, 0.0), Error);
    EXPECT_THROW(quantile(Normal{}, 1.0), Error);
    EXPECT_THROW(log_pdf(StudentT{2.0}, 0.0), Error);
    EXPECT_THROW(skewt_constants(5.0, 1.0), Error);
    try {
        tail_expectation(SkewT{1.5, 0.0}, 0.05);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Domain);
    }
}

TEST(Distributions, ParseKinds) {
    EXPECT_EQ(parse_dist_kind("SkN"), DistKind::SkewT);
    EXPECT_EQ(parse_dist_kind("t"), DistKind::StudentT);
    EXPECT_EQ(parse_dist_kind("normal"), DistKind::Normal);
    EXPECT_THROW(parse_dist_kind("cauchy"), Error);
    EXPECT_EQ(shape_count(DistKind::SkewT), 2u);
}
