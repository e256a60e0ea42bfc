#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "revar/error.hpp"

namespace revar {

/// Standard normal return error.
struct Normal {
    friend bool operator==(const Normal&, const Normal&) = default;
};

/// Student-t rescaled to unit variance (requires nu > 2).
struct StudentT {
    double nu = 10.0;
    friend bool operator==(const StudentT&, const StudentT&) = default;
};

/// Hansen skewed Student-t with zero mean and unit variance.
struct SkewT {
    double nu = 10.0;
    double lambda = 0.0;
    friend bool operator==(const SkewT&, const SkewT&) = default;
};

using ErrorDist = std::variant<Normal, StudentT, SkewT>;

enum class DistKind { Normal, StudentT, SkewT };

inline DistKind kind_of(const ErrorDist& d) { return static_cast<DistKind>(d.index()); }

inline std::string_view to_string(DistKind k) {
    switch (k) {
    case DistKind::Normal: return "normal";
    case DistKind::StudentT: return "t";
    case DistKind::SkewT: return "skewt";
    }
    return "?";
}

inline DistKind parse_dist_kind(std::string_view s) {
    if (s == "normal" || s == "n" || s == "NN") return DistKind::Normal;
    if (s == "t" || s == "student-t" || s == "tN") return DistKind::StudentT;
    if (s == "skewt" || s == "skew-t" || s == "SkN") return DistKind::SkewT;
    throw Error(ErrorKind::Config, "unknown error distribution '" + std::string(s) + "'");
}

/// Number of shape parameters (nu, lambda) carried by a distribution kind.
inline std::size_t shape_count(DistKind k) {
    return k == DistKind::Normal ? 0 : (k == DistKind::StudentT ? 1 : 2);
}

/// nu of a t or skew-t error; infinity for the normal.
inline double degrees_of_freedom(const ErrorDist& d) {
    if (auto* t = std::get_if<StudentT>(&d)) return t->nu;
    if (auto* s = std::get_if<SkewT>(&d)) return s->nu;
    return std::numeric_limits<double>::infinity();
}

struct SkewTConstants {
    double a = 0.0;
    double b = 1.0;
    double c = 0.0;
};

inline double student_log_norm(double nu) {
    return std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) - 0.5 * std::log(std::numbers::pi * (nu - 2.0));
}

/// a = 4 lambda c (nu-2)/(nu-1), b = sqrt(1 + 3 lambda^2 - a^2),
/// c = Gamma((nu+1)/2) / (sqrt(pi (nu-2)) Gamma(nu/2)).
inline SkewTConstants skewt_constants(double nu, double lambda) {
    if (!(nu > 2.0) || !(std::abs(lambda) < 1.0))
        throw Error(ErrorKind::Domain, "skew-t needs nu > 2 and |lambda| < 1");
    SkewTConstants k;
    k.c = std::exp(student_log_norm(nu));
    k.a = 4.0 * lambda * k.c * (nu - 2.0) / (nu - 1.0);
    const double b2 = 1.0 + 3.0 * lambda * lambda - k.a * k.a;
    if (!(b2 > 0.0)) throw Error(ErrorKind::Domain, "skew-t constant b^2 is not positive");
    k.b = std::sqrt(b2);
    return k;
}

namespace detail {

inline void check_nu(double nu) {
    if (!(nu > 2.0) || !std::isfinite(nu)) throw Error(ErrorKind::Domain, "degrees of freedom must exceed 2");
}

inline void check_prob(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Domain, "probability must lie in (0, 1)");
}

inline double t_cdf(double x, double nu) {
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

inline double t_quantile(double p, double nu) {
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

inline double t_density(double x, double nu) {
    return boost::math::pdf(boost::math::students_t_distribution<double>(nu), x);
}

inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

}  // namespace detail

/// Log-density of the unit-variance error at eps.
inline double log_pdf(const ErrorDist& dist, double eps) {
    return std::visit(
        [eps](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * eps * eps;
            } else if constexpr (std::is_same_v<D, StudentT>) {
                detail::check_nu(d.nu);
                return student_log_norm(d.nu) - 0.5 * (d.nu + 1.0) * std::log1p(eps * eps / (d.nu - 2.0));
            } else {
                const auto k = skewt_constants(d.nu, d.lambda);
                const double side = eps < -k.a / k.b ? 1.0 - d.lambda : 1.0 + d.lambda;
                const double z = (k.b * eps + k.a) / side;
                return std::log(k.b) + std::log(k.c) - 0.5 * (d.nu + 1.0) * std::log1p(z * z / (d.nu - 2.0));
            }
        },
        dist);
}

inline double cdf(const ErrorDist& dist, double eps) {
    return std::visit(
        [eps](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                return 0.5 * std::erfc(-eps / std::numbers::sqrt2);
            } else if constexpr (std::is_same_v<D, StudentT>) {
                detail::check_nu(d.nu);
                return detail::t_cdf(eps * std::sqrt(d.nu / (d.nu - 2.0)), d.nu);
            } else {
                const auto k = skewt_constants(d.nu, d.lambda);
                const double scale = std::sqrt(d.nu / (d.nu - 2.0));
                if (eps < -k.a / k.b)
                    return (1.0 - d.lambda) * detail::t_cdf(scale * (k.b * eps + k.a) / (1.0 - d.lambda), d.nu);
                return (1.0 - d.lambda) / 2.0 +
                       (1.0 + d.lambda) * (detail::t_cdf(scale * (k.b * eps + k.a) / (1.0 + d.lambda), d.nu) - 0.5);
            }
        },
        dist);
}

/// Inverse CDF; the skew-t uses the closed two-branch inverse.
inline double quantile(const ErrorDist& dist, double alpha) {
    detail::check_prob(alpha);
    return std::visit(
        [alpha](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                return detail::normal_quantile(alpha);
            } else if constexpr (std::is_same_v<D, StudentT>) {
                detail::check_nu(d.nu);
                return std::sqrt((d.nu - 2.0) / d.nu) * detail::t_quantile(alpha, d.nu);
            } else {
                const auto k = skewt_constants(d.nu, d.lambda);
                const double shrink = std::sqrt((d.nu - 2.0) / d.nu);
                const double knot = (1.0 - d.lambda) / 2.0;
                if (alpha < knot)
                    return (1.0 - d.lambda) / k.b * shrink * detail::t_quantile(alpha / (1.0 - d.lambda), d.nu) -
                           k.a / k.b;
                return (1.0 + d.lambda) / k.b * shrink *
                           detail::t_quantile(0.5 + (alpha - knot) / (1.0 + d.lambda), d.nu) -
                       k.a / k.b;
            }
        },
        dist);
}

namespace detail {

/// Integral of eps f(eps) over (-inf, q] for the skew-t.
inline double skewt_partial_moment(const SkewT& d, const SkewTConstants& k, double q) {
    const double nu = d.nu;
    const double knot = -k.a / k.b;
    auto kernel = [nu](double z) { return std::pow(1.0 + z * z / (nu - 2.0), (1.0 - nu) / 2.0); };
    const double lower_side = 1.0 - d.lambda;
    const double upper_side = 1.0 + d.lambda;
    const double factor = (nu - 2.0) / (1.0 - nu);
    if (q < knot) {
        const double z = (k.b * q + k.a) / lower_side;
        const double mass = lower_side * t_cdf(std::sqrt(nu / (nu - 2.0)) * z, nu);
        return k.c * lower_side * lower_side / k.b * factor * kernel(z) - k.a / k.b * mass;
    }
    const double mass_knot = lower_side / 2.0;
    const double at_knot = k.c * lower_side * lower_side / k.b * factor - k.a / k.b * mass_knot;
    const double z = (k.b * q + k.a) / upper_side;
    const double mass = upper_side * (t_cdf(std::sqrt(nu / (nu - 2.0)) * z, nu) - 0.5);
    return at_knot + k.c * upper_side * upper_side / k.b * factor * (kernel(z) - 1.0) - k.a / k.b * mass;
}

}  // namespace detail

/// E[eps | eps < quantile(alpha)] for a lower-tail probability alpha.
inline double tail_expectation(const ErrorDist& dist, double alpha) {
    detail::check_prob(alpha);
    return std::visit(
        [alpha](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                const double z = detail::normal_quantile(alpha);
                return -std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) / alpha;
            } else if constexpr (std::is_same_v<D, StudentT>) {
                if (!(d.nu > 2.0)) throw Error(ErrorKind::Domain, "tail expectation undefined for nu <= 2");
                const double t = detail::t_quantile(alpha, d.nu);
                return -std::sqrt((d.nu - 2.0) / d.nu) * detail::t_density(t, d.nu) / alpha * (d.nu + t * t) /
                       (d.nu - 1.0);
            } else {
                if (!(d.nu > 2.0)) throw Error(ErrorKind::Domain, "tail expectation undefined for nu <= 2");
                const auto k = skewt_constants(d.nu, d.lambda);
                const double q = quantile(d, alpha);
                return detail::skewt_partial_moment(d, k, q) / alpha;
            }
        },
        dist);
}

/// Inverse-CDF draw from a uniform variate in (0, 1).
inline double draw(const ErrorDist& dist, double uniform) { return quantile(dist, uniform); }

}  // namespace revar
