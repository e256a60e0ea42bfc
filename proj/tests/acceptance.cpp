// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <sys/wait.h>

#include "revar/revar.hpp"

using namespace revar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// Density from the log-pdf, integrated on (lo, hi) with infinite ends allowed.
double integrate(const std::function<double(double)>& f, double lo, double hi) {
    if (std::isinf(lo) && std::isinf(hi)) return integrate(f, lo, 0.0) + integrate(f, 0.0, hi);
    if (std::isinf(lo)) {
        boost::math::quadrature::exp_sinh<double> q;
        return q.integrate([&](double u) { return f(hi - u); }, 0.0, std::numeric_limits<double>::infinity());
    }
    if (std::isinf(hi)) {
        boost::math::quadrature::exp_sinh<double> q;
        return q.integrate([&](double u) { return f(lo + u); }, 0.0, std::numeric_limits<double>::infinity());
    }
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate(f, lo, hi);
}

// Splits the range at the skew-t knot so each piece is smooth.
double integrate_dist(const ErrorDist& d, const std::function<double(double)>& g, double lo, double hi) {
    auto f = [&](double x) {
        const double v = g(x) * std::exp(log_pdf(d, x));
        return std::isfinite(v) ? v : 0.0;
    };
    if (const auto* s = std::get_if<SkewT>(&d)) {
        const auto k = skewt_constants(s->nu, s->lambda);
        const double knot = -k.a / k.b;
        if (knot > lo && knot < hi) return integrate(f, lo, knot) + integrate(f, knot, hi);
    }
    return integrate(f, lo, hi);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

Outcome ac1() {
    const auto t0 = Clock::now();
    const ErrorDist d = SkewT{4.4, 0.5};
    const double mass = integrate_dist(d, [](double) { return 1.0; }, -kInf, kInf);
    const double mean = integrate_dist(d, [](double x) { return x; }, -kInf, kInf);
    const double second = integrate_dist(d, [](double x) { return x * x; }, -kInf, kInf);
    const double var = second - mean * mean;
    const double secs = seconds_since(t0);
    const bool ok = std::abs(mass - 1) < 1e-6 && std::abs(mean) < 1e-6 && std::abs(var - 1) < 1e-5 && secs < 1.0;
    return {ok, fmt("|mass-1|=%.2e |mean|=%.2e |var-1|=%.2e time=%.3fs", std::abs(mass - 1), std::abs(mean),
                    std::abs(var - 1), secs)};
}

Outcome ac2() {
    double worst = 0.0;
    for (double nu : {4.4, 6.0, 10.0, 30.0}) {
        const ErrorDist s = SkewT{nu, 0.0}, t = StudentT{nu};
        for (int i = 1; i <= 99; ++i) {
            const double u = i / 100.0;
            const double x = -4.9 + 0.1 * (i - 1);
            worst = std::max(worst, std::abs(log_pdf(s, x) - log_pdf(t, x)));
            worst = std::max(worst, std::abs(quantile(s, u) - quantile(t, u)));
            worst = std::max(worst, std::abs(tail_expectation(s, u) - tail_expectation(t, u)));
        }
    }
    return {worst < 1e-10, fmt("max abs diff %.2e over log-pdf, quantile, tail expectation", worst)};
}

Outcome ac3() {
    const std::vector<std::pair<std::string, ErrorDist>> dists{{"normal", Normal{}},
                                                                {"t(4.4)", StudentT{4.4}},
                                                                {"t(10)", StudentT{10.0}},
                                                                {"skt(4.4,0.5)", SkewT{4.4, 0.5}},
                                                                {"skt(4.4,-0.5)", SkewT{4.4, -0.5}}};
    double worst = 0.0;
    for (const auto& [name, d] : dists)
        for (double a : {0.01, 0.025}) {
            const double q = quantile(d, a);
            const double numeric = integrate_dist(d, [](double x) { return x; }, -kInf, q) / a;
            worst = std::max(worst, std::abs(numeric - tail_expectation(d, a)));
        }
    return {worst < 1e-6, fmt("max |closed form - quadrature| = %.2e", worst)};
}

// Acceptance of a random walk with proposal c^2 I on a standard d-dimensional normal.
double rw_acceptance(double c, int d) {
    std::mt19937_64 g(123);
    std::normal_distribution<double> N;
    double acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double diff = 0;
        for (int k = 0; k < d; ++k) {
            const double x = N(g), y = x + c * N(g);
            diff += y * y - x * x;
        }
        acc += std::min(1.0, std::exp(-0.5 * diff));
    }
    return acc / n;
}

double optimal_scale(double target, int d) {
    double lo = 0.05, hi = 10.0;
    for (int i = 0; i < 30; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rw_acceptance(mid, d) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct RamCheck {
    double rate = 0, rel = 0;
};

RamCheck ram_on_gaussian(const Eigen::MatrixXd& cov, std::uint64_t seed) {
    const auto d = cov.rows();
    const Eigen::MatrixXd precision = cov.inverse();
    auto target = [&](const Eigen::VectorXd& x) { return -0.5 * x.dot(precision * x); };
    std::vector<std::size_t> idx(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto block = RamBlock::make(idx, 1.0);
    Rng rng(seed);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    double lp = target(x);
    const std::size_t total = 100000, skip = 20000;
    std::size_t late = 0;
    for (std::size_t i = 1; i <= total; ++i)
        if (ram_step(block, x, lp, target, rng) && i > skip) ++late;
    const double c = optimal_scale(block.target, static_cast<int>(d));
    const Eigen::MatrixXd optimal = c * c * cov;
    const Eigen::MatrixXd ss = block.factor * block.factor.transpose();
    return {static_cast<double>(late) / static_cast<double>(total - skip), (ss - optimal).norm() / optimal.norm()};
}

Outcome ac4() {
    const auto t0 = Clock::now();
    Eigen::MatrixXd c2(2, 2);
    c2 << 2.0, 0.9, 0.9, 1.0;
    std::mt19937_64 g(11);
    std::normal_distribution<double> N;
    Eigen::MatrixXd A(5, 5);
    for (int i = 0; i < 25; ++i) A.data()[i] = N(g);
    const Eigen::MatrixXd c5 = 0.3 * A * A.transpose() + Eigen::MatrixXd::Identity(5, 5);
    const auto r2 = ram_on_gaussian(c2, 1);
    const auto r5 = ram_on_gaussian(c5, 2);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(r2.rate - 0.35) <= 0.05 && std::abs(r5.rate - 0.234) <= 0.05 && r2.rel < 0.25 &&
                    r5.rel < 0.25 && secs < 30.0;
    std::ostringstream s;
    s << fmt("2-D acc %.3f rel %.3f; 5-D acc %.3f rel %.3f", r2.rate, r2.rel, r5.rate, r5.rel) << fmt("; time %.1fs", secs);
    return {ok, s.str()};
}

Outcome ac5() {
    const auto t0 = Clock::now();
    const auto truth = simulation_study_params();
    const std::size_t reps = 20;
    double beta_sum = 0, lambda_sum = 0;
    std::size_t mcmc_better = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto data = simulate(truth, 2000, derive_seed(2024, r)).as_model_data();
        const auto init = default_initial_params(1, DistKind::SkewT);
        McmcConfig mc;
        mc.n_burn = 5000;
        mc.n_samp = 2500;
        mc.seed = derive_seed(7, r);
        const auto post = estimate(data, init, mc);
        const auto m = post.mean();
        MLOptions opt;
        opt.seed = r;
        const auto ml = fit_ml(data, init, opt);
        const double beta_mcmc = m[2];
        const double beta_ml = ml.params.beta;
        beta_sum += beta_mcmc;
        lambda_sum += m.back();
        if (std::abs(beta_mcmc - truth.beta) < std::abs(beta_ml - truth.beta)) ++mcmc_better;
        std::printf("  AC5 rep %2zu: beta mcmc %.4f ml %.4f, lambda mcmc %.4f\n", r, beta_mcmc, beta_ml, m.back());
        std::fflush(stdout);
    }
    const double beta = beta_sum / reps, lambda = lambda_sum / reps;
    const double share = static_cast<double>(mcmc_better) / reps;
    const double secs = seconds_since(t0);
    const bool ok = beta >= 0.965 && beta <= 0.990 && lambda >= 0.45 && lambda <= 0.55 && share >= 0.70 && secs <= 3600;
    return {ok, fmt("mean beta %.4f, mean lambda %.4f, MCMC closer on beta in %.0f%% of replicates, time %.0fs", beta, lambda,
                    100 * share, secs)};
}

Outcome ac6() {
    const auto data = simulate(simulation_study_params(), 2000, 31).as_model_data();
    const auto init = default_initial_params(1, DistKind::SkewT);
    McmcConfig mc;
    mc.chains = 10;
    mc.seed = 5;
    const auto four = estimate(data, init, mc);
    mc.blocks = 1;
    const auto one = estimate(data, init, mc);
    double worst = 0.0;
    for (const auto& p : four.diagnostics.params) worst = std::max(worst, p.rhat ? *p.rhat : kInf);
    const auto nu_four = four.diagnostics.params[11].rhat.value_or(kInf);
    const auto nu_one = one.diagnostics.params[11].rhat.value_or(kInf);
    const bool ok = four.diagnostics.params.size() == 13 && worst < 1.1 && nu_one >= nu_four;
    return {ok, fmt("4-block max Rhat %.4f; Rhat(nu) 1 block %.4f vs 4 blocks %.4f", worst, nu_one, nu_four)};
}

Outcome ac7() {
    const double a = 0.025;
    const std::size_t series = 2000, n = 1000;
    const double z = detail::normal_quantile(a);
    std::size_t uc = 0, cc = 0, dq = 0, cc_n = 0, dq_n = 0;
    for (std::size_t s = 0; s < series; ++s) {
        std::mt19937_64 g(derive_seed(77, s));
        std::normal_distribution<double> N;
        std::vector<double> r(n), var(n);
        for (std::size_t t = 0; t < n; ++t) {
            const double sig = 0.01 * (1.0 + 0.5 * std::sin(static_cast<double>(t) / 40.0));
            r[t] = sig * N(g);
            var[t] = sig * z;
        }
        const auto hits = hit_series(r, var);
        uc += uc_test(hits, a).reject;
        const auto c = cc_test(hits, a);
        const auto d = dq_test(hits, var, a);
        if (!c.degenerate) {
            ++cc_n;
            cc += c.reject;
        }
        if (!d.degenerate) {
            ++dq_n;
            dq += d.reject;
        }
    }
    const double ru = static_cast<double>(uc) / series, rc = static_cast<double>(cc) / cc_n,
                 rd = static_cast<double>(dq) / dq_n;
    auto in = [](double v) { return v >= 0.03 && v <= 0.08; };
    return {in(ru) && in(rc) && in(rd), fmt("rejection UC %.4f CC %.4f DQ %.4f over %.0f series", ru, rc, rd, static_cast<double>(series))};
}

Outcome ac8() {
    const double a = 0.025;
    const std::size_t reps = 20, n = 250000;
    const double zq = detail::normal_quantile(a);
    const double ze = tail_expectation(Normal{}, a);
    std::size_t wins = 0;
    double tightest = kInf;
    for (std::size_t r = 0; r < reps; ++r) {
        std::mt19937_64 g(derive_seed(88, r));
        std::normal_distribution<double> N;
        std::vector<double> ret(n), sig(n);
        for (std::size_t t = 0; t < n; ++t) {
            sig[t] = 0.01 * std::exp(0.3 * std::sin(static_cast<double>(t) / 50.0));
            ret[t] = sig[t] * N(g);
        }
        auto scores = [&](double kv, double ke) {
            std::vector<double> v(n), e(n);
            for (std::size_t t = 0; t < n; ++t) {
                v[t] = kv * zq * sig[t];
                e[t] = ke * ze * sig[t];
            }
            return std::pair{fz_joint_loss(ret, v, e, a), al_log_score(ret, v, e, a)};
        };
        const auto truth = scores(1.0, 1.0);
        bool all = true;
        for (double k : {0.75, 0.9, 1.1, 1.25})
            for (const auto& [kv, ke] : {std::pair{k, 1.0}, std::pair{1.0, k}, std::pair{k, k}}) {
                if (ke * ze >= kv * zq) continue;  // FZ needs ES below VaR.
                const auto other = scores(kv, ke);
                all = all && truth.first < other.first && truth.second < other.second;
                tightest = std::min(tightest, std::min(other.first - truth.first, n * (other.second - truth.second)));
            }
        wins += all;
    }
    return {wins == reps, fmt("truth best in %.0f of %.0f replicates (smallest total-loss margin %.3g)", static_cast<double>(wins),
                                   static_cast<double>(reps), tightest)};
}

Outcome ac9() {
    std::vector<std::string> names;
    for (int m = 0; m < 20; ++m) names.push_back("m" + std::to_string(m));
    McsConfig cfg;
    cfg.level = 0.75;
    cfg.replications = 1000;
    std::normal_distribution<double> N;

    std::mt19937_64 g0(9);
    Eigen::MatrixXd same(500, 20);
    for (Eigen::Index t = 0; t < same.rows(); ++t) same.row(t).setConstant(N(g0));
    bool identical_ok = true;
    for (auto method : {McsMethod::R, McsMethod::SQ}) {
        cfg.method = method;
        const auto r = model_confidence_set(same, names, cfg);
        identical_ok = identical_ok && r.survivors.size() == 20;
        for (double p : r.p_values) identical_ok = identical_ok && p == 1.0;
    }

    // Twenty models with i.i.d. noise; the last one is the first plus 0.5 every day.
    const std::size_t reps = 50;
    std::size_t eliminated = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        std::mt19937_64 g(derive_seed(99, rep));
        Eigen::MatrixXd L(500, 20);
        for (Eigen::Index t = 0; t < L.rows(); ++t)
            for (Eigen::Index m = 0; m < 19; ++m) L(t, m) = N(g);
        L.col(19) = L.col(0).array() + 0.5;
        cfg.method = rep % 2 ? McsMethod::SQ : McsMethod::R;
        cfg.seed = rep;
        const auto r = model_confidence_set(L, names, cfg);
        eliminated += std::find(r.survivors.begin(), r.survivors.end(), 19u) == r.survivors.end();
    }
    const double share = static_cast<double>(eliminated) / reps;
    return {identical_ok && share >= 0.95, std::string("identical columns all kept with p=1: ") +
                                               (identical_ok ? "yes" : "no") +
                                               fmt("; shifted model eliminated in %.0f%% of replicates", 100 * share)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool run_cli(const std::string& args) {
    const std::string cmd = std::string(REVAR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

Outcome ac10() {
    const auto root = fs::temp_directory_path() / "revar_acceptance_pipeline";
    fs::remove_all(root);
    double slowest = 0.0;
    bool ran = true;
    for (const char* tag : {"a", "b"}) {
        const auto out = (root / tag).string();
        const std::string common = " --seed 42 --out " + out + " --set data.daily=" + out + "/daily.csv --set data.measures=" +
                                   out + "/measures.csv --set models=SkN:skewt:rvss,tN:t:rvss" +
                                   " --set rolling.forecasts=100 --set rolling.stride=25";
        const auto t0 = Clock::now();
        ran = ran && run_cli("simulate --n 2000 --seed 42 --out " + out);
        for (const char* step : {"estimate", "forecast", "backtest", "mcs"}) ran = ran && run_cli(std::string(step) + common);
        slowest = std::max(slowest, seconds_since(t0));
    }
    std::size_t files = 0, differing = 0;
    if (ran)
        for (const auto& e : fs::directory_iterator(root / "a")) {
            ++files;
            const auto other = root / "b" / e.path().filename();
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
        }
    const bool ok = ran && files > 0 && differing == 0 && slowest <= 600.0;
    if (ok) fs::remove_all(root);
    return {ok, std::string("pipeline ran: ") + (ran ? "yes" : "no") +
                    fmt("; %.0f files compared, %.0f differ; slowest run %.0fs", static_cast<double>(files),
                        static_cast<double>(differing), slowest)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"AC1 distribution correctness", ac1}, {"AC2 reduction identities", ac2}, {"AC3 ES oracles", ac3},
        {"AC4 RAM behaviour", ac4},           {"AC5 simulation recovery", ac5},  {"AC6 convergence suite", ac6},
        {"AC7 backtest size", ac7},           {"AC8 loss consistency", ac8},     {"AC9 MCS sanity", ac9},
        {"AC10 end-to-end determinism", ac10}};
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
