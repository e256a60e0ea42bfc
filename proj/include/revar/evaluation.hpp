#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "revar/backtest.hpp"
#include "revar/csv.hpp"
#include "revar/forecast.hpp"
#include "revar/mcs.hpp"

namespace revar {

/// Forecast CSV: `date,alpha,var,es,return,model`.
inline void write_forecast_csv(std::ostream& out, const std::vector<ForecastRecord>& records) {
    out << "date,alpha,var,es,return,model\n";
    for (const auto& r : records)
        out << r.date.text() << ',' << csv::format_double(r.alpha) << ',' << csv::format_double(r.var) << ','
            << csv::format_double(r.es) << ',' << csv::format_double(r.ret) << ',' << r.model << '\n';
}

inline std::vector<ForecastRecord> parse_forecast_csv(std::istream& in) {
    csv::Reader reader(in);
    csv::expect_header(reader, {"date", "alpha", "var", "es", "return", "model"});
    std::vector<ForecastRecord> out;
    std::string line;
    while (reader.next(line)) {
        const auto n = reader.line_number();
        const auto f = csv::split(line);
        if (f.size() != 6) throw ParseError(n, "expected 6 fields, got " + std::to_string(f.size()));
        ForecastRecord r;
        auto date = Date::try_parse(f[0]);
        if (!date) throw ParseError(n, "malformed date '" + std::string(f[0]) + "'");
        r.date = *date;
        double* targets[] = {&r.alpha, &r.var, &r.es, &r.ret};
        for (std::size_t i = 0; i < 4; ++i) {
            auto v = csv::to_double(f[i + 1]);
            if (!v || !std::isfinite(*v)) throw ParseError(n, "malformed number '" + std::string(f[i + 1]) + "'");
            *targets[i] = *v;
        }
        r.model = std::string(csv::trim(f[5]));
        if (r.model.empty()) throw ParseError(n, "empty model id");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<ForecastRecord> load_forecast_csv(const std::string& path) {
    auto in = csv::open_input(path);
    return parse_forecast_csv(in);
}

/// Model ids in sorted order.
inline std::vector<std::string> model_ids(const std::vector<ForecastRecord>& records) {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.model);
    return {ids.begin(), ids.end()};
}

/// Forecasts of one model at one alpha, with the VaR grid of the
/// multi-quantile backtest when every grid level is present.
struct AlphaSeries {
    std::string model;
    double alpha = 0.0;
    std::vector<Date> dates;
    std::vector<double> returns, var, es;
    /// grid[j][t] = return-side VaR at level 1 - u_j.
    std::vector<std::vector<double>> grid;

    std::size_t size() const noexcept { return dates.size(); }
    bool has_grid() const noexcept { return !grid.empty(); }
};

inline AlphaSeries collect_series(const std::vector<ForecastRecord>& records, const std::string& model, double alpha,
                                  std::size_t mqr_p) {
    AlphaSeries s;
    s.model = model;
    s.alpha = alpha;
    const auto levels = mqr_return_levels(alpha, mqr_p);
    std::map<Date, const ForecastRecord*> main;
    std::vector<std::map<Date, double>> grid(levels.size());
    for (const auto& r : records) {
        if (r.model != model) continue;
        if (r.alpha == alpha && !main.emplace(r.date, &r).second)
            throw Error(ErrorKind::Validation, "duplicate forecast for " + model + " on " + r.date.text());
        for (std::size_t j = 0; j < levels.size(); ++j)
            if (r.alpha == levels[j]) grid[j][r.date] = r.var;
    }
    if (main.empty())
        throw Error(ErrorKind::InsufficientData, "no forecasts for model " + model + " at alpha " + csv::format_double(alpha));
    bool full = true;
    for (const auto& [date, r] : main) {
        s.dates.push_back(date);
        s.returns.push_back(r->ret);
        s.var.push_back(r->var);
        s.es.push_back(r->es);
        for (const auto& g : grid) full = full && g.contains(date);
    }
    if (full) {
        s.grid.resize(levels.size());
        for (std::size_t j = 0; j < levels.size(); ++j)
            for (const auto& d : s.dates) s.grid[j].push_back(grid[j].at(d));
    }
    return s;
}

struct BacktestConfig {
    std::size_t mqr_p = 6;
    std::size_t replications = 1000;
    double mean_block = 20.0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct AlphaBacktest {
    std::string model;
    double alpha = 0.0;
    std::size_t n = 0;
    double vrate = 0.0;
    TestResult uc, cc, dq;
    std::optional<EsrResult> esr;
    std::optional<MqrResult> mqr;
    std::string esr_note, mqr_note;
    double quantile_loss = 0.0;
    double fz_loss = 0.0;
    double al_score = 0.0;
};

/// Full battery for one model and alpha. Bootstrap seeds are derived from the
/// model id and alpha so results do not depend on evaluation order.
inline AlphaBacktest evaluate(const AlphaSeries& s, const BacktestConfig& cfg) {
    AlphaBacktest b;
    b.model = s.model;
    b.alpha = s.alpha;
    b.n = s.size();
    const auto hits = hit_series(s.returns, s.var);
    b.vrate = vrate(hits);
    b.uc = uc_test(hits, s.alpha);
    b.cc = cc_test(hits, s.alpha);
    b.dq = dq_test(hits, s.var, s.alpha);
    b.quantile_loss = quantile_loss(s.returns, s.var, s.alpha);
    b.fz_loss = fz_joint_loss(s.returns, s.var, s.es, s.alpha);
    b.al_score = al_log_score(s.returns, s.var, s.es, s.alpha);

    const std::string tag = s.model + "/" + csv::format_double(s.alpha);
    if (s.size() >= 250) {
        BootstrapSpec boot{cfg.replications, cfg.mean_block, derive_seed(cfg.seed, tag + "/esr"), cfg.threads};
        b.esr = esr_backtest(s.returns, s.es, s.alpha, boot);
    } else {
        b.esr_note = "needs at least 250 forecasts";
    }
    if (s.has_grid()) {
        MqrSpec spec{cfg.mqr_p, s.alpha, cfg.replications, derive_seed(cfg.seed, tag + "/mqr"), cfg.threads};
        b.mqr = mqr_backtest(s.returns, s.grid, spec);
    } else {
        b.mqr_note = "VaR grid missing from forecasts";
    }
    return b;
}

/// Days x models matrix of per-day AL scores on the dates common to all models.
struct LossPanel {
    std::vector<std::string> models;
    std::vector<Date> dates;
    Eigen::MatrixXd losses;
};

inline LossPanel al_loss_panel(const std::vector<ForecastRecord>& records, const std::vector<std::string>& models,
                               double alpha) {
    LossPanel p;
    p.models = models;
    std::vector<std::map<Date, double>> per(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (const auto& r : records)
            if (r.model == models[m] && r.alpha == alpha) per[m][r.date] = al_score_day(r.ret, r.var, r.es, alpha);
    }
    for (const auto& [date, v] : per.front()) {
        bool all = true;
        for (const auto& m : per) all = all && m.contains(date);
        if (all) p.dates.push_back(date);
    }
    p.losses.resize(static_cast<Eigen::Index>(p.dates.size()), static_cast<Eigen::Index>(models.size()));
    for (std::size_t t = 0; t < p.dates.size(); ++t)
        for (std::size_t m = 0; m < models.size(); ++m)
            p.losses(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m)) = per[m].at(p.dates[t]);
    return p;
}

}  // namespace revar
