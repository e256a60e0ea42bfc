#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "revar/config.hpp"
#include "revar/error.hpp"
#include "revar/evaluation.hpp"
#include "revar/forecast.hpp"
#include "revar/market_data.hpp"
#include "revar/mcmc.hpp"
#include "revar/ml_fit.hpp"
#include "revar/model.hpp"
#include "revar/realized_measures.hpp"

namespace revar::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Collects output files in memory and writes them only once the command has
/// succeeded: each file goes to `<name>.partial` and is renamed into place.
/// Anything half-written is removed if the commit fails.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    std::ostringstream& add(const std::string& name) {
        for (auto& [n, s] : files_)
            if (n == name) return s;
        files_.emplace_back(name, std::ostringstream{});
        return files_.back().second;
    }

    void add_json(const std::string& name, const json& j) { add(name) << j.dump(2) << '\n'; }

    std::vector<fs::path> commit() {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + dir_.string() + "'");
        std::vector<fs::path> partial;
        try {
            for (auto& [name, content] : files_) {
                const auto tmp = dir_ / (name + ".partial");
                partial.push_back(tmp);
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                out << content.str();
                out.close();
                if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
            }
            std::vector<fs::path> written;
            for (auto& [name, content] : files_) {
                const auto tmp = dir_ / (name + ".partial");
                fs::rename(tmp, dir_ / name);
                written.push_back(dir_ / name);
            }
            return written;
        } catch (...) {
            for (const auto& p : partial) fs::remove(p, ec);
            throw;
        }
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::ostringstream>> files_;
};

inline json to_json(const TestResult& r) {
    json j;
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["reject"] = r.reject;
    j["degenerate"] = r.degenerate;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline json to_json(const AlphaBacktest& b) {
    json j;
    j["alpha"] = b.alpha;
    j["n"] = b.n;
    j["vrate"] = b.vrate;
    j["uc"] = to_json(b.uc);
    j["cc"] = to_json(b.cc);
    j["dq"] = to_json(b.dq);
    if (b.esr) {
        json e = to_json(b.esr->test);
        e["a_q"] = b.esr->a_q;
        e["b_q"] = b.esr->b_q;
        e["a_e"] = b.esr->a_e;
        e["b_e"] = b.esr->b_e;
        j["esr"] = e;
    } else {
        j["esr"] = json{{"unavailable", b.esr_note}};
    }
    if (b.mqr) {
        j["mqr"] = json{{"J1", to_json(b.mqr->j1)},
                        {"J2", to_json(b.mqr->j2)},
                        {"I", to_json(b.mqr->intercept)},
                        {"S", to_json(b.mqr->slope)},
                        {"sum_beta0", b.mqr->sum_beta0},
                        {"sum_beta1", b.mqr->sum_beta1}};
    } else {
        j["mqr"] = json{{"unavailable", b.mqr_note}};
    }
    j["losses"] = json{{"quantile", b.quantile_loss}, {"fz", b.fz_loss}, {"al", b.al_score}};
    return j;
}

inline json to_json(const McsResult& r, double alpha) {
    json j;
    j["alpha"] = alpha;
    j["method"] = std::string(to_string(r.method));
    j["level"] = r.level;
    json survivors = json::array();
    for (auto i : r.survivors) survivors.push_back(r.models[i]);
    j["survivors"] = survivors;
    json p = json::object();
    for (std::size_t i = 0; i < r.models.size(); ++i) p[r.models[i]] = r.p_values[i];
    j["p_values"] = p;
    json order = json::array();
    for (auto i : r.elimination_order) order.push_back(r.models[i]);
    j["elimination_order"] = order;
    return j;
}

/// Everything the subcommands share: the resolved configuration and where to write.
struct Context {
    RunConfig cfg;
    fs::path out_dir;
    std::ostream* log = &std::cerr;
};

inline ReturnSeries load_returns(const RunConfig& cfg) {
    if (cfg.daily.empty()) throw Error(ErrorKind::Config, "data.daily is required");
    return daily_log_returns(load_daily(cfg.daily));
}

/// Measures from a panel CSV, a long-format precomputed file, or computed from intraday bars.
inline RealizedPanel load_panel(const RunConfig& cfg, const std::vector<MeasureKind>& kinds) {
    if (!cfg.measures_file.empty()) {
        auto in = csv::open_input(cfg.measures_file);
        return parse_panel_csv(in);
    }
    if (!cfg.precomputed.empty() && cfg.intraday.empty()) return panel_from_precomputed(load_precomputed(cfg.precomputed), kinds);
    if (cfg.intraday.empty()) throw Error(ErrorKind::Config, "one of data.measures, data.precomputed or data.intraday is required");
    if (cfg.daily.empty()) throw Error(ErrorKind::Config, "data.daily is required with data.intraday");
    PanelSpec spec;
    spec.kinds = kinds;
    spec.coarse_minutes = cfg.coarse_minutes;
    spec.scaling_window = cfg.scaling_window;
    spec.include_overnight = cfg.include_overnight;
    const PrecomputedMeasures pre = cfg.precomputed.empty() ? PrecomputedMeasures{} : load_precomputed(cfg.precomputed);
    return build_measure_panel(load_intraday(cfg.intraday, cfg.intraday_minutes), load_daily(cfg.daily), spec, pre).panel;
}

inline std::vector<std::size_t> model_columns(const RealizedPanel& panel, const ModelEntry& m) {
    std::vector<std::size_t> cols;
    for (auto k : m.measures) {
        auto it = std::find(panel.kinds.begin(), panel.kinds.end(), k);
        if (it == panel.kinds.end())
            throw Error(ErrorKind::Alignment, "model " + m.id + " needs measure '" + std::string(to_string(k)) + "'");
        cols.push_back(static_cast<std::size_t>(it - panel.kinds.begin()));
    }
    return cols;
}

inline std::vector<MeasureKind> kinds_used(const RunConfig& cfg) {
    std::vector<MeasureKind> kinds;
    for (const auto& m : cfg.models)
        for (auto k : m.measures)
            if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
    return kinds.empty() ? cfg.measure_kinds : kinds;
}

inline std::vector<ModelEntry> selected_models(const RunConfig& cfg, const std::vector<std::string>& only) {
    if (cfg.models.empty()) throw Error(ErrorKind::Config, "no models configured (key 'models')");
    std::vector<ModelEntry> out;
    for (const auto& m : cfg.models)
        if (only.empty() || std::find(only.begin(), only.end(), m.id) != only.end()) out.push_back(m);
    if (out.empty()) throw Error(ErrorKind::Config, "no configured model matches --model");
    return out;
}

inline McmcConfig mcmc_config(const RunConfig& cfg) {
    McmcConfig mc;
    mc.n_burn = cfg.mcmc_burn;
    mc.n_samp = cfg.mcmc_samples;
    mc.blocks = cfg.mcmc_blocks;
    mc.chains = cfg.mcmc_chains;
    mc.threads = cfg.threads;
    mc.ram.initial_scale = cfg.mcmc_init_scale;
    return mc;
}

inline void cmd_measures(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.intraday.empty() || cfg.daily.empty())
        throw Error(ErrorKind::Config, "measures needs data.intraday and data.daily");
    PanelSpec spec;
    spec.kinds = cfg.measure_kinds;
    spec.coarse_minutes = cfg.coarse_minutes;
    spec.scaling_window = cfg.scaling_window;
    spec.include_overnight = cfg.include_overnight;
    const PrecomputedMeasures pre = cfg.precomputed.empty() ? PrecomputedMeasures{} : load_precomputed(cfg.precomputed);
    const auto build = build_measure_panel(load_intraday(cfg.intraday, cfg.intraday_minutes), load_daily(cfg.daily), spec, pre);
    OutputSet out(ctx.out_dir);
    write_panel_csv(out.add("measures.csv"), build.panel);
    auto& dropped = out.add("measures_dropped.csv");
    dropped << "date,reason\n";
    for (const auto& d : build.dropped) dropped << d.date.text() << ',' << d.reason << '\n';
    out.commit();
    *ctx.log << "measures: " << build.panel.days() << " days, " << build.dropped.size() << " dropped\n";
}

inline void cmd_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto p = simulation_study_params();
    const auto sim = simulate(p, cfg.sim_n, cfg.seed);
    OutputSet out(ctx.out_dir);
    auto& daily = out.add("daily.csv");
    daily << "date,open,high,low,close\n";
    double log_close = std::log(100.0);
    double prev = 100.0;
    daily << "0," << csv::format_double(prev) << ',' << csv::format_double(prev) << ',' << csv::format_double(prev) << ','
          << csv::format_double(prev) << '\n';
    for (std::size_t t = 0; t < sim.returns.size(); ++t) {
        log_close += sim.returns[t];
        const double close = std::exp(log_close);
        daily << t + 1 << ',' << csv::format_double(prev) << ',' << csv::format_double(std::max(prev, close)) << ','
              << csv::format_double(std::min(prev, close)) << ',' << csv::format_double(close) << '\n';
        prev = close;
    }
    RealizedPanel panel;
    panel.kinds = {cfg.sim_measure};
    panel.columns = sim.measures;
    for (std::size_t t = 0; t < sim.returns.size(); ++t) panel.dates.push_back(Date::index(static_cast<std::int64_t>(t + 1)));
    write_panel_csv(out.add("measures.csv"), panel);
    auto& latent = out.add("latent.csv");
    latent << "date,log_h,eps\n";
    for (std::size_t t = 0; t < sim.returns.size(); ++t)
        latent << t + 1 << ',' << csv::format_double(sim.log_h[t]) << ',' << csv::format_double(sim.eps[t]) << '\n';
    out.commit();
    *ctx.log << "simulate: " << cfg.sim_n << " days\n";
}

inline void cmd_estimate(Context& ctx, const std::vector<std::string>& only) {
    const auto& cfg = ctx.cfg;
    const auto models = selected_models(cfg, only);
    const auto returns = load_returns(cfg);
    const auto panel = load_panel(cfg, kinds_used(cfg));
    OutputSet out(ctx.out_dir);
    for (const auto& m : models) {
        const auto data = align(returns, panel, model_columns(panel, m));
        auto mc = mcmc_config(cfg);
        mc.seed = derive_seed(cfg.seed, m.id);
        const auto post = estimate(data, default_initial_params(m.measures.size(), m.dist), mc);
        const auto names = post.layout.names();

        auto& draws = out.add("posterior_" + m.id + ".csv");
        draws << "chain,iter";
        for (const auto& n : names) draws << ',' << n;
        draws << '\n';
        for (std::size_t c = 0; c < post.chains.size(); ++c) {
            const auto& ch = post.chains[c];
            for (std::size_t i = 0; i < ch.size(); ++i) {
                draws << c << ',' << i;
                for (Eigen::Index j = 0; j < ch.draws.cols(); ++j)
                    draws << ',' << csv::format_double(ch.draws(static_cast<Eigen::Index>(i), j));
                draws << '\n';
            }
        }
        const auto mean = post.mean();
        const auto sd = post.stddev();
        json params = json::array();
        for (std::size_t j = 0; j < names.size(); ++j) {
            json pj{{"name", names[j]}, {"mean", mean[j]}, {"sd", sd[j]}};
            const auto& d = post.diagnostics.params[j];
            pj["rhat"] = d.rhat ? json(*d.rhat) : json(nullptr);
            pj["n_eff"] = d.n_eff;
            pj["act"] = d.act;
            params.push_back(pj);
        }
        json chains = json::array();
        for (std::size_t c = 0; c < post.chains.size(); ++c)
            chains.push_back(json{{"seed", post.chains[c].seed},
                                  {"burnin_acceptance", post.burnin[c].acceptance},
                                  {"acceptance", post.chains[c].acceptance}});
        out.add_json("estimate_" + m.id + ".json", json{{"model", m.id},
                                                        {"observations", data.size()},
                                                        {"burn_in", cfg.mcmc_burn},
                                                        {"samples", cfg.mcmc_samples},
                                                        {"blocks", cfg.mcmc_blocks},
                                                        {"params", params},
                                                        {"chains", chains}});
        *ctx.log << "estimate: " << m.id << " done\n";
    }
    out.commit();
}

inline void cmd_fit_ml(Context& ctx, const std::vector<std::string>& only) {
    const auto& cfg = ctx.cfg;
    const auto models = selected_models(cfg, only);
    const auto returns = load_returns(cfg);
    const auto panel = load_panel(cfg, kinds_used(cfg));
    OutputSet out(ctx.out_dir);
    for (const auto& m : models) {
        const auto data = align(returns, panel, model_columns(panel, m));
        MLOptions opt;
        opt.restarts = cfg.ml_restarts;
        opt.seed = derive_seed(cfg.seed, m.id);
        const auto fit = fit_ml(data, default_initial_params(m.measures.size(), m.dist), opt);
        const auto L = layout_of(fit.params);
        const auto names = L.names();
        const auto values = to_natural(fit.params);
        json params = json::array();
        for (std::size_t j = 0; j < names.size(); ++j) {
            json pj{{"name", names[j]}, {"value", values[j]}};
            pj["std_error"] = j < fit.std_errors.size() && fit.std_errors[j] ? json(*fit.std_errors[j]) : json(nullptr);
            params.push_back(pj);
        }
        out.add_json("ml_" + m.id + ".json", json{{"model", m.id},
                                                  {"observations", data.size()},
                                                  {"log_likelihood", fit.log_likelihood},
                                                  {"converged", fit.converged},
                                                  {"evaluations", fit.evaluations},
                                                  {"params", params}});
        *ctx.log << "fit-ml: " << m.id << " log-likelihood " << fit.log_likelihood << '\n';
    }
    out.commit();
}

inline void cmd_forecast(Context& ctx, const std::vector<std::string>& only) {
    const auto& cfg = ctx.cfg;
    const auto models = selected_models(cfg, only);
    const auto returns = load_returns(cfg);
    const auto panel = load_panel(cfg, kinds_used(cfg));

    RollingConfig rc;
    rc.forecasts = cfg.forecasts;
    rc.stride = cfg.stride;
    rc.alphas = cfg.alphas;
    rc.mqr_p = cfg.mqr_p;
    rc.mcmc = mcmc_config(cfg);
    rc.mcmc.threads = 1;
    rc.max_draws = cfg.max_draws;
    rc.on_failure = cfg.on_failure == "abort" ? FailurePolicy::Abort : FailurePolicy::Gap;
    rc.threads = cfg.threads;

    std::vector<ModelSpec> specs;
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    for (const auto& m : models) {
        specs.push_back({m.id, m.dist, model_columns(panel, m), std::nullopt});
        shortest = std::min(shortest, align(returns, panel, specs.back().columns).size());
    }
    if (shortest <= cfg.forecasts) throw Error(ErrorKind::InsufficientData, "not enough data for the requested forecasts");
    rc.in_sample = cfg.in_sample ? cfg.in_sample : shortest - cfg.forecasts;

    const auto results = rolling_forecast(returns, panel, specs, rc, cfg.seed);

    OutputSet out(ctx.out_dir);
    std::vector<ForecastRecord> all;
    json log = json::object();
    for (const auto& r : results) {
        all.insert(all.end(), r.records.begin(), r.records.end());
        log[r.model] = json{{"refits", r.refits}, {"forecasts", r.records.size() / std::max<std::size_t>(1, rc.all_levels().size())},
                            {"gaps", r.gaps}, {"failures", r.failures}};
        auto& plot = out.add("plot_" + r.model + ".csv");
        plot << "date,return";
        for (double a : cfg.alphas) plot << ",var_" << csv::format_double(a) << ",es_" << csv::format_double(a);
        plot << '\n';
        std::map<Date, std::map<double, std::pair<double, double>>> rows;
        std::map<Date, double> rets;
        for (const auto& rec : r.records) {
            rows[rec.date][rec.alpha] = {rec.var, rec.es};
            rets[rec.date] = rec.ret;
        }
        for (const auto& [date, levels] : rows) {
            plot << date.text() << ',' << csv::format_double(rets[date]);
            for (double a : cfg.alphas)
                plot << ',' << csv::format_double(levels.at(a).first) << ',' << csv::format_double(levels.at(a).second);
            plot << '\n';
        }
    }
    write_forecast_csv(out.add("forecasts.csv"), all);
    out.add_json("forecast_log.json", log);
    out.commit();
    *ctx.log << "forecast: " << results.size() << " models, in-sample " << rc.in_sample << '\n';
}

inline BacktestConfig backtest_config(const RunConfig& cfg) {
    return {cfg.mqr_p, cfg.backtest_bootstrap, cfg.backtest_block, derive_seed(cfg.seed, "backtest"), cfg.threads};
}

inline fs::path default_forecasts(const Context& ctx, const std::string& given) {
    return given.empty() ? ctx.out_dir / "forecasts.csv" : fs::path(given);
}

inline std::vector<AlphaBacktest> run_backtests(const RunConfig& cfg, const std::vector<ForecastRecord>& records) {
    std::vector<AlphaBacktest> out;
    for (const auto& model : model_ids(records))
        for (double a : cfg.alphas) out.push_back(evaluate(collect_series(records, model, a, cfg.mqr_p), backtest_config(cfg)));
    return out;
}

inline void cmd_backtest(Context& ctx, const std::string& forecasts) {
    const auto records = load_forecast_csv(default_forecasts(ctx, forecasts).string());
    json j = json::object();
    for (const auto& b : run_backtests(ctx.cfg, records)) j[b.model][csv::format_double(b.alpha)] = to_json(b);
    OutputSet out(ctx.out_dir);
    out.add_json("backtest.json", j);
    out.commit();
    *ctx.log << "backtest: " << j.size() << " models\n";
}

inline std::vector<std::pair<double, McsResult>> run_mcs(const RunConfig& cfg, const std::vector<ForecastRecord>& records) {
    const auto models = model_ids(records);
    std::vector<std::pair<double, McsResult>> out;
    if (models.size() < 2) return out;
    for (double a : cfg.alphas) {
        const auto panel = al_loss_panel(records, models, a);
        for (auto method : cfg.mcs_methods)
            for (double level : cfg.mcs_levels) {
                McsConfig mc{method, level, cfg.mcs_bootstrap, cfg.mcs_block, derive_seed(cfg.seed, "mcs/" + csv::format_double(a))};
                out.emplace_back(a, model_confidence_set(panel.losses, panel.models, mc));
            }
    }
    return out;
}

inline void cmd_mcs(Context& ctx, const std::string& forecasts) {
    const auto records = load_forecast_csv(default_forecasts(ctx, forecasts).string());
    if (model_ids(records).size() < 2) throw Error(ErrorKind::InsufficientData, "MCS needs forecasts from at least two models");
    json j = json::array();
    for (const auto& [a, r] : run_mcs(ctx.cfg, records)) j.push_back(to_json(r, a));
    OutputSet out(ctx.out_dir);
    out.add_json("mcs.json", j);
    out.commit();
    *ctx.log << "mcs: " << j.size() << " sets\n";
}

inline std::string fmt(double v, int digits = 4) {
    if (!std::isfinite(v)) return "-";
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

/// Markdown tables recomputed from the forecast CSV alone.
inline std::string render_report(const RunConfig& cfg, const std::vector<ForecastRecord>& records) {
    const auto backtests = run_backtests(cfg, records);
    const auto sets = run_mcs(cfg, records);
    std::ostringstream md;
    md << "# Tail-risk forecast report\n\n";
    auto reject = [](const TestResult& t) { return t.degenerate ? std::string("n/a") : fmt(t.p_value, 3) + (t.reject ? "*" : ""); };
    for (double a : cfg.alphas) {
        const std::string pct = fmt(100.0 * a, 1) + "%";
        md << "## VaR/ES at " << pct << "\n\n";
        md << "| Model | n | VRate | UC | CC | DQ | ESR | J1 | J2 | I | S |\n";
        md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& b : backtests) {
            if (b.alpha != a) continue;
            md << "| " << b.model << " | " << b.n << " | " << fmt(100.0 * b.vrate, 2) << "% | " << reject(b.uc) << " | "
               << reject(b.cc) << " | " << reject(b.dq) << " | " << (b.esr ? reject(b.esr->test) : "n/a");
            if (b.mqr)
                md << " | " << reject(b.mqr->j1) << " | " << reject(b.mqr->j2) << " | " << reject(b.mqr->intercept) << " | "
                   << reject(b.mqr->slope) << " |\n";
            else
                md << " | n/a | n/a | n/a | n/a |\n";
        }
        md << "\nEntries are p-values; * marks rejection at 5%.\n\n";
        md << "| Model | Quantile loss | FZ loss | AL score |";
        std::vector<const std::pair<double, McsResult>*> here;
        for (const auto& s : sets)
            if (s.first == a) {
                here.push_back(&s);
                md << " MCS " << to_string(s.second.method) << " " << fmt(100.0 * s.second.level, 0) << "% |";
            }
        md << "\n|---|---|---|---|";
        for (std::size_t i = 0; i < here.size(); ++i) md << "---|";
        md << '\n';
        for (const auto& b : backtests) {
            if (b.alpha != a) continue;
            md << "| " << b.model << " | " << fmt(b.quantile_loss, 6) << " | " << fmt(b.fz_loss, 6) << " | " << fmt(b.al_score, 6)
               << " |";
            for (const auto* s : here) {
                const auto& r = s->second;
                const auto i = static_cast<std::size_t>(std::find(r.models.begin(), r.models.end(), b.model) - r.models.begin());
                const bool in = std::find(r.survivors.begin(), r.survivors.end(), i) != r.survivors.end();
                md << ' ' << fmt(r.p_values[i], 3) << (in ? " (in)" : "") << " |";
            }
            md << '\n';
        }
        md << '\n';
    }
    return md.str();
}

inline void cmd_report(Context& ctx, const std::string& forecasts) {
    const auto records = load_forecast_csv(default_forecasts(ctx, forecasts).string());
    OutputSet out(ctx.out_dir);
    out.add("report.md") << render_report(ctx.cfg, records);
    out.commit();
    *ctx.log << "report: written\n";
}

inline int report_error(const Error& e) {
    json j{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
    std::cerr << j.dump() << '\n';
    return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Parse ? 2 : 1;
}

/// Entry point of the `revar` executable.
inline int run(int argc, char** argv) {
    CLI::App app{"Realized EGARCH tail-risk pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_override, forecasts_path;
    std::vector<std::string> overrides, only;
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::string measure;
    app.add_option("--config", config_path, "flat key = value configuration file");
    app.add_option("--out", out_override, "output directory (default: config out_dir or $REVAR_OUT_DIR)");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--set", overrides, "override a config key, key=value (repeatable)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");

    auto* measures = app.add_subcommand("measures", "compute realized measures from intraday bars");
    auto* simulate_cmd = app.add_subcommand("simulate", "simulate the study DGP");
    auto* n_opt = simulate_cmd->add_option("--n", n, "number of days");
    simulate_cmd->add_option("--measure", measure, "name of the simulated measure column");
    auto* estimate_cmd = app.add_subcommand("estimate", "posterior sampling by adaptive MCMC");
    auto* ml_cmd = app.add_subcommand("fit-ml", "maximum-likelihood fit");
    auto* forecast_cmd = app.add_subcommand("forecast", "rolling one-step-ahead VaR/ES forecasts");
    for (auto* c : {estimate_cmd, ml_cmd, forecast_cmd}) c->add_option("--model", only, "restrict to these model ids");
    auto* backtest_cmd = app.add_subcommand("backtest", "VaR/ES backtests and losses");
    auto* mcs_cmd = app.add_subcommand("mcs", "model confidence set on AL scores");
    auto* report_cmd = app.add_subcommand("report", "tables recomputed from forecast CSVs");
    for (auto* c : {backtest_cmd, mcs_cmd, report_cmd}) c->add_option("--forecasts", forecasts_path, "forecast CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        Context ctx;
        if (!config_path.empty()) ctx.cfg = load_config(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
            ctx.cfg.set(csv::trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1));
        }
        if (threads) ctx.cfg.threads = threads;
        if (*seed_opt) ctx.cfg.seed = seed;
        if (*n_opt) ctx.cfg.sim_n = n;
        if (!measure.empty()) ctx.cfg.set("simulate.measure", measure);
        ctx.out_dir = ctx.cfg.out_dir;
        if (const char* env = std::getenv("REVAR_OUT_DIR"); env && *env) ctx.out_dir = env;
        if (!out_override.empty()) ctx.out_dir = out_override;
        ctx.cfg.validate();

        if (*measures) cmd_measures(ctx);
        else if (*simulate_cmd) cmd_simulate(ctx);
        else if (*estimate_cmd) cmd_estimate(ctx, only);
        else if (*ml_cmd) cmd_fit_ml(ctx, only);
        else if (*forecast_cmd) cmd_forecast(ctx, only);
        else if (*backtest_cmd) cmd_backtest(ctx, forecasts_path);
        else if (*mcs_cmd) cmd_mcs(ctx, forecasts_path);
        else if (*report_cmd) cmd_report(ctx, forecasts_path);
        return 0;
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}

}  // namespace revar::cli
