#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "revar/csv.hpp"
#include "revar/distributions.hpp"
#include "revar/error.hpp"
#include "revar/mcs.hpp"
#include "revar/realized_measures.hpp"

namespace revar {

/// One model of the study: error distribution and realized-measure subset.
struct ModelEntry {
    std::string id;
    DistKind dist = DistKind::SkewT;
    std::vector<MeasureKind> measures;
};

inline std::string_view dist_label(DistKind k) {
    switch (k) {
        case DistKind::Normal: return "NN";
        case DistKind::StudentT: return "tN";
        case DistKind::SkewT: return "SkN";
    }
    return "?";
}

/// "RE-RV-RK-SkN" style identifier.
inline std::string default_model_id(DistKind dist, const std::vector<MeasureKind>& measures) {
    std::string id = "RE";
    for (auto m : measures) {
        std::string name(to_string(m));
        for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        id += "-" + name;
    }
    return id + "-" + std::string(dist_label(dist));
}

/// Parses "[id:]dist:measure+measure".
inline ModelEntry parse_model_entry(std::string_view text) {
    std::vector<std::string_view> parts;
    for (auto p : csv::split(text, ':')) parts.push_back(csv::trim(p));
    if (parts.size() < 2 || parts.size() > 3)
        throw Error(ErrorKind::Config, "model entry '" + std::string(text) + "' must be [id:]dist:measures");
    ModelEntry m;
    const std::size_t o = parts.size() == 3 ? 1 : 0;
    m.dist = parse_dist_kind(parts[o]);
    for (auto name : csv::split(parts[o + 1], '+')) {
        auto k = parse_measure_kind(csv::trim(name));
        if (!k) throw Error(ErrorKind::Config, "unknown measure '" + std::string(name) + "' in model entry");
        m.measures.push_back(*k);
    }
    if (m.measures.empty() || m.measures.size() > 3) throw Error(ErrorKind::Config, "a model uses 1 to 3 measures");
    m.id = o ? std::string(parts[0]) : default_model_id(m.dist, m.measures);
    if (m.id.empty() || m.id.find_first_of(",/\\ ") != std::string::npos)
        throw Error(ErrorKind::Config, "invalid model id '" + m.id + "'");
    return m;
}

/// Flat, typed `key = value` run configuration. Numeric defaults follow the
/// reference study protocol; the accepted keys are those of `RunConfig::keys()`.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out_dir = "out";

    std::string daily;
    std::string intraday;
    int intraday_minutes = 1;
    std::string measures_file;
    std::string precomputed;

    std::vector<MeasureKind> measure_kinds{MeasureKind::RV};
    int coarse_minutes = 5;
    std::size_t scaling_window = 66;
    bool include_overnight = false;

    std::vector<ModelEntry> models;

    std::size_t mcmc_burn = 20000;
    std::size_t mcmc_samples = 10000;
    int mcmc_blocks = 4;
    std::size_t mcmc_chains = 1;
    double mcmc_init_scale = 0.1;

    std::size_t ml_restarts = 3;

    /// 0 means "all data before the forecast period".
    std::size_t in_sample = 0;
    std::size_t forecasts = 1000;
    std::size_t stride = 1;
    std::vector<double> alphas{0.025, 0.01};
    std::size_t max_draws = 0;
    std::string on_failure = "gap";

    std::size_t mqr_p = 6;
    std::size_t backtest_bootstrap = 1000;
    double backtest_block = 20.0;

    std::size_t mcs_bootstrap = 1000;
    double mcs_block = 20.0;
    std::vector<double> mcs_levels{0.90, 0.75};
    std::vector<McsMethod> mcs_methods{McsMethod::R, McsMethod::SQ};

    std::size_t sim_n = 2000;
    MeasureKind sim_measure = MeasureKind::RVSS;

    using Setter = std::function<void(RunConfig&, std::string_view)>;

    static const std::map<std::string, Setter>& keys();

    void set(std::string_view key, std::string_view value) {
        const auto& table = keys();
        auto it = table.find(std::string(key));
        if (it == table.end()) throw Error(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
        it->second(*this, csv::trim(value));
    }

    void validate() const {
        if (threads == 0) throw Error(ErrorKind::Config, "threads must be at least 1");
        if (stride == 0) throw Error(ErrorKind::Config, "rolling.stride must be at least 1");
        if (mqr_p < 2) throw Error(ErrorKind::Config, "backtest.mqr_p must be at least 2");
        if (mcmc_blocks != 1 && mcmc_blocks != 4) throw Error(ErrorKind::Config, "mcmc.blocks must be 1 or 4");
        if (on_failure != "gap" && on_failure != "abort")
            throw Error(ErrorKind::Config, "rolling.on_failure must be gap or abort");
        for (double a : alphas)
            if (!(a > 0.0 && a < 0.5)) throw Error(ErrorKind::Config, "rolling.alphas must lie in (0, 0.5)");
        for (double l : mcs_levels)
            if (!(l > 0.0 && l < 1.0)) throw Error(ErrorKind::Config, "mcs.levels must lie in (0, 1)");
        std::vector<std::string> ids;
        for (const auto& m : models) {
            if (std::find(ids.begin(), ids.end(), m.id) != ids.end())
                throw Error(ErrorKind::Config, "duplicate model id '" + m.id + "'");
            ids.push_back(m.id);
        }
        for (const auto* path : {&daily, &intraday, &measures_file, &precomputed})
            if (!path->empty() && !std::ifstream(*path)) throw Error(ErrorKind::Io, "cannot open '" + *path + "'");
    }
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    if constexpr (std::is_floating_point_v<T>) {
        auto d = csv::to_double(v);
        if (!d || !std::isfinite(*d))
            throw Error(ErrorKind::Config, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
        return static_cast<T>(*d);
    } else {
        auto i = csv::to_int(v);
        if (!i || (std::is_unsigned_v<T> && *i < 0))
            throw Error(ErrorKind::Config, std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
        return static_cast<T>(*i);
    }
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::Config, std::string(key) + ": expected true or false");
}

inline std::vector<double> parse_number_list(std::string_view key, std::string_view v) {
    std::vector<double> out;
    for (auto f : csv::split(v)) out.push_back(parse_number<double>(key, csv::trim(f)));
    if (out.empty()) throw Error(ErrorKind::Config, std::string(key) + ": empty list");
    return out;
}

template <class T>
RunConfig::Setter number(T RunConfig::*member, const char* key) {
    return [member, key](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); };
}

inline RunConfig::Setter text(std::string RunConfig::*member) {
    return [member](RunConfig& c, std::string_view v) { c.*member = std::string(v); };
}

}  // namespace detail

inline const std::map<std::string, RunConfig::Setter>& RunConfig::keys() {
    using detail::number;
    using detail::text;
    static const std::map<std::string, Setter> table{
        {"seed", number(&RunConfig::seed, "seed")},
        {"threads", number(&RunConfig::threads, "threads")},
        {"out_dir", text(&RunConfig::out_dir)},
        {"data.daily", text(&RunConfig::daily)},
        {"data.intraday", text(&RunConfig::intraday)},
        {"data.intraday_minutes", number(&RunConfig::intraday_minutes, "data.intraday_minutes")},
        {"data.measures", text(&RunConfig::measures_file)},
        {"data.precomputed", text(&RunConfig::precomputed)},
        {"measures.kinds", [](RunConfig& c, std::string_view v) { c.measure_kinds = parse_measure_list(v); }},
        {"measures.coarse_minutes", number(&RunConfig::coarse_minutes, "measures.coarse_minutes")},
        {"measures.scaling_window", number(&RunConfig::scaling_window, "measures.scaling_window")},
        {"measures.include_overnight",
         [](RunConfig& c, std::string_view v) {
             c.include_overnight = detail::parse_bool("measures.include_overnight", v);
         }},
        {"models",
         [](RunConfig& c, std::string_view v) {
             c.models.clear();
             for (auto e : csv::split(v))
                 if (!csv::trim(e).empty()) c.models.push_back(parse_model_entry(csv::trim(e)));
         }},
        {"mcmc.burn", number(&RunConfig::mcmc_burn, "mcmc.burn")},
        {"mcmc.samples", number(&RunConfig::mcmc_samples, "mcmc.samples")},
        {"mcmc.blocks", number(&RunConfig::mcmc_blocks, "mcmc.blocks")},
        {"mcmc.chains", number(&RunConfig::mcmc_chains, "mcmc.chains")},
        {"mcmc.init_scale", number(&RunConfig::mcmc_init_scale, "mcmc.init_scale")},
        {"ml.restarts", number(&RunConfig::ml_restarts, "ml.restarts")},
        {"rolling.in_sample", number(&RunConfig::in_sample, "rolling.in_sample")},
        {"rolling.forecasts", number(&RunConfig::forecasts, "rolling.forecasts")},
        {"rolling.stride", number(&RunConfig::stride, "rolling.stride")},
        {"rolling.alphas",
         [](RunConfig& c, std::string_view v) { c.alphas = detail::parse_number_list("rolling.alphas", v); }},
        {"rolling.max_draws", number(&RunConfig::max_draws, "rolling.max_draws")},
        {"rolling.on_failure", text(&RunConfig::on_failure)},
        {"backtest.mqr_p", number(&RunConfig::mqr_p, "backtest.mqr_p")},
        {"backtest.bootstrap", number(&RunConfig::backtest_bootstrap, "backtest.bootstrap")},
        {"backtest.block_length", number(&RunConfig::backtest_block, "backtest.block_length")},
        {"mcs.bootstrap", number(&RunConfig::mcs_bootstrap, "mcs.bootstrap")},
        {"mcs.block_length", number(&RunConfig::mcs_block, "mcs.block_length")},
        {"mcs.levels",
         [](RunConfig& c, std::string_view v) { c.mcs_levels = detail::parse_number_list("mcs.levels", v); }},
        {"mcs.methods",
         [](RunConfig& c, std::string_view v) {
             c.mcs_methods.clear();
             for (auto f : csv::split(v)) c.mcs_methods.push_back(parse_mcs_method(csv::trim(f)));
         }},
        {"simulate.n", number(&RunConfig::sim_n, "simulate.n")},
        {"simulate.measure",
         [](RunConfig& c, std::string_view v) {
             auto k = parse_measure_kind(v);
             if (!k) throw Error(ErrorKind::Config, "simulate.measure: unknown measure '" + std::string(v) + "'");
             c.sim_measure = *k;
         }},
    };
    return table;
}

/// Parses `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = csv::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ParseError(n, "expected 'key = value'");
        try {
            cfg.set(csv::trim(t.substr(0, eq)), t.substr(eq + 1));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config) throw ParseError(n, e.what());
            throw;
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    auto in = csv::open_input(path);
    return parse_config(in);
}

}  // namespace revar
