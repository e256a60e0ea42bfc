#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "revar/csv.hpp"
#include "revar/error.hpp"
#include "revar/market_data.hpp"

namespace revar {

enum class MeasureKind { RV, RR, RVSS, RRSS, RVScaled, RRScaled, RK };

inline std::string_view to_string(MeasureKind k) {
    switch (k) {
    case MeasureKind::RV: return "rv";
    case MeasureKind::RR: return "rr";
    case MeasureKind::RVSS: return "rvss";
    case MeasureKind::RRSS: return "rrss";
    case MeasureKind::RVScaled: return "rvscaled";
    case MeasureKind::RRScaled: return "rrscaled";
    case MeasureKind::RK: return "rk";
    }
    return "?";
}

inline std::optional<MeasureKind> parse_measure_kind(std::string_view name) {
    std::string lower(csv::trim(name));
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto k : {MeasureKind::RV, MeasureKind::RR, MeasureKind::RVSS, MeasureKind::RRSS, MeasureKind::RVScaled,
                   MeasureKind::RRScaled, MeasureKind::RK})
        if (lower == to_string(k)) return k;
    return std::nullopt;
}

/// Comma-separated list as accepted by `--measures rvss,rrss,rk`.
inline std::vector<MeasureKind> parse_measure_list(std::string_view list) {
    std::vector<MeasureKind> kinds;
    for (auto item : csv::split(list)) {
        auto k = parse_measure_kind(item);
        if (!k) throw Error(ErrorKind::Config, "unknown measure '" + std::string(item) + "'");
        if (std::find(kinds.begin(), kinds.end(), *k) != kinds.end())
            throw Error(ErrorKind::Config, "measure listed twice: " + std::string(item));
        kinds.push_back(*k);
    }
    if (kinds.empty()) throw Error(ErrorKind::Config, "empty measure list");
    return kinds;
}

inline const double kRangeDivisor = 4.0 * std::numbers::ln2;

/// Sum of squared log-price increments.
inline double realized_variance(std::span<const double> prices) {
    if (prices.size() < 2) throw Error(ErrorKind::InsufficientData, "realized variance needs at least 2 prices");
    double sum = 0.0;
    for (std::size_t i = 1; i < prices.size(); ++i) {
        const double x = std::log(prices[i]) - std::log(prices[i - 1]);
        sum += x * x;
    }
    return sum;
}

/// Sum of squared log high/low ranges scaled by 1/(4 log 2).
inline double realized_range(std::span<const double> highs, std::span<const double> lows) {
    if (highs.empty() || highs.size() != lows.size())
        throw Error(ErrorKind::InsufficientData, "realized range needs matching non-empty high/low series");
    double sum = 0.0;
    for (std::size_t i = 0; i < highs.size(); ++i) {
        if (highs[i] < lows[i]) throw Error(ErrorKind::Domain, "high below low in interval " + std::to_string(i));
        const double x = std::log(highs[i]) - std::log(lows[i]);
        sum += x * x;
    }
    return sum / kRangeDivisor;
}

/// Sub-sampled RV: `prices` is the fine grid P_0..P_N and each of the
/// `step` offset grids {i, i+step, ...} contributes its coarse-grid RV.
/// Partial windows at the end of the day are dropped.
inline double subsampled_variance(std::span<const double> prices, std::size_t step) {
    if (step == 0) throw Error(ErrorKind::Config, "sub-sampling step must be positive");
    if (prices.size() < step + 1)
        throw Error(ErrorKind::InsufficientData, "not enough fine prices for one coarse interval");
    const std::size_t n = prices.size() - 1;
    double total = 0.0;
    for (std::size_t offset = 0; offset < step; ++offset)
        for (std::size_t end = offset + step; end <= n; end += step) {
            const double x = std::log(prices[end]) - std::log(prices[end - step]);
            total += x * x;
        }
    return total / static_cast<double>(step);
}

/// Sub-sampled RR over fine bars: window (offset, m) spans bars
/// [offset + step(m-1), offset + step m) and uses their sup/inf.
inline double subsampled_range(std::span<const double> highs, std::span<const double> lows, std::size_t step) {
    if (step == 0) throw Error(ErrorKind::Config, "sub-sampling step must be positive");
    if (highs.size() != lows.size()) throw Error(ErrorKind::InsufficientData, "high/low length mismatch");
    if (highs.size() < step) throw Error(ErrorKind::InsufficientData, "not enough fine bars for one coarse interval");
    for (std::size_t i = 0; i < highs.size(); ++i)
        if (highs[i] < lows[i]) throw Error(ErrorKind::Domain, "high below low in interval " + std::to_string(i));
    const std::size_t n = highs.size();
    double total = 0.0;
    for (std::size_t offset = 0; offset < step; ++offset)
        for (std::size_t begin = offset; begin + step <= n; begin += step) {
            const double hi = *std::max_element(highs.begin() + begin, highs.begin() + begin + step);
            const double lo = *std::min_element(lows.begin() + begin, lows.begin() + begin + step);
            const double x = std::log(hi) - std::log(lo);
            total += x * x;
        }
    return total / (kRangeDivisor * static_cast<double>(step));
}

/// Fine price grid of a day: first bar's open followed by every bar's close.
inline std::vector<double> price_grid(const IntradayDay& day) {
    std::vector<double> p;
    p.reserve(day.bars.size() + 1);
    if (day.bars.empty()) return p;
    p.push_back(day.bars.front().open);
    for (const auto& b : day.bars) p.push_back(b.close);
    return p;
}

/// Coarse-to-fine ratio; the coarse interval must be a multiple of the fine one.
inline std::size_t subsampling_step(int fine_minutes, int coarse_minutes) {
    if (fine_minutes <= 0 || coarse_minutes <= 0 || coarse_minutes % fine_minutes != 0)
        throw Error(ErrorKind::Config, "coarse interval " + std::to_string(coarse_minutes) +
                                           " min is not a multiple of fine interval " +
                                           std::to_string(fine_minutes) + " min");
    return static_cast<std::size_t>(coarse_minutes / fine_minutes);
}

/// Sub-sampled RV or RR of one day of fine bars.
inline double subsampled_measure(MeasureKind kind, const IntradayDay& day, int fine_minutes, int coarse_minutes) {
    const auto step = subsampling_step(fine_minutes, coarse_minutes);
    if (kind == MeasureKind::RV || kind == MeasureKind::RVSS) return subsampled_variance(price_grid(day), step);
    if (kind == MeasureKind::RR || kind == MeasureKind::RRSS) {
        std::vector<double> hi, lo;
        for (const auto& b : day.bars) {
            hi.push_back(b.high);
            lo.push_back(b.low);
        }
        return subsampled_range(hi, lo, step);
    }
    throw Error(ErrorKind::Config, "sub-sampling applies to RV or RR only");
}

/// Intraday measure rescaled by the ratio of q-day sums of the daily
/// counterpart (squared return or range) to the intraday measure.
inline double scaled_measure(double current, std::span<const double> daily_history,
                             std::span<const double> intraday_history) {
    if (daily_history.size() != intraday_history.size() || daily_history.empty())
        throw Error(ErrorKind::InsufficientData, "scaling needs equal, non-empty histories");
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < daily_history.size(); ++l) {
        num += daily_history[l];
        den += intraday_history[l];
    }
    if (!(den > 0.0) || !(num > 0.0)) throw Error(ErrorKind::DegenerateHistory, "zero sum in scaling window");
    return current * num / den;
}

/// Parzen weight: 1 - 6x^2 + 6x^3 on [0, 1/2], 2(1-x)^3 on [1/2, 1], 0 beyond.
inline double parzen_weight(double x) {
    if (x < 0.0 || std::isnan(x)) throw Error(ErrorKind::Domain, "Parzen weight needs x >= 0");
    if (x <= 0.5) return 1.0 - 6.0 * x * x + 6.0 * x * x * x;
    if (x <= 1.0) {
        const double y = 1.0 - x;
        return 2.0 * y * y * y;
    }
    return 0.0;
}

struct KernelConfig {
    double c_star = 3.5134;
    /// Sparse grid (minutes) whose squared RV proxies the integrated quarticity.
    int quarticity_minutes = 15;
    std::size_t max_bandwidth = 1000;
    /// Fixes H instead of the data-driven bandwidth.
    std::optional<std::size_t> forced_bandwidth;
};

struct KernelEstimate {
    double value = 0.0;
    std::size_t bandwidth = 0;
    /// All prices equal: zero estimate with zero bandwidth.
    bool degenerate = false;
};

/// H* = c* xi^{4/5} n^{3/5} with xi^2 = omega^2 / IQ, omega^2 = RV_dense / (2n)
/// and IQ proxied by the squared sparse-grid RV. Rounded down, floored at 1.
inline std::size_t kernel_bandwidth(std::span<const double> prices, int fine_minutes, const KernelConfig& cfg) {
    const std::size_t n = prices.size() - 1;
    const double rv_dense = realized_variance(prices);
    if (rv_dense == 0.0) return 0;
    const double noise = rv_dense / (2.0 * static_cast<double>(n));
    double rv_sparse = rv_dense;
    if (fine_minutes > 0 && cfg.quarticity_minutes % fine_minutes == 0) {
        const auto step = static_cast<std::size_t>(cfg.quarticity_minutes / fine_minutes);
        if (step >= 1 && n >= step) rv_sparse = subsampled_variance(prices, step);
    }
    if (!(rv_sparse > 0.0)) rv_sparse = rv_dense;
    const double xi2 = noise / (rv_sparse * rv_sparse);
    const double h_star = cfg.c_star * std::pow(xi2, 0.4) * std::pow(static_cast<double>(n), 0.6);
    auto h = static_cast<std::size_t>(std::floor(h_star));
    h = std::max<std::size_t>(h, 1);
    return std::min({h, cfg.max_bandwidth, n - 1});
}

/// Realized kernel with Parzen weights k(|h|/(H+1)) over autocovariances.
inline KernelEstimate realized_kernel(std::span<const double> prices, const KernelConfig& cfg, int fine_minutes = 1) {
    if (prices.size() < 2) throw Error(ErrorKind::InsufficientData, "realized kernel needs at least 2 prices");
    std::vector<double> x(prices.size() - 1);
    for (std::size_t j = 1; j < prices.size(); ++j) x[j - 1] = std::log(prices[j]) - std::log(prices[j - 1]);
    const bool flat = std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
    if (flat) return {0.0, 0, true};

    std::size_t H = cfg.forced_bandwidth ? *cfg.forced_bandwidth : kernel_bandwidth(prices, fine_minutes, cfg);
    H = std::min(H, x.size() - 1);
    auto gamma = [&](std::size_t h) {
        double s = 0.0;
        for (std::size_t j = h; j < x.size(); ++j) s += x[j] * x[j - h];
        return s;
    };
    double value = gamma(0);
    for (std::size_t h = 1; h <= H; ++h)
        value += 2.0 * parzen_weight(static_cast<double>(h) / static_cast<double>(H + 1)) * gamma(h);
    // Parzen weights give a positive semi-definite quadratic form; only rounding can go below zero.
    if (value < 0.0) {
        if (value < -1e-12 * gamma(0)) throw Error(ErrorKind::Domain, "negative realized kernel");
        value = 0.0;
    }
    return {value, H, false};
}

/// Days x K matrix of realized measures, one kind per column.
struct RealizedPanel {
    std::vector<Date> dates;
    std::vector<MeasureKind> kinds;
    std::vector<std::vector<double>> columns;

    std::size_t days() const noexcept { return dates.size(); }
    std::size_t measures() const noexcept { return kinds.size(); }
};

struct PanelSpec {
    std::vector<MeasureKind> kinds;
    int coarse_minutes = 5;
    std::size_t scaling_window = 66;
    KernelConfig kernel;
    /// Adds the squared overnight return to every computed measure.
    bool include_overnight = false;
};

struct DroppedDay {
    Date date;
    std::string reason;
};

struct PanelBuild {
    RealizedPanel panel;
    std::vector<DroppedDay> dropped;
};

/// Computes the requested measures per day and keeps only days where every
/// column is available. Columns whose kind appears in `precomputed` (by name)
/// are taken verbatim from it.
inline PanelBuild build_measure_panel(const IntradaySeries& series, const DailySeries& daily, const PanelSpec& spec,
                                      const PrecomputedMeasures& precomputed = {}) {
    if (spec.kinds.empty()) throw Error(ErrorKind::Config, "no measures requested");
    const int fine = series.interval_minutes;
    const bool needs_coarse = std::any_of(spec.kinds.begin(), spec.kinds.end(), [&](MeasureKind k) {
        return k != MeasureKind::RK && !precomputed.contains(std::string(to_string(k)));
    });
    const std::size_t step = needs_coarse ? subsampling_step(fine, spec.coarse_minutes) : 1;

    std::map<Date, std::size_t> daily_index;
    for (std::size_t i = 0; i < daily.days.size(); ++i) daily_index.emplace(daily.days[i].date, i);

    // Per-day raw values for each column; NaN marks "not available".
    const double na = std::numeric_limits<double>::quiet_NaN();
    std::vector<Date> dates;
    std::vector<std::vector<double>> values(spec.kinds.size());
    std::vector<std::string> reasons;
    std::vector<double> coarse_rv, coarse_rr, daily_sq_return, daily_sq_range;

    std::set<Date> all_dates;
    for (const auto& d : series.days) all_dates.insert(d.date);
    for (const auto& [name, m] : precomputed)
        if (std::any_of(spec.kinds.begin(), spec.kinds.end(), [&](MeasureKind k) { return name == to_string(k); }))
            for (const auto& [date, v] : m) all_dates.insert(date);

    std::map<Date, const IntradayDay*> by_date;
    for (const auto& d : series.days) by_date.emplace(d.date, &d);

    for (const auto& date : all_dates) {
        dates.push_back(date);
        std::string reason;
        const IntradayDay* day = nullptr;
        if (auto it = by_date.find(date); it != by_date.end() && !it->second->too_short) day = it->second;

        double overnight = 0.0;
        double sq_return = na, sq_range = na;
        if (auto it = daily_index.find(date); it != daily_index.end()) {
            const auto& bar = daily.days[it->second];
            sq_range = std::pow(std::log(bar.high) - std::log(bar.low), 2) / kRangeDivisor;
            if (it->second > 0) {
                const auto& prev = daily.days[it->second - 1];
                sq_return = std::pow(std::log(bar.close) - std::log(prev.close), 2);
                if (spec.include_overnight) overnight = std::pow(std::log(bar.open) - std::log(prev.close), 2);
            }
        }

        double rv = na, rr = na;
        if (day && day->bars.size() >= step) {
            const auto prices = price_grid(*day);
            std::vector<double> coarse_prices;
            for (std::size_t i = 0; i < prices.size(); i += step) coarse_prices.push_back(prices[i]);
            if (coarse_prices.size() >= 2) rv = realized_variance(coarse_prices);
            std::vector<double> hi, lo;
            for (std::size_t b = 0; b + step <= day->bars.size(); b += step) {
                double h = day->bars[b].high, l = day->bars[b].low;
                for (std::size_t j = b; j < b + step; ++j) {
                    h = std::max(h, day->bars[j].high);
                    l = std::min(l, day->bars[j].low);
                }
                hi.push_back(h);
                lo.push_back(l);
            }
            if (!hi.empty()) rr = realized_range(hi, lo);
        }
        coarse_rv.push_back(rv);
        coarse_rr.push_back(rr);
        daily_sq_return.push_back(sq_return);
        daily_sq_range.push_back(sq_range);

        for (std::size_t c = 0; c < spec.kinds.size(); ++c) {
            const auto kind = spec.kinds[c];
            double v = na;
            if (auto pit = precomputed.find(std::string(to_string(kind))); pit != precomputed.end()) {
                if (auto vit = pit->second.find(date); vit != pit->second.end()) v = vit->second;
                values[c].push_back(v);
                continue;
            }
            if (!day) {
                values[c].push_back(na);
                continue;
            }
            switch (kind) {
            case MeasureKind::RV: v = rv; break;
            case MeasureKind::RR: v = rr; break;
            case MeasureKind::RVSS:
            case MeasureKind::RRSS:
                if (day->bars.size() >= step) v = subsampled_measure(kind, *day, fine, spec.coarse_minutes);
                break;
            case MeasureKind::RK: v = realized_kernel(price_grid(*day), spec.kernel, fine).value; break;
            case MeasureKind::RVScaled:
            case MeasureKind::RRScaled: v = kind == MeasureKind::RVScaled ? rv : rr; break;
            }
            if (!std::isnan(v)) v += overnight;
            values[c].push_back(v);
        }
    }

    // Scaling needs the q previous days of both daily and intraday figures.
    const std::size_t q = spec.scaling_window;
    for (std::size_t c = 0; c < spec.kinds.size(); ++c) {
        const auto kind = spec.kinds[c];
        if (kind != MeasureKind::RVScaled && kind != MeasureKind::RRScaled) continue;
        if (precomputed.contains(std::string(to_string(kind)))) continue;
        const auto& intraday = kind == MeasureKind::RVScaled ? coarse_rv : coarse_rr;
        const auto& dailyv = kind == MeasureKind::RVScaled ? daily_sq_return : daily_sq_range;
        for (std::size_t t = 0; t < dates.size(); ++t) {
            if (std::isnan(values[c][t])) continue;
            if (t < q) {
                values[c][t] = na;
                continue;
            }
            std::vector<double> dh(dailyv.begin() + (t - q), dailyv.begin() + t);
            std::vector<double> ih(intraday.begin() + (t - q), intraday.begin() + t);
            const bool complete = std::none_of(dh.begin(), dh.end(), [](double v) { return std::isnan(v); }) &&
                                  std::none_of(ih.begin(), ih.end(), [](double v) { return std::isnan(v); });
            double v = na;
            if (complete) {
                try {
                    v = scaled_measure(values[c][t], dh, ih);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::DegenerateHistory) throw;
                }
            }
            values[c][t] = v;
        }
    }

    PanelBuild out;
    out.panel.kinds = spec.kinds;
    out.panel.columns.resize(spec.kinds.size());
    for (std::size_t t = 0; t < dates.size(); ++t) {
        std::string missing;
        for (std::size_t c = 0; c < spec.kinds.size(); ++c)
            if (std::isnan(values[c][t]) || !(values[c][t] > 0.0))
                missing += (missing.empty() ? "" : ",") + std::string(to_string(spec.kinds[c]));
        if (!missing.empty()) {
            out.dropped.push_back({dates[t], "missing or non-positive: " + missing});
            continue;
        }
        out.panel.dates.push_back(dates[t]);
        for (std::size_t c = 0; c < spec.kinds.size(); ++c) out.panel.columns[c].push_back(values[c][t]);
    }
    if (out.panel.dates.empty()) throw Error(ErrorKind::Alignment, "no day has every requested measure");
    return out;
}

/// Panel CSV: `date,<kind>...`.
inline void write_panel_csv(std::ostream& out, const RealizedPanel& panel) {
    out << "date";
    for (auto k : panel.kinds) out << ',' << to_string(k);
    out << '\n';
    for (std::size_t t = 0; t < panel.days(); ++t) {
        out << panel.dates[t].text();
        for (const auto& col : panel.columns) out << ',' << csv::format_double(col[t]);
        out << '\n';
    }
}

inline RealizedPanel parse_panel_csv(std::istream& in) {
    csv::Reader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "empty panel file");
    const auto header = csv::split(line);
    if (header.size() < 2 || header[0] != "date") throw ParseError(reader.line_number(), "expected 'date,<kind>...'");
    RealizedPanel panel;
    for (std::size_t i = 1; i < header.size(); ++i) {
        auto k = parse_measure_kind(header[i]);
        if (!k) throw ParseError(reader.line_number(), "unknown measure column '" + std::string(header[i]) + "'");
        panel.kinds.push_back(*k);
    }
    panel.columns.resize(panel.kinds.size());
    while (reader.next(line)) {
        const auto n = reader.line_number();
        const auto f = csv::split(line);
        if (f.size() != header.size()) throw ParseError(n, "wrong field count");
        auto date = Date::try_parse(f[0]);
        if (!date) throw ParseError(n, "malformed date '" + std::string(f[0]) + "'");
        if (!panel.dates.empty() && !(panel.dates.back() < *date))
            throw Error(ErrorKind::Validation, "row at line " + std::to_string(n) + ": dates not strictly increasing");
        panel.dates.push_back(*date);
        for (std::size_t c = 0; c < panel.kinds.size(); ++c) {
            auto v = csv::to_double(f[c + 1]);
            if (!v || !(*v > 0.0) || !std::isfinite(*v))
                throw ParseError(n, "measure values must be positive finite numbers");
            panel.columns[c].push_back(*v);
        }
    }
    return panel;
}

/// Long-format measures (`date,measure_name,value`) as a panel over the
/// given kinds, keeping dates present for all of them.
inline RealizedPanel panel_from_precomputed(const PrecomputedMeasures& m, const std::vector<MeasureKind>& kinds) {
    RealizedPanel panel;
    panel.kinds = kinds;
    panel.columns.resize(kinds.size());
    std::vector<const std::map<Date, double>*> cols;
    for (auto k : kinds) {
        auto it = m.find(std::string(to_string(k)));
        if (it == m.end()) throw Error(ErrorKind::Alignment, "measure '" + std::string(to_string(k)) + "' not in file");
        cols.push_back(&it->second);
    }
    for (const auto& [date, v0] : *cols.front()) {
        bool all = true;
        for (auto* c : cols) all = all && c->contains(date) && c->at(date) > 0.0;
        if (!all) continue;
        panel.dates.push_back(date);
        for (std::size_t c = 0; c < cols.size(); ++c) panel.columns[c].push_back(cols[c]->at(date));
    }
    if (panel.dates.empty()) throw Error(ErrorKind::Alignment, "no common dates across measures");
    return panel;
}

}  // namespace revar
