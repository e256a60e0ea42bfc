#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revar/csv.hpp"
#include "revar/error.hpp"

namespace revar {

/// Trading-day key. Either an ISO calendar date (YYYY-MM-DD) or a plain
/// integer index, the latter used for synthetic series. Ordering follows
/// the ordinal; the original text is kept for output.
class Date {
public:
    Date() = default;

    static std::optional<Date> try_parse(std::string_view text) {
        text = csv::trim(text);
        if (auto n = csv::to_int(text)) return Date(*n, std::string(text));
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
        const auto y = csv::to_int(text.substr(0, 4));
        const auto m = csv::to_int(text.substr(5, 2));
        const auto d = csv::to_int(text.substr(8, 2));
        if (!y || !m || !d) return std::nullopt;
        const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(*y)},
                                              std::chrono::month{static_cast<unsigned>(*m)},
                                              std::chrono::day{static_cast<unsigned>(*d)}};
        if (!ymd.ok()) return std::nullopt;
        const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
        return Date(days, std::string(text));
    }

    static Date index(std::int64_t n) { return Date(n, std::to_string(n)); }

    std::int64_t ordinal() const noexcept { return ordinal_; }
    const std::string& text() const noexcept { return text_; }

    friend bool operator==(const Date& a, const Date& b) noexcept { return a.ordinal_ == b.ordinal_; }
    friend std::strong_ordering operator<=>(const Date& a, const Date& b) noexcept {
        return a.ordinal_ <=> b.ordinal_;
    }

private:
    Date(std::int64_t ordinal, std::string text) : ordinal_(ordinal), text_(std::move(text)) {}

    std::int64_t ordinal_ = 0;
    std::string text_;
};

/// Exchange-local timestamp split into trading day and seconds since midnight.
struct Timestamp {
    Date date;
    std::int64_t seconds = 0;

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
    friend auto operator<=>(const Timestamp& a, const Timestamp& b) {
        if (auto c = a.date <=> b.date; c != 0) return c;
        return a.seconds <=> b.seconds;
    }

    static std::optional<Timestamp> try_parse(std::string_view text) {
        text = csv::trim(text);
        if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ')) return std::nullopt;
        auto date = Date::try_parse(text.substr(0, 10));
        if (!date) return std::nullopt;
        auto clock = text.substr(11);
        if (!clock.empty() && clock.back() == 'Z') clock.remove_suffix(1);
        if (clock.size() != 5 && clock.size() != 8) return std::nullopt;
        if (clock[2] != ':' || (clock.size() == 8 && clock[5] != ':')) return std::nullopt;
        const auto hh = csv::to_int(clock.substr(0, 2));
        const auto mm = csv::to_int(clock.substr(3, 2));
        const auto ss = clock.size() == 8 ? csv::to_int(clock.substr(6, 2)) : std::optional<long long>(0);
        if (!hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 60 || *hh < 0 || *mm < 0 || *ss < 0)
            return std::nullopt;
        return Timestamp{*date, *hh * 3600 + *mm * 60 + *ss};
    }
};

struct IntradayBar {
    Timestamp timestamp;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
};

struct IntradayDay {
    Date date;
    std::vector<IntradayBar> bars;
    /// Fewer than two bars: realized measures are not computable.
    bool too_short = false;
};

/// Bars grouped by trading day at a fixed nominal interval. Missing bars are
/// not filled in; consumers see the bars that were actually observed.
struct IntradaySeries {
    int interval_minutes = 1;
    std::vector<IntradayDay> days;
};

struct DailyBar {
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
};

struct DailySeries {
    std::vector<DailyBar> days;
};

/// r_t = log C_t - log C_{t-1}, dated by day t.
struct ReturnSeries {
    std::vector<Date> dates;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

namespace detail {

inline void check_ohlc(double open, double high, double low, double close, std::size_t line) {
    if (!(open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0))
        throw Error(ErrorKind::Validation, "row at line " + std::to_string(line) + ": prices must be positive");
    if (!(low <= std::min(open, close)) || !(high >= std::max(open, close)))
        throw Error(ErrorKind::Validation,
                    "row at line " + std::to_string(line) + ": high/low inconsistent with open/close");
}

inline std::array<double, 4> parse_prices(const std::vector<std::string_view>& f, std::size_t line) {
    std::array<double, 4> p{};
    for (std::size_t i = 0; i < 4; ++i) {
        auto v = csv::to_double(f[i + 1]);
        if (!v || !std::isfinite(*v)) throw ParseError(line, "malformed price '" + std::string(f[i + 1]) + "'");
        p[i] = *v;
    }
    return p;
}

}  // namespace detail

/// Parses the intraday CSV contract `timestamp,open,high,low,close`.
inline IntradaySeries parse_intraday(std::istream& in, int interval_minutes) {
    if (interval_minutes <= 0) throw Error(ErrorKind::Config, "interval_minutes must be positive");
    csv::Reader reader(in);
    csv::expect_header(reader, {"timestamp", "open", "high", "low", "close"});

    IntradaySeries series;
    series.interval_minutes = interval_minutes;
    const std::int64_t step = static_cast<std::int64_t>(interval_minutes) * 60;
    std::string line;
    while (reader.next(line)) {
        const auto n = reader.line_number();
        const auto f = csv::split(line);
        if (f.size() != 5) throw ParseError(n, "expected 5 fields, got " + std::to_string(f.size()));
        auto ts = Timestamp::try_parse(f[0]);
        if (!ts) throw ParseError(n, "malformed timestamp '" + std::string(f[0]) + "'");
        const auto p = detail::parse_prices(f, n);
        detail::check_ohlc(p[0], p[1], p[2], p[3], n);

        if (series.days.empty() || series.days.back().date != ts->date) {
            if (!series.days.empty() && ts->date < series.days.back().date)
                throw Error(ErrorKind::Validation, "row at line " + std::to_string(n) + ": day out of order");
            series.days.push_back(IntradayDay{ts->date, {}, false});
        }
        auto& bars = series.days.back().bars;
        if (!bars.empty()) {
            const auto gap = ts->seconds - bars.back().timestamp.seconds;
            if (gap <= 0)
                throw Error(ErrorKind::Validation,
                            "row at line " + std::to_string(n) + ": timestamps not strictly increasing");
            if (gap % step != 0)
                throw Error(ErrorKind::Validation,
                            "row at line " + std::to_string(n) + ": spacing is not a multiple of the interval");
        }
        bars.push_back(IntradayBar{*ts, p[0], p[1], p[2], p[3]});
    }
    for (auto& d : series.days) d.too_short = d.bars.size() < 2;
    return series;
}

inline IntradaySeries load_intraday(const std::string& path, int interval_minutes) {
    auto in = csv::open_input(path);
    return parse_intraday(in, interval_minutes);
}

/// Parses the daily CSV contract `date,open,high,low,close`.
inline DailySeries parse_daily(std::istream& in) {
    csv::Reader reader(in);
    csv::expect_header(reader, {"date", "open", "high", "low", "close"});
    DailySeries series;
    std::string line;
    while (reader.next(line)) {
        const auto n = reader.line_number();
        const auto f = csv::split(line);
        if (f.size() != 5) throw ParseError(n, "expected 5 fields, got " + std::to_string(f.size()));
        auto date = Date::try_parse(f[0]);
        if (!date) throw ParseError(n, "malformed date '" + std::string(f[0]) + "'");
        const auto p = detail::parse_prices(f, n);
        detail::check_ohlc(p[0], p[1], p[2], p[3], n);
        if (!series.days.empty() && !(series.days.back().date < *date))
            throw Error(ErrorKind::Validation, "row at line " + std::to_string(n) + ": dates not strictly increasing");
        series.days.push_back(DailyBar{*date, p[0], p[1], p[2], p[3]});
    }
    return series;
}

inline DailySeries load_daily(const std::string& path) {
    auto in = csv::open_input(path);
    return parse_daily(in);
}

/// Long-format precomputed measures `date,measure_name,value`, keyed by name.
using PrecomputedMeasures = std::map<std::string, std::map<Date, double>>;

inline PrecomputedMeasures parse_precomputed(std::istream& in) {
    csv::Reader reader(in);
    csv::expect_header(reader, {"date", "measure_name", "value"});
    PrecomputedMeasures out;
    std::string line;
    while (reader.next(line)) {
        const auto n = reader.line_number();
        const auto f = csv::split(line);
        if (f.size() != 3) throw ParseError(n, "expected 3 fields, got " + std::to_string(f.size()));
        auto date = Date::try_parse(f[0]);
        if (!date) throw ParseError(n, "malformed date '" + std::string(f[0]) + "'");
        auto v = csv::to_double(f[2]);
        if (!v || !std::isfinite(*v)) throw ParseError(n, "malformed value '" + std::string(f[2]) + "'");
        auto [it, inserted] = out[std::string(f[1])].emplace(*date, *v);
        if (!inserted) throw Error(ErrorKind::Validation, "row at line " + std::to_string(n) + ": duplicate entry");
    }
    return out;
}

inline PrecomputedMeasures load_precomputed(const std::string& path) {
    auto in = csv::open_input(path);
    return parse_precomputed(in);
}

inline ReturnSeries daily_log_returns(const DailySeries& d) {
    if (d.days.size() < 2) throw Error(ErrorKind::InsufficientData, "need at least 2 days for returns");
    ReturnSeries r;
    r.dates.reserve(d.days.size() - 1);
    r.values.reserve(d.days.size() - 1);
    for (std::size_t t = 1; t < d.days.size(); ++t) {
        const double prev = d.days[t - 1].close;
        const double cur = d.days[t].close;
        if (!(prev > 0.0) || !(cur > 0.0)) throw Error(ErrorKind::Domain, "non-positive close price");
        r.dates.push_back(d.days[t].date);
        r.values.push_back(std::log(cur) - std::log(prev));
    }
    return r;
}

}  // namespace revar
