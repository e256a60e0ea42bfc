#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "revar/market_data.hpp"

using namespace revar;

namespace {

std::string two_day_file(int bars_per_day) {
    std::ostringstream s;
    s << "timestamp,open,high,low,close\n";
    for (int d = 0; d < 2; ++d)
        for (int i = 0; i < bars_per_day; ++i) {
            const int minutes = 9 * 60 + 30 + 5 * i;
            char ts[32];
            std::snprintf(ts, sizeof ts, "2020-01-0%dT%02d:%02d:00", 2 + d, minutes / 60, minutes % 60);
            const double base = 100.0 + 0.01 * i;
            s << ts << ',' << base << ',' << base + 0.05 << ',' << base - 0.05 << ',' << base + 0.01 << '\n';
        }
    return s.str();
}

DailySeries daily_from_closes(std::initializer_list<double> closes) {
    DailySeries d;
    std::int64_t i = 0;
    for (double c : closes) d.days.push_back({Date::index(i++), c, c, c, c});
    return d;
}

}  // namespace

TEST(MarketData, ParsesTwoDaysOfFiveMinuteBars) {
    std::istringstream in(two_day_file(78));
    const auto s = parse_intraday(in, 5);
    ASSERT_EQ(s.days.size(), 2u);
    EXPECT_EQ(s.days[0].bars.size(), 78u);
    EXPECT_EQ(s.days[1].bars.size(), 78u);
    EXPECT_EQ(s.days[0].date.text(), "2020-01-02");
    EXPECT_FALSE(s.days[0].too_short);
}

TEST(MarketData, RepeatedParseIsIdentical) {
    const auto text = two_day_file(10);
    std::istringstream a(text), b(text);
    const auto x = parse_intraday(a, 5), y = parse_intraday(b, 5);
    ASSERT_EQ(x.days.size(), y.days.size());
    for (std::size_t d = 0; d < x.days.size(); ++d)
        for (std::size_t i = 0; i < x.days[d].bars.size(); ++i) {
            EXPECT_EQ(x.days[d].bars[i].close, y.days[d].bars[i].close);
            EXPECT_EQ(x.days[d].bars[i].timestamp, y.days[d].bars[i].timestamp);
        }
}

TEST(MarketData, HighBelowLowNamesTheRow) {
    std::istringstream in("timestamp,open,high,low,close\n"
                          "2020-01-02 09:30,100,101,99,100\n"
                          "2020-01-02 09:35,100,99,101,100\n");
    try {
        parse_intraday(in, 5);
        FAIL() << "expected a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(MarketData, RejectsOffGridSpacingAndDisorder) {
    std::istringstream off("timestamp,open,high,low,close\n2020-01-02 09:30,1,1,1,1\n2020-01-02 09:33,1,1,1,1\n");
    EXPECT_THROW(parse_intraday(off, 5), Error);
    std::istringstream back("timestamp,open,high,low,close\n2020-01-02 09:35,1,1,1,1\n2020-01-02 09:30,1,1,1,1\n");
    EXPECT_THROW(parse_intraday(back, 5), Error);
}

TEST(MarketData, MalformedFieldIsParseErrorWithLine) {
    std::istringstream in("date,open,high,low,close\n2020-01-02,1,1,1,1\n2020-01-03,1,x,1,1\n");
    try {
        parse_daily(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(MarketData, DatesAndIndices) {
    const auto a = Date::try_parse("2021-02-28");
    const auto b = Date::try_parse("2021-03-01");
    ASSERT_TRUE(a && b);
    EXPECT_EQ(b->ordinal() - a->ordinal(), 1);
    EXPECT_FALSE(Date::try_parse("2021-02-30"));
    EXPECT_EQ(Date::try_parse("17")->ordinal(), 17);
    const auto ts = Timestamp::try_parse("2021-03-01T10:15:30Z");
    ASSERT_TRUE(ts);
    EXPECT_EQ(ts->seconds, 10 * 3600 + 15 * 60 + 30);
}

TEST(MarketData, LogReturns) {
    EXPECT_EQ(daily_log_returns(daily_from_closes({100, 100})).values[0], 0.0);
    EXPECT_NEAR(daily_log_returns(daily_from_closes({100, 105})).values[0], 0.048790164169432, 1e-12);
    const auto r = daily_log_returns(daily_from_closes({100, 105, 100}));
    EXPECT_NEAR(r.values[1], -std::log(1.05), 1e-15);
    EXPECT_EQ(r.dates[1].ordinal(), 2);
    EXPECT_THROW(daily_log_returns(daily_from_closes({100})), Error);
}

TEST(MarketData, PrecomputedLongFormat) {
    std::istringstream in("date,measure_name,value\n2020-01-02,rk,0.0001\n2020-01-03,rk,0.0002\n2020-01-02,rv,0.0003\n");
    const auto m = parse_precomputed(in);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.at("rk").size(), 2u);
    std::istringstream dup("date,measure_name,value\n2020-01-02,rk,1\n2020-01-02,rk,2\n");
    EXPECT_THROW(parse_precomputed(dup), Error);
}
