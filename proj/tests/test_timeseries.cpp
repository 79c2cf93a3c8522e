#include "csacdrift/timeseries.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace csacdrift;

namespace {

const std::string kHeader = "t_rel_s,offset_ns,n_vis,tdop\n";

ErrorKind kind_of(const std::function<void()>& f, std::optional<std::size_t>* line = nullptr) {
    try {
        f();
    } catch (const Error& e) {
        if (line) {
            *line = e.line();
        }
        return e.kind();
    }
    ADD_FAILURE() << "no csacdrift::Error thrown";
    return ErrorKind::config;
}

MeasurementSeries ramp(std::size_t n, double cadence = 2.0) {
    std::vector<Sample> s;
    for (std::size_t i = 0; i < n; ++i) {
        s.push_back({{cadence * static_cast<double>(i), std::nullopt}, 10.0 + 0.5 * static_cast<double>(i), 7, 1.1});
    }
    return MeasurementSeries(std::move(s), cadence);
}

} // namespace

TEST(ParseSeries, TwoRows) {
    const auto s = parse_series(kHeader + "0,100,7,1.1\n2,105,7,1.1\n", 2.0);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.offsets(), (std::vector<double>{100.0, 105.0}));
    EXPECT_EQ(s[1].n_vis, 7);
    EXPECT_DOUBLE_EQ(*s[1].tdop, 1.1);
    EXPECT_EQ(s.cadence_s(), 2.0);
}

TEST(ParseSeries, EmptyTdopIsAbsent) {
    const auto s = parse_series(kHeader + "0,0,3,\n");
    ASSERT_EQ(s.size(), 1u);
    EXPECT_FALSE(s[0].tdop.has_value());
    EXPECT_EQ(s[0].n_vis, 3);
}

TEST(ParseSeries, CadenceErrorReportsLine) {
    std::optional<std::size_t> line;
    const auto k = kind_of([] { parse_series(kHeader + "0,1,5,1.0\n1,2,5,1.0\n", 2.0); }, &line);
    EXPECT_EQ(k, ErrorKind::cadence);
    EXPECT_EQ(line, 3u);
}

TEST(ParseSeries, Rejections) {
    EXPECT_EQ(kind_of([] { parse_series(std::string_view("time,offset\n0,1\n")); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,1,5\n"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,abc,5,1.0\n"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,1,3,1.0\n"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,1,5,-1\n"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,1,5,1.0 \n"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "2,1,5,1\n0,1,5,1\n"); }), ErrorKind::ordering);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,1,5,1\n0,1,5,1\n"); }), ErrorKind::ordering);
    EXPECT_EQ(kind_of([] { parse_series(kHeader); }), ErrorKind::insufficient_data);
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,nan,5,1\n"); }), ErrorKind::parse);
}

TEST(ParseSeries, OrderingCheckedBeforeCadence) {
    std::optional<std::size_t> line;
    EXPECT_EQ(kind_of([] { parse_series(kHeader + "0,1,5,1\n2,1,5,1\n1,1,5,1\n", 2.0); }, &line), ErrorKind::ordering);
    EXPECT_EQ(line, 4u);
}

TEST(EmitSeries, ShapeAndAbsentTdop) {
    std::vector<Sample> s{{{0.0, std::nullopt}, 1.5, 7, 1.25}, {{2.0, std::nullopt}, -3.0, 3, std::nullopt}};
    const auto text = emit_series(MeasurementSeries(s, 2.0));
    EXPECT_EQ(text, kHeader + "0,1.500000,7,1.25\n2,-3.000000,3,\n");
}

TEST(EmitSeries, RoundTrip) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> off(-5e4, 5e4), tdop(0.6, 6.0);
    std::uniform_int_distribution<int> nv(0, 12);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Sample> samples;
        for (int i = 0; i < 40; ++i) {
            Sample s;
            s.epoch.t_rel_s = 2.0 * i;
            s.offset_ns = off(rng);
            s.n_vis = nv(rng);
            if (s.n_vis >= 4) {
                s.tdop = tdop(rng);
            }
            samples.push_back(s);
        }
        const MeasurementSeries a(samples, 2.0, "x");
        const auto b = parse_series(emit_series(a), 2.0, "x");
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(a[i].epoch.t_rel_s, b[i].epoch.t_rel_s, 1e-9);
            EXPECT_NEAR(a[i].offset_ns, b[i].offset_ns, 1e-3);
            EXPECT_EQ(a[i].n_vis, b[i].n_vis);
            EXPECT_EQ(a[i].tdop, b[i].tdop);
        }
        // emitting the parsed copy is a fixed point
        EXPECT_EQ(emit_series(b), emit_series(parse_series(emit_series(b), 2.0)));
    }
}

TEST(SplitAt, PaperProtocol) {
    const auto s = ramp(32401);
    const auto [fit, coast] = split_at(s, 10801);
    EXPECT_EQ(fit.size(), 10801u);
    EXPECT_EQ(coast.size(), 21600u);
}

TEST(SplitAt, EdgesAndConcatenation) {
    const auto s = ramp(3);
    const auto [fit, coast] = split_at(s, 1);
    EXPECT_EQ(fit.size(), 1u);
    EXPECT_EQ(coast.size(), 2u);
    EXPECT_EQ(kind_of([&] { split_at(s, 3); }), ErrorKind::bounds);
    EXPECT_EQ(kind_of([&] { split_at(s, 0); }), ErrorKind::bounds);

    const auto big = ramp(57);
    for (std::size_t k = 1; k < big.size(); ++k) {
        const auto [f, c] = split_at(big, k);
        std::vector<Sample> joined(f.begin(), f.end());
        joined.insert(joined.end(), c.begin(), c.end());
        ASSERT_EQ(MeasurementSeries(joined, 2.0), big);
    }
}

TEST(MeasurementSeries, Invariants) {
    EXPECT_EQ(kind_of([] { MeasurementSeries({}); }), ErrorKind::insufficient_data);
    EXPECT_EQ(kind_of([] { MeasurementSeries({{{-1.0, std::nullopt}, 0.0, 5, 1.0}}); }), ErrorKind::invalid_argument);
    EXPECT_EQ(kind_of([] { MeasurementSeries({{{0.0, std::nullopt}, 0.0, 3, 1.0}}); }), ErrorKind::invalid_argument);
    EXPECT_EQ(kind_of([] {
                  MeasurementSeries({{{0.0, std::nullopt}, 0.0, 5, 1.0}, {{3.0, std::nullopt}, 0.0, 5, 1.0}}, 2.0);
              }),
              ErrorKind::cadence);
    // without a declared cadence any increasing spacing is fine
    EXPECT_NO_THROW(MeasurementSeries({{{0.0, std::nullopt}, 0.0, 5, 1.0}, {{3.0, std::nullopt}, 0.0, 5, 1.0}},
                                      std::nullopt));
}
