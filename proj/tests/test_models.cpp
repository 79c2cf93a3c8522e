#include "csacdrift/models.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <random>

using namespace csacdrift;

namespace {

MeasurementSeries series_from(const std::vector<double>& t, const std::vector<double>& y,
                              std::optional<double> cadence = std::nullopt, std::vector<double> tdop = {},
                              std::vector<int> n_vis = {}) {
    std::vector<Sample> s;
    for (std::size_t i = 0; i < t.size(); ++i) {
        Sample x;
        x.epoch.t_rel_s = t[i];
        x.offset_ns = y[i];
        x.n_vis = n_vis.empty() ? 7 : n_vis[i];
        if (!tdop.empty()) {
            x.tdop = tdop[i];
        }
        s.push_back(x);
    }
    return MeasurementSeries(std::move(s), cadence);
}

double poly(const std::vector<double>& c, double dt) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
        acc = acc * dt + c[k];
    }
    return acc;
}

} // namespace

TEST(Weights, Schemes) {
    const auto s = series_from({0, 2}, {0, 0}, 2.0, {2.0, 1.0}, {7, 5});
    EXPECT_EQ(weights_for(s, WeightScheme::uniform()), (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(weights_for(s, WeightScheme::inverse_tdop()), (std::vector<double>{0.5, 1.0}));
    const auto v = weights_for(s, WeightScheme::visnum_ratio(7));
    EXPECT_DOUBLE_EQ(v[0], 1.0);
    EXPECT_DOUBLE_EQ(v[1], 5.0 / 7.0);
}

TEST(Weights, Errors) {
    const auto no_tdop = series_from({0, 2}, {0, 0});
    try {
        weights_for(no_tdop, WeightScheme::inverse_tdop());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::metadata);
    }
    const auto zero = series_from({0, 2}, {0, 0}, 2.0, {}, {0, 5});
    try {
        weights_for(zero, WeightScheme::visnum_ratio(7));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::zero_weight);
    }
    EXPECT_THROW(weights_for(zero, WeightScheme{WeightScheme::Kind::visnum_ratio, std::nullopt}), Error);
    EXPECT_THROW(weights_for(series_from({0}, {0}, 2.0, {}, {9}), WeightScheme::visnum_ratio(7)), Error);
}

TEST(Fit, ThreePointLine) {
    const auto m = fit(series_from({0, 1, 2}, {1, 2, 5}), 1, WeightScheme::uniform());
    EXPECT_NEAR(m.coeffs[1], 2.0, 1e-12);
    EXPECT_NEAR(m.coeffs[0], 2.0 / 3.0, 1e-12);
    EXPECT_EQ(m.n_fit, 3u);
    EXPECT_EQ(m.t_ref_s, 0.0);
}

TEST(Fit, ExactLineAnyWeights) {
    std::vector<double> t, y, tdop;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> td(0.7, 4.0);
    for (int i = 0; i < 100; ++i) {
        t.push_back(2.0 * i);
        y.push_back(3.0 + 2.0 * t.back());
        tdop.push_back(td(rng));
    }
    const auto s = series_from(t, y, 2.0, tdop);
    for (const auto& scheme : {WeightScheme::uniform(), WeightScheme::inverse_tdop(), WeightScheme::visnum_ratio(7)}) {
        const auto m = fit(s, 1, scheme);
        EXPECT_NEAR(m.coeffs[0], 3.0, 1e-9);
        EXPECT_NEAR(m.coeffs[1], 2.0, 1e-9);
    }
}

TEST(Fit, EqualTdopMatchesUniform) {
    std::vector<double> t, y;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int i = 0; i < 300; ++i) {
        t.push_back(2.0 * i);
        y.push_back(100.0 + 0.05 * t.back() + n(rng));
    }
    const auto s = series_from(t, y, 2.0, std::vector<double>(t.size(), 1.7));
    for (int d = 1; d <= 4; ++d) {
        const auto a = fit(s, d, WeightScheme::uniform()), b = fit(s, d, WeightScheme::inverse_tdop());
        for (int k = 0; k <= d; ++k) {
            EXPECT_NEAR(a.coeffs[k], b.coeffs[k], 1e-12 * std::max(1.0, std::abs(a.coeffs[k])));
        }
    }
}

TEST(Fit, RecoversPolynomialsAfterReferenceShift) {
    // window starting late, as a coast-style fit would
    std::vector<double> t, y;
    const std::vector<double> c{-40.0, 0.2, 3e-5, -2e-9, 4e-14};
    for (int i = 0; i < 2000; ++i) {
        t.push_back(5000.0 + 2.0 * i);
        y.push_back(poly(c, t.back() - 5000.0));
    }
    const auto m = fit(series_from(t, y, 2.0), 4, WeightScheme::uniform());
    EXPECT_EQ(m.t_ref_s, 5000.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
        EXPECT_NEAR(m.coeffs[k], c[k], 1e-8 * std::abs(c[k]));
    }
}

TEST(Fit, OracleSseAndOrthogonality) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> uw(0.1, 3.0), uy(-50.0, 50.0);
    std::uniform_int_distribution<int> un(6, 50), ud(1, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = un(rng), d = std::min(ud(rng), n - 2);
        std::vector<double> t, y, tdop;
        for (int i = 0; i < n; ++i) {
            t.push_back(2.0 * i);
            y.push_back(uy(rng));
            tdop.push_back(uw(rng));
        }
        const auto s = series_from(t, y, 2.0, tdop);
        const auto m = fit(s, d, WeightScheme::inverse_tdop());

        // Eigen oracle: column-pivoted QR on sqrt(w)-scaled Vandermonde in hours
        Eigen::MatrixXd a(n, d + 1);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            const double sw = std::sqrt(1.0 / tdop[i]);
            for (int k = 0; k <= d; ++k) {
                a(i, k) = sw * std::pow(t[i] / 3600.0, k);
            }
            b(i) = sw * y[i];
        }
        const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
        const double sse_oracle = (a * x - b).squaredNorm();

        double sse = 0.0;
        std::vector<double> orth(d + 1, 0.0);
        double scale = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = y[i] - predict(m, t[i]);
            sse += r * r / tdop[i];
            scale += y[i] * y[i] / tdop[i];
            for (int k = 0; k <= d; ++k) {
                orth[k] += r / tdop[i] * std::pow(t[i] / t.back(), k);
            }
        }
        EXPECT_NEAR(sse, sse_oracle, 1e-6 * sse_oracle);
        for (double o : orth) {
            EXPECT_LT(std::abs(o), 1e-6 * std::sqrt(scale * n));
        }
    }
}

TEST(Fit, WeightScaleInvariance) {
    std::vector<double> t, y;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 120; ++i) {
        t.push_back(2.0 * i);
        y.push_back(n(rng));
    }
    const std::vector<int> nv(120, 6);
    const auto s = series_from(t, y, 2.0, {}, nv);
    for (int d = 1; d <= 4; ++d) {
        const auto a = fit(s, d, WeightScheme::visnum_ratio(6)), b = fit(s, d, WeightScheme::visnum_ratio(12));
        for (int k = 0; k <= d; ++k) {
            EXPECT_NEAR(a.coeffs[k], b.coeffs[k], 1e-12 * std::max(1e-12, std::abs(a.coeffs[k])) + 1e-300);
        }
    }
}

TEST(Fit, Errors) {
    const auto s = series_from({0, 2}, {1, 2});
    EXPECT_THROW(fit(s, 0, WeightScheme::uniform()), Error);
    EXPECT_THROW(fit(s, 5, WeightScheme::uniform()), Error);
    try {
        fit(s, 2, WeightScheme::uniform());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::fit);
    }
}

TEST(Predict, Examples) {
    DriftModel m;
    m.coeffs = {3.0, 2.0};
    EXPECT_DOUBLE_EQ(predict(m, 10.0), 23.0);
    m.t_ref_s = 4.0;
    EXPECT_DOUBLE_EQ(predict(m, 4.0), 3.0);
    DriftModel q;
    q.degree = 2;
    q.coeffs = {0.0, 0.0, 1.0};
    EXPECT_DOUBLE_EQ(predict(q, 3.0), 9.0);
}

TEST(CoastRmse, Examples) {
    DriftModel zero;
    zero.coeffs = {0.0, 0.0};
    EXPECT_NEAR(coast_rmse(zero, series_from({0, 2}, {3, 4})), std::sqrt(12.5), 1e-12);

    DriftModel line;
    line.coeffs = {1.0, 0.5};
    const auto truth = series_from({0, 2, 4}, {1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(coast_rmse(line, truth), 0.0);
    line.coeffs[0] += 7.0;
    EXPECT_NEAR(coast_rmse(line, truth), 7.0, 1e-12);
    // shifting truth and prediction together changes nothing
    const auto shifted = series_from({0, 2, 4}, {8.0 + 5.0, 9.0 + 5.0, 10.0 + 5.0});
    line.coeffs[0] += 5.0;
    EXPECT_NEAR(coast_rmse(line, shifted), 0.0, 1e-12);
}

TEST(ModelSelect, NoiseFreeLineRanksDegreeOneFirst) {
    std::vector<double> t, y;
    for (int i = 0; i < 400; ++i) {
        t.push_back(2.0 * i);
        y.push_back(4000.0 + 0.05 * t.back());
    }
    const auto s = series_from(t, y, 2.0, std::vector<double>(t.size(), 1.5));
    const auto [fw, cw] = split_at(s, 150);
    const auto r = model_select(fw, cw, {4, 3, 2, 1}, {WeightScheme::inverse_tdop(), WeightScheme::uniform()});
    ASSERT_EQ(r.rows.size(), 8u);
    EXPECT_EQ(r.rows[0].degree, 1);
    EXPECT_EQ(r.rows[0].scheme.kind, WeightScheme::Kind::uniform);
    EXPECT_LT(r.rmse_ns, 1e-6);
    EXPECT_DOUBLE_EQ(r.horizon_s, 2.0 * 250);
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        EXPECT_LE(*r.rows[i - 1].rmse_ns, *r.rows[i].rmse_ns);
    }
}

TEST(ModelSelect, Alignment) {
    const auto a = series_from({0, 2, 4}, {0, 0, 0}, 2.0);
    const auto gap = series_from({10, 12}, {0, 0}, 2.0);
    try {
        model_select(a, gap, {1}, {WeightScheme::uniform()});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::alignment);
    }
}

TEST(ModelSelect, FailedRowsSortLast) {
    const auto fw = series_from({0, 2, 4}, {0, 1, 2}, 2.0);
    const auto cw = series_from({6, 8}, {3, 4}, 2.0);
    const auto r = model_select(fw, cw, {1, 3}, {WeightScheme::uniform()});
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].degree, 1);
    EXPECT_FALSE(r.rows[1].rmse_ns.has_value());
    EXPECT_FALSE(r.rows[1].error.empty());
}

TEST(ModelSelect, InverseTdopBeatsUniformOnAverage) {
    // heteroscedastic noise: sigma proportional to tdop
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01(0.0, 1.0);
    double sum_u = 0.0, sum_t = 0.0;
    const int seeds = 100;
    for (int seed = 0; seed < seeds; ++seed) {
        std::vector<double> t, y, tdop;
        for (int i = 0; i < 600; ++i) {
            t.push_back(2.0 * i);
            tdop.push_back(1.0 + 2.5 * (0.5 + 0.5 * std::sin(i / 37.0)));
            y.push_back(10.0 + 0.01 * t.back() + 5.0 * tdop.back() * n01(rng));
        }
        const auto s = series_from(t, y, 2.0, tdop);
        const auto [fw, cw] = split_at(s, 200);
        // score against the noise-free line
        std::vector<double> ct, cy;
        for (const auto& x : cw) {
            ct.push_back(x.epoch.t_rel_s);
            cy.push_back(10.0 + 0.01 * x.epoch.t_rel_s);
        }
        const auto truth = series_from(ct, cy, 2.0);
        sum_u += coast_rmse(fit(fw, 1, WeightScheme::uniform()), truth);
        sum_t += coast_rmse(fit(fw, 1, WeightScheme::inverse_tdop()), truth);
    }
    EXPECT_LE(sum_t, sum_u);
}

TEST(Serialization, DriftModelRoundTrip) {
    DriftModel m;
    m.degree = 2;
    m.coeffs = {1.0, -2.5e-2, 3.25e-7};
    m.scheme = WeightScheme::visnum_ratio(8);
    m.t_ref_s = 12.0;
    m.n_fit = 10801;
    const auto back = drift_model_from_json(to_json(m));
    EXPECT_EQ(back.degree, m.degree);
    EXPECT_EQ(back.coeffs, m.coeffs);
    EXPECT_EQ(back.scheme, m.scheme);
    EXPECT_EQ(back.t_ref_s, m.t_ref_s);
    EXPECT_EQ(back.n_fit, m.n_fit);
    EXPECT_THROW(drift_model_from_json(nlohmann::json{{"degree", 2}}), Error);
}

TEST(Serialization, SchemeNames) {
    EXPECT_EQ(parse_scheme_kind("linear"), WeightScheme::Kind::uniform);
    EXPECT_EQ(parse_scheme_kind("visnum"), WeightScheme::Kind::visnum_ratio);
    EXPECT_EQ(parse_scheme_kind("inv_tdop"), WeightScheme::Kind::inverse_tdop);
    EXPECT_FALSE(parse_scheme_kind("cubic").has_value());
}
