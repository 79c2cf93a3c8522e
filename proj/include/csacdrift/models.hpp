#ifndef CSACDRIFT_MODELS_HPP
#define CSACDRIFT_MODELS_HPP

// Polynomial drift models fitted by (quality-)weighted least squares, their
// extrapolation over a holdover window and the coasting RMSE used to rank them.

#include "csacdrift/error.hpp"
#include "csacdrift/linalg.hpp"
#include "csacdrift/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace csacdrift {

inline constexpr int kMaxModelDegree = 4;

/// How per-sample GPS quality turns into a regression weight.
struct WeightScheme {
    enum class Kind { uniform, visnum_ratio, inverse_tdop };

    Kind kind = Kind::uniform;
    std::optional<int> n_max; // visnum_ratio only

    static WeightScheme uniform() { return {Kind::uniform, std::nullopt}; }
    static WeightScheme inverse_tdop() { return {Kind::inverse_tdop, std::nullopt}; }
    static WeightScheme visnum_ratio(int n_max) { return {Kind::visnum_ratio, n_max}; }

    friend bool operator==(const WeightScheme&, const WeightScheme&) = default;
};

inline std::string_view to_string(WeightScheme::Kind kind) {
    switch (kind) {
    case WeightScheme::Kind::uniform: return "uniform";
    case WeightScheme::Kind::visnum_ratio: return "visnum_ratio";
    case WeightScheme::Kind::inverse_tdop: return "inverse_tdop";
    }
    return "unknown";
}

/// Accepts the canonical names plus the short CLI aliases
/// (visnum, satnum, inv_tdop, tdop).
inline std::optional<WeightScheme::Kind> parse_scheme_kind(std::string_view name) {
    if (name == "uniform" || name == "linear") {
        return WeightScheme::Kind::uniform;
    }
    if (name == "visnum_ratio" || name == "visnum" || name == "satnum") {
        return WeightScheme::Kind::visnum_ratio;
    }
    if (name == "inverse_tdop" || name == "inv_tdop" || name == "tdop") {
        return WeightScheme::Kind::inverse_tdop;
    }
    return std::nullopt;
}

/// Fitted polynomial in (t_rel - t_ref_s); coeffs[k] is in ns/s^k.
struct DriftModel {
    int degree = 1;
    std::vector<double> coeffs;
    WeightScheme scheme;
    double t_ref_s = 0.0;
    std::size_t n_fit = 0;
};

/// Per-sample weights. uniform: 1; inverse_tdop: 1/tdop; visnum_ratio:
/// n_vis/n_max.
inline std::vector<double> weights_for(const MeasurementSeries& series, const WeightScheme& scheme) {
    std::vector<double> w;
    w.reserve(series.size());
    switch (scheme.kind) {
    case WeightScheme::Kind::uniform:
        w.assign(series.size(), 1.0);
        break;
    case WeightScheme::Kind::inverse_tdop:
        for (std::size_t i = 0; i < series.size(); ++i) {
            const auto& tdop = series[i].tdop;
            if (!tdop) {
                throw Error(ErrorKind::metadata,
                            "sample " + std::to_string(i) + " (t=" + detail::format_shortest(series[i].epoch.t_rel_s) +
                                " s) has no tdop; inverse_tdop weighting needs it at every epoch");
            }
            w.push_back(1.0 / *tdop);
        }
        break;
    case WeightScheme::Kind::visnum_ratio: {
        if (!scheme.n_max || *scheme.n_max <= 0) {
            throw Error(ErrorKind::invalid_argument, "visnum_ratio weighting needs a positive n_max");
        }
        const double n_max = *scheme.n_max;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const int n = series[i].n_vis;
            if (n == 0) {
                throw Error(ErrorKind::zero_weight, "sample " + std::to_string(i) + " has n_vis = 0");
            }
            if (n > *scheme.n_max) {
                throw Error(ErrorKind::invalid_argument, "sample " + std::to_string(i) + " has n_vis " +
                                                             std::to_string(n) + " above n_max " +
                                                             std::to_string(*scheme.n_max));
            }
            w.push_back(n / n_max);
        }
        break;
    }
    }
    return w;
}

namespace detail {

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

} // namespace detail

/// Weighted least-squares polynomial fit of the offsets against
/// t_rel - t_ref, t_ref being the first epoch of `series`.
///
/// The normal equations are formed on the time axis in hours, centered and
/// scaled onto [-1, 1], then mapped back to powers of seconds. This keeps a
/// degree-4 fit over several hours well inside double precision.
inline DriftModel fit(const MeasurementSeries& series, int degree, const WeightScheme& scheme) {
    if (degree < 1 || degree > kMaxModelDegree) {
        throw Error(ErrorKind::invalid_argument, "degree must be in [1, " + std::to_string(kMaxModelDegree) + "]");
    }
    const std::size_t n_coef = static_cast<std::size_t>(degree) + 1;
    if (series.size() < n_coef) {
        throw Error(ErrorKind::fit, "degree " + std::to_string(degree) + " needs at least " + std::to_string(n_coef) +
                                        " samples, got " + std::to_string(series.size()));
    }
    auto w = weights_for(series, scheme);

    constexpr double seconds_per_hour = 3600.0;
    const double t_ref = series.front().epoch.t_rel_s;
    const double span_h = (series.back().epoch.t_rel_s - t_ref) / seconds_per_hour;
    const double mid = 0.5 * span_h;
    const double half = 0.5 * span_h;
    if (!(half > 0.0)) {
        throw Error(ErrorKind::fit, "fit window has a single distinct epoch");
    }

    double w_mean = 0.0;
    for (double wi : w) {
        w_mean += wi;
    }
    w_mean /= static_cast<double>(w.size());

    std::vector<double> gram(n_coef * n_coef, 0.0);
    std::vector<double> rhs(n_coef, 0.0);
    std::vector<double> pw(2 * n_coef - 1);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double z = ((series[i].epoch.t_rel_s - t_ref) / seconds_per_hour - mid) / half;
        const double wi = w[i] / w_mean;
        pw[0] = 1.0;
        for (std::size_t k = 1; k < pw.size(); ++k) {
            pw[k] = pw[k - 1] * z;
        }
        for (std::size_t r = 0; r < n_coef; ++r) {
            rhs[r] += wi * pw[r] * series[i].offset_ns;
            for (std::size_t c = 0; c < n_coef; ++c) {
                gram[r * n_coef + c] += wi * pw[r + c];
            }
        }
    }

    const auto a = linalg::cholesky_solve(gram, rhs);
    if (!a) {
        throw Error(ErrorKind::fit, "normal equations are rank-deficient");
    }

    // p(tau) = sum_k a_k ((tau - mid) / half)^k, expanded in powers of tau (h),
    // then converted to powers of seconds.
    DriftModel model;
    model.degree = degree;
    model.scheme = scheme;
    model.t_ref_s = t_ref;
    model.n_fit = series.size();
    model.coeffs.assign(n_coef, 0.0);
    for (std::size_t j = 0; j < n_coef; ++j) {
        double bj = 0.0;
        for (std::size_t k = j; k < n_coef; ++k) {
            bj += (*a)[k] / std::pow(half, static_cast<double>(k)) *
                  detail::binomial(static_cast<int>(k), static_cast<int>(j)) *
                  std::pow(-mid, static_cast<double>(k - j));
        }
        model.coeffs[j] = bj / std::pow(seconds_per_hour, static_cast<double>(j));
    }
    for (double c : model.coeffs) {
        if (!std::isfinite(c)) {
            throw Error(ErrorKind::fit, "fit produced non-finite coefficients");
        }
    }
    return model;
}

inline double predict(const DriftModel& model, double t_rel_s) {
    const double dt = t_rel_s - model.t_ref_s;
    double acc = 0.0;
    for (std::size_t k = model.coeffs.size(); k-- > 0;) {
        acc = acc * dt + model.coeffs[k];
    }
    return acc;
}

/// Root-mean-square of predict(model, t_i) - offset_i over `truth`, in ns.
inline double coast_rmse(const DriftModel& model, const MeasurementSeries& truth) {
    double sum = 0.0;
    for (const auto& s : truth) {
        const double e = predict(model, s.epoch.t_rel_s) - s.offset_ns;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(truth.size()));
}

struct CoastRow {
    int degree = 1;
    WeightScheme scheme;
    std::optional<DriftModel> model;
    std::optional<double> rmse_ns;
    std::string error; // set when the fit failed
};

struct CoastReport {
    double rmse_ns = 0.0;   // best row
    double horizon_s = 0.0; // coast end minus fit end
    std::vector<CoastRow> rows;
};

/// Fits every (degree, scheme) pair on the fit window and ranks them by
/// coasting RMSE. Ties go to the lower degree, then to scheme order
/// uniform < visnum_ratio < inverse_tdop. Rows whose fit failed carry the
/// error text and sort last.
inline CoastReport model_select(const MeasurementSeries& fit_window, const MeasurementSeries& coast_window,
                                const std::vector<int>& degrees, const std::vector<WeightScheme>& schemes) {
    if (degrees.empty() || schemes.empty()) {
        throw Error(ErrorKind::invalid_argument, "model_select needs at least one degree and one scheme");
    }
    if (fit_window.cadence_s() != coast_window.cadence_s()) {
        throw Error(ErrorKind::alignment, "fit and coast windows have different cadences");
    }
    const double gap = coast_window.front().epoch.t_rel_s - fit_window.back().epoch.t_rel_s;
    if (const auto cad = fit_window.cadence_s()) {
        if (std::abs(gap - *cad) > kEpochTolerance_s) {
            throw Error(ErrorKind::alignment, "coast window must start one cadence after the fit window ends");
        }
    } else if (!(gap > 0.0)) {
        throw Error(ErrorKind::alignment, "coast window must start after the fit window");
    }

    CoastReport report;
    report.horizon_s = coast_window.back().epoch.t_rel_s - fit_window.back().epoch.t_rel_s;
    for (int degree : degrees) {
        for (const auto& scheme : schemes) {
            CoastRow row;
            row.degree = degree;
            row.scheme = scheme;
            try {
                row.model = fit(fit_window, degree, scheme);
                row.rmse_ns = coast_rmse(*row.model, coast_window);
            } catch (const Error& e) {
                row.error = e.what();
            }
            report.rows.push_back(std::move(row));
        }
    }

    std::stable_sort(report.rows.begin(), report.rows.end(), [](const CoastRow& a, const CoastRow& b) {
        if (a.rmse_ns.has_value() != b.rmse_ns.has_value()) {
            return a.rmse_ns.has_value();
        }
        if (a.rmse_ns && *a.rmse_ns != *b.rmse_ns) {
            return *a.rmse_ns < *b.rmse_ns;
        }
        if (a.degree != b.degree) {
            return a.degree < b.degree;
        }
        return static_cast<int>(a.scheme.kind) < static_cast<int>(b.scheme.kind);
    });

    if (!report.rows.front().rmse_ns) {
        throw Error(ErrorKind::fit, "no model could be fitted: " + report.rows.front().error);
    }
    report.rmse_ns = *report.rows.front().rmse_ns;
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const WeightScheme& s) {
    nlohmann::json j{{"kind", std::string(to_string(s.kind))}};
    if (s.n_max) {
        j["n_max"] = *s.n_max;
    }
    return j;
}

inline WeightScheme weight_scheme_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw Error(ErrorKind::config, "scheme: expected {\"kind\": ...}");
    }
    const auto kind = parse_scheme_kind(j.at("kind").get<std::string>());
    if (!kind) {
        throw Error(ErrorKind::config, "scheme.kind: unknown weighting scheme");
    }
    WeightScheme s{*kind, std::nullopt};
    if (j.contains("n_max")) {
        s.n_max = j.at("n_max").get<int>();
    }
    return s;
}

inline nlohmann::json to_json(const DriftModel& m) {
    return {{"degree", m.degree},
            {"coeffs_ns_per_s_pow", m.coeffs},
            {"scheme", to_json(m.scheme)},
            {"t_ref_s", m.t_ref_s},
            {"n_fit", m.n_fit}};
}

inline DriftModel drift_model_from_json(const nlohmann::json& j) {
    DriftModel m;
    try {
        m.degree = j.at("degree").get<int>();
        m.coeffs = j.at("coeffs_ns_per_s_pow").get<std::vector<double>>();
        m.scheme = weight_scheme_from_json(j.at("scheme"));
        m.t_ref_s = j.at("t_ref_s").get<double>();
        m.n_fit = j.at("n_fit").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, std::string("drift model: ") + e.what());
    }
    if (m.degree < 1 || m.degree > kMaxModelDegree || m.coeffs.size() != static_cast<std::size_t>(m.degree) + 1) {
        throw Error(ErrorKind::config, "drift model: coefficient count must be degree + 1");
    }
    return m;
}

inline nlohmann::json to_json(const CoastReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json j{{"degree", row.degree}, {"scheme", to_json(row.scheme)}};
        j["rmse_ns"] = row.rmse_ns ? nlohmann::json(*row.rmse_ns) : nlohmann::json(nullptr);
        if (row.model) {
            j["model"] = to_json(*row.model);
        }
        if (!row.error.empty()) {
            j["error"] = row.error;
        }
        rows.push_back(std::move(j));
    }
    return {{"rmse_ns", r.rmse_ns}, {"horizon_s", r.horizon_s}, {"rows", rows}};
}

/// `degree,scheme,rmse_ns`, one row per model in ranking order; failed
/// fits have an empty rmse.
inline void write_csv(const CoastReport& r, std::ostream& out) {
    out << "degree,scheme,rmse_ns\n";
    for (const auto& row : r.rows) {
        out << row.degree << ',' << to_string(row.scheme.kind) << ',';
        if (row.rmse_ns) {
            out << detail::format_fixed(*row.rmse_ns, 6);
        }
        out << '\n';
    }
}

} // namespace csacdrift

#endif
