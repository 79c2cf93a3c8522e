#ifndef CSACDRIFT_SIMULATOR_HPP
#define CSACDRIFT_SIMULATOR_HPP

// Synthetic CSAC-minus-GPST datasets: a free-running clock (deterministic
// quadratic + random-walk FM + white PM) observed through a GPS timing
// solution whose noise can scale with TDOP.

#include "csacdrift/error.hpp"
#include "csacdrift/geometry.hpp"
#include "csacdrift/random.hpp"
#include "csacdrift/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace csacdrift {

/// Epoch at which the constellation's inertial and Earth-fixed frames
/// coincide. Scenario start times are measured from here.
inline constexpr std::chrono::sys_days kConstellationEpoch{std::chrono::year{2023} / 1 / 1};

/// TDOP assumed for measurement noise before the first epoch with a valid
/// solution (top of the typically observed 0.8-3.0 range).
inline constexpr double kFallbackTdop = 3.0;

/// Free-running clock parameters. Offsets in ns, time in s.
///
/// sigma_rwfm is the random-walk FM intensity: each sample interval tau the
/// frequency offset (ns/s) takes a step N(0, sigma_rwfm^2 * tau).
struct ClockSpec {
    double x0_ns = 4000.0;
    double y0_ns_per_s = 0.05;
    double d_ns_per_s2 = 1e-6;
    double sigma_wpm_ns = 2.0;
    double sigma_rwfm_ns_per_sqrt_s = 1e-6;
    double tdop_noise_gain = 0.0;

    void validate() const {
        for (double v : {x0_ns, y0_ns_per_s, d_ns_per_s2, sigma_wpm_ns, sigma_rwfm_ns_per_sqrt_s, tdop_noise_gain}) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::invalid_argument, "clock parameters must be finite");
            }
        }
        if (sigma_wpm_ns < 0.0 || sigma_rwfm_ns_per_sqrt_s < 0.0 || tdop_noise_gain < 0.0) {
            throw Error(ErrorKind::invalid_argument, "clock noise levels must be non-negative");
        }
    }

    /// Deterministic part x0 + y0 t + d t^2 / 2.
    double deterministic(double t) const { return x0_ns + y0_ns_per_s * t + 0.5 * d_ns_per_s2 * t * t; }
};

struct Scenario {
    std::string name;
    std::chrono::sys_seconds start{kConstellationEpoch};
    double duration_s = 18.0 * 3600.0;
    double cadence_s = 2.0;
    ReceiverPos rx;
    std::optional<int> max_sats;
    double mask_rad = kDefaultElevationMask_rad;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
            throw Error(ErrorKind::invalid_argument, "scenario duration must be positive");
        }
        if (!(cadence_s > 0.0) || !std::isfinite(cadence_s)) {
            throw Error(ErrorKind::invalid_argument, "scenario cadence must be positive");
        }
        const double steps = duration_s / cadence_s;
        if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
            throw Error(ErrorKind::invalid_argument, "scenario duration must be a multiple of the cadence");
        }
        if (std::abs(rx.lat_rad) > std::numbers::pi / 2.0) {
            throw Error(ErrorKind::invalid_argument, "latitude outside [-90, 90] deg");
        }
        if (max_sats && *max_sats <= 0) {
            throw Error(ErrorKind::invalid_argument, "max_sats must be positive");
        }
        if (!(mask_rad >= 0.0 && mask_rad < std::numbers::pi / 2.0)) {
            throw Error(ErrorKind::invalid_argument, "elevation mask must lie in [0, 90) deg");
        }
    }

    std::size_t sample_count() const { return static_cast<std::size_t>(std::llround(duration_s / cadence_s)) + 1; }

    /// Seconds from kConstellationEpoch to the scenario start.
    double start_offset_s() const {
        return static_cast<double>((start - std::chrono::sys_seconds{kConstellationEpoch}).count());
    }
};

/// Elevation mask used by the preset scenarios. With the nominal
/// constellation it yields 5-7 usable satellites under a cap of 7 and TDOP
/// between roughly 0.8 and 3.0 for scenario (1).
inline constexpr double kPresetElevationMask_rad = 10.0 * std::numbers::pi / 180.0;

/// The three measurement campaigns: Incheon, New York, Florence. Each covers
/// 18 h at 2 s (6 h fit + 12 h coast).
inline std::vector<Scenario> preset_scenarios() {
    using namespace std::chrono;
    const auto make = [](std::string name, year_month_day date, int hour, double lat, double lon, double alt,
                         int max_sats, std::uint64_t seed) {
        Scenario s;
        s.name = std::move(name);
        s.start = sys_seconds{sys_days{date}} + hours{hour};
        s.duration_s = 18.0 * 3600.0;
        s.cadence_s = 2.0;
        s.rx = {deg2rad(lat), deg2rad(lon), alt};
        s.max_sats = max_sats;
        s.mask_rad = kPresetElevationMask_rad;
        s.seed = seed;
        return s;
    };
    return {
        make("scenario-1", year{2023} / 1 / 10, 10, 37.6315, 126.3633, 11.665, 7, 1),
        make("scenario-2", year{2023} / 1 / 8, 4, 43.0830, -77.5890, 206.550, 8, 2),
        make("scenario-3", year{2023} / 1 / 9, 4, 43.7800, 11.2500, 31.200, 9, 3),
    };
}

/// Per-epoch GPS quality metadata for a scenario.
struct EpochQuality {
    double t_rel_s = 0.0;
    int n_vis = 0;
    std::optional<DopSet> dops;
};

inline std::vector<EpochQuality> sky_timeline(const Scenario& scn, const Constellation& cst) {
    scn.validate();
    cst.validate();
    const std::size_t n = scn.sample_count();
    const double t0 = scn.start_offset_s();
    std::vector<EpochQuality> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t_rel = static_cast<double>(k) * scn.cadence_s;
        const auto sky = sky_state(cst, scn.rx, t0 + t_rel, scn.mask_rad, scn.max_sats, t_rel);
        out.push_back({t_rel, sky.n_vis, sky.dops});
    }
    return out;
}

namespace stream {
inline constexpr std::uint64_t random_walk = 1;
inline constexpr std::uint64_t white_phase = 2;
inline constexpr std::uint64_t measurement = 3;
} // namespace stream

/// Clock offsets x_k at t_k = k * cadence. Without noise this is exactly
/// ClockSpec::deterministic(t_k).
inline std::vector<double> simulate_clock_truth(const ClockSpec& spec, std::size_t n, double cadence_s,
                                                std::uint64_t seed) {
    spec.validate();
    if (n == 0) {
        throw Error(ErrorKind::invalid_argument, "sample count must be at least 1");
    }
    if (!(cadence_s > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "cadence must be positive");
    }

    Rng walk(derive_seed(seed, stream::random_walk));
    Rng white(derive_seed(seed, stream::white_phase));
    const double freq_step = spec.sigma_rwfm_ns_per_sqrt_s * std::sqrt(cadence_s);

    std::vector<double> x(n);
    double rw_freq = 0.0, rw_phase = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * cadence_s;
        if (k > 0 && spec.sigma_rwfm_ns_per_sqrt_s > 0.0) {
            rw_freq += walk.normal(freq_step);
            rw_phase += rw_freq * cadence_s;
        }
        double v = spec.deterministic(t) + rw_phase;
        if (spec.sigma_wpm_ns > 0.0) {
            v += white.normal(spec.sigma_wpm_ns);
        }
        x[k] = v;
    }
    return x;
}

/// Builds one measured dataset from precomputed sky metadata.
inline MeasurementSeries simulate_from_timeline(const std::vector<EpochQuality>& timeline, const Scenario& scn,
                                                const ClockSpec& spec, std::uint64_t seed, std::string label) {
    auto truth = simulate_clock_truth(spec, timeline.size(), scn.cadence_s, seed);
    Rng meas(derive_seed(seed, stream::measurement));

    std::vector<Sample> samples;
    samples.reserve(timeline.size());
    double last_tdop = kFallbackTdop;
    for (std::size_t k = 0; k < timeline.size(); ++k) {
        const auto& q = timeline[k];
        Sample s;
        s.epoch.t_rel_s = q.t_rel_s;
        s.n_vis = q.n_vis;
        if (q.dops) {
            s.tdop = q.dops->tdop;
            last_tdop = q.dops->tdop;
        }
        s.offset_ns = truth[k];
        if (spec.tdop_noise_gain > 0.0) {
            s.offset_ns += meas.normal(spec.tdop_noise_gain * last_tdop);
        }
        samples.push_back(std::move(s));
    }
    return MeasurementSeries(std::move(samples), scn.cadence_s, std::move(label));
}

inline std::string replicate_label(const Scenario& scn, std::size_t index) {
    return (scn.name.empty() ? std::string("dataset") : scn.name) + "/rep" + std::to_string(index);
}

/// Single dataset; identical to replicate(scn, spec, cst, k)[0].
inline MeasurementSeries simulate_dataset(const Scenario& scn, const ClockSpec& spec, const Constellation& cst) {
    return simulate_from_timeline(sky_timeline(scn, cst), scn, spec, derive_seed(scn.seed, 0), replicate_label(scn, 0));
}

/// k datasets over the same sky (identical n_vis/tdop per epoch) with
/// independent noise; replicate i uses derive_seed(scn.seed, i).
inline std::vector<MeasurementSeries> replicate(const Scenario& scn, const ClockSpec& spec, const Constellation& cst,
                                                std::size_t k) {
    if (k < 1) {
        throw Error(ErrorKind::invalid_argument, "replicate count must be at least 1");
    }
    const auto timeline = sky_timeline(scn, cst);
    std::vector<MeasurementSeries> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(simulate_from_timeline(timeline, scn, spec, derive_seed(scn.seed, i), replicate_label(scn, i)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON configuration

/// ISO-8601 UTC timestamp "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z'.
inline std::optional<std::chrono::sys_seconds> parse_utc(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char tail[4] = {0};
    const int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%3s", &y, &mo, &d, &h, &mi, &s, tail);
    if (n < 6 || (n == 7 && std::string(tail) != "Z")) {
        return std::nullopt;
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
        return std::nullopt;
    }
    return sys_seconds{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{s};
}

inline std::string format_utc(std::chrono::sys_seconds t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (!ok.count(item.key())) {
            throw Error(ErrorKind::config, where + "." + item.key() + ": unknown field");
        }
    }
}

inline double number_field(const nlohmann::json& obj, const std::string& where, const char* key) {
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        throw Error(ErrorKind::config, where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

template <typename T>
void read_number(const nlohmann::json& obj, const std::string& where, const char* key, T& out) {
    if (obj.contains(key)) {
        out = static_cast<T>(number_field(obj, where, key));
    }
}

} // namespace detail

inline ClockSpec clock_spec_from_json(const nlohmann::json& j) {
    const std::string where = "clock";
    if (!j.is_object()) {
        throw Error(ErrorKind::config, where + ": expected an object");
    }
    detail::reject_unknown_keys(j, where,
                                {"x0_ns", "y0_ns_per_s", "d_ns_per_s2", "sigma_wpm_ns", "sigma_rwfm_ns_per_sqrt_s",
                                 "tdop_noise_gain"});
    ClockSpec c;
    detail::read_number(j, where, "x0_ns", c.x0_ns);
    detail::read_number(j, where, "y0_ns_per_s", c.y0_ns_per_s);
    detail::read_number(j, where, "d_ns_per_s2", c.d_ns_per_s2);
    detail::read_number(j, where, "sigma_wpm_ns", c.sigma_wpm_ns);
    detail::read_number(j, where, "sigma_rwfm_ns_per_sqrt_s", c.sigma_rwfm_ns_per_sqrt_s);
    detail::read_number(j, where, "tdop_noise_gain", c.tdop_noise_gain);
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::config, where + ": " + e.what());
    }
    return c;
}

inline nlohmann::json to_json(const ClockSpec& c) {
    return {{"x0_ns", c.x0_ns},
            {"y0_ns_per_s", c.y0_ns_per_s},
            {"d_ns_per_s2", c.d_ns_per_s2},
            {"sigma_wpm_ns", c.sigma_wpm_ns},
            {"sigma_rwfm_ns_per_sqrt_s", c.sigma_rwfm_ns_per_sqrt_s},
            {"tdop_noise_gain", c.tdop_noise_gain}};
}

/// Scenario object. `preset` (1-3) starts from a preset; any other field
/// overrides it. Without a preset, start/lat_deg/lon_deg are required.
inline Scenario scenario_from_json(const nlohmann::json& j) {
    const std::string where = "scenario";
    if (!j.is_object()) {
        throw Error(ErrorKind::config, where + ": expected an object");
    }
    detail::reject_unknown_keys(j, where,
                                {"preset", "name", "start", "duration_s", "cadence_s", "lat_deg", "lon_deg", "alt_m",
                                 "max_sats", "mask_deg", "seed"});
    Scenario s;
    if (j.contains("preset")) {
        const auto& p = j.at("preset");
        if (!p.is_number_integer() || p.get<int>() < 1 || p.get<int>() > 3) {
            throw Error(ErrorKind::config, where + ".preset: expected 1, 2 or 3");
        }
        s = preset_scenarios()[static_cast<std::size_t>(p.get<int>() - 1)];
    } else {
        for (const char* key : {"start", "lat_deg", "lon_deg"}) {
            if (!j.contains(key)) {
                throw Error(ErrorKind::config, where + "." + key + ": required when no preset is given");
            }
        }
    }

    if (j.contains("name")) {
        if (!j.at("name").is_string()) {
            throw Error(ErrorKind::config, where + ".name: expected a string");
        }
        s.name = j.at("name").get<std::string>();
    }
    if (j.contains("start")) {
        const auto& v = j.at("start");
        const auto t = v.is_string() ? parse_utc(v.get<std::string>()) : std::nullopt;
        if (!t) {
            throw Error(ErrorKind::config, where + ".start: expected \"YYYY-MM-DDTHH:MM:SSZ\"");
        }
        s.start = *t;
    }
    detail::read_number(j, where, "duration_s", s.duration_s);
    detail::read_number(j, where, "cadence_s", s.cadence_s);
    if (j.contains("lat_deg")) {
        s.rx.lat_rad = deg2rad(detail::number_field(j, where, "lat_deg"));
    }
    if (j.contains("lon_deg")) {
        s.rx.lon_rad = deg2rad(detail::number_field(j, where, "lon_deg"));
    }
    detail::read_number(j, where, "alt_m", s.rx.alt_m);
    if (j.contains("max_sats")) {
        const auto& v = j.at("max_sats");
        if (v.is_null()) {
            s.max_sats.reset();
        } else if (v.is_number_integer()) {
            s.max_sats = v.get<int>();
        } else {
            throw Error(ErrorKind::config, where + ".max_sats: expected an integer or null");
        }
    }
    if (j.contains("mask_deg")) {
        s.mask_rad = deg2rad(detail::number_field(j, where, "mask_deg"));
    }
    if (j.contains("seed")) {
        const auto& v = j.at("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            throw Error(ErrorKind::config, where + ".seed: expected a non-negative integer");
        }
        s.seed = v.get<std::uint64_t>();
    }
    try {
        s.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::config, where + ": " + e.what());
    }
    return s;
}

inline nlohmann::json to_json(const Scenario& s) {
    nlohmann::json j{{"name", s.name},
                     {"start", format_utc(s.start)},
                     {"duration_s", s.duration_s},
                     {"cadence_s", s.cadence_s},
                     {"lat_deg", rad2deg(s.rx.lat_rad)},
                     {"lon_deg", rad2deg(s.rx.lon_rad)},
                     {"alt_m", s.rx.alt_m},
                     {"mask_deg", rad2deg(s.mask_rad)},
                     {"seed", s.seed}};
    j["max_sats"] = s.max_sats ? nlohmann::json(*s.max_sats) : nlohmann::json(nullptr);
    return j;
}

/// Top-level simulation config: {"scenario": {...}, "clock": {...},
/// "replicates": k, "constellation": [...]}. Only "scenario" is required.
struct SimulationConfig {
    Scenario scenario;
    ClockSpec clock;
    std::size_t replicates = 1;
    Constellation constellation = nominal_gps_constellation();
};

inline SimulationConfig simulation_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error(ErrorKind::config, "config: expected a JSON object");
    }
    detail::reject_unknown_keys(j, "config", {"scenario", "clock", "replicates", "constellation"});
    if (!j.contains("scenario")) {
        throw Error(ErrorKind::config, "config.scenario: required");
    }
    SimulationConfig cfg;
    cfg.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("clock")) {
        cfg.clock = clock_spec_from_json(j.at("clock"));
    }
    if (j.contains("replicates")) {
        const auto& v = j.at("replicates");
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
            throw Error(ErrorKind::config, "config.replicates: expected a positive integer");
        }
        cfg.replicates = v.get<std::size_t>();
    }
    if (j.contains("constellation")) {
        cfg.constellation = constellation_from_json(j.at("constellation"));
    }
    return cfg;
}

inline nlohmann::json to_json(const SimulationConfig& cfg) {
    return {{"scenario", to_json(cfg.scenario)},
            {"clock", to_json(cfg.clock)},
            {"replicates", cfg.replicates},
            {"constellation", constellation_to_json(cfg.constellation)}};
}

} // namespace csacdrift

#endif
