#ifndef CSACDRIFT_GEOMETRY_HPP
#define CSACDRIFT_GEOMETRY_HPP

// Nominal GPS constellation propagation, satellite visibility from a static
// receiver and dilution-of-precision factors.

#include "csacdrift/error.hpp"
#include "csacdrift/linalg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace csacdrift {

using linalg::Vec3;

namespace wgs84 {
inline constexpr double a = 6378137.0;
inline constexpr double f = 1.0 / 298.257223563;
inline constexpr double e2 = f * (2.0 - f);
inline constexpr double omega_earth = 7.2921151467e-5; // rad/s
inline constexpr double gm = 3.986004418e14;           // m^3/s^2
} // namespace wgs84

inline constexpr double kNominalGpsSemiMajorAxis_m = 26559710.0;
inline constexpr double kDefaultElevationMask_rad = 5.0 * std::numbers::pi / 180.0;
inline constexpr double kMaxGeometryCondition = 1e12;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline double wrap_two_pi(double angle) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(angle, two_pi);
    if (r < 0.0) {
        r += two_pi;
    }
    return r >= two_pi ? 0.0 : r;
}

/// Circular-orbit element set. Angles in radians.
struct OrbitalElement {
    int prn = 0;
    double semi_major_axis_m = kNominalGpsSemiMajorAxis_m;
    double inclination_rad = 0.0;
    double raan_rad = 0.0;
    double arg_lat_epoch_rad = 0.0;

    void validate() const {
        const auto who = "PRN " + std::to_string(prn) + ": ";
        if (prn <= 0) {
            throw Error(ErrorKind::invalid_argument, who + "PRN must be positive");
        }
        if (!(semi_major_axis_m > wgs84::a)) {
            throw Error(ErrorKind::invalid_argument, who + "semi-major axis must exceed the Earth radius");
        }
        if (!(inclination_rad >= 0.0 && inclination_rad <= std::numbers::pi)) {
            throw Error(ErrorKind::invalid_argument, who + "inclination outside [0, pi]");
        }
    }
};

struct Constellation {
    std::vector<OrbitalElement> elements;
    double earth_rotation_rate_rad_s = wgs84::omega_earth;
    double gm_m3_s2 = wgs84::gm;

    void validate() const {
        if (elements.empty()) {
            throw Error(ErrorKind::invalid_argument, "constellation is empty");
        }
        std::set<int> prns;
        for (const auto& e : elements) {
            e.validate();
            if (!prns.insert(e.prn).second) {
                throw Error(ErrorKind::invalid_argument, "duplicate PRN " + std::to_string(e.prn));
            }
        }
    }
};

/// WGS-84 geodetic position.
struct ReceiverPos {
    double lat_rad = 0.0;
    double lon_rad = 0.0;
    double alt_m = 0.0;

    friend bool operator==(const ReceiverPos&, const ReceiverPos&) = default;
};

struct DopSet {
    double gdop = 0.0;
    double pdop = 0.0;
    double hdop = 0.0;
    double vdop = 0.0;
    double tdop = 0.0;
};

struct LineOfSight {
    int prn = 0;
    Vec3 enu{}; // unit vector East-North-Up
    double elevation_rad = 0.0;
};

struct SkyState {
    double t_rel_s = 0.0;
    std::vector<LineOfSight> los; // highest elevation first
    int n_vis = 0;
    std::optional<DopSet> dops;
};

/// 24 satellites in 6 planes (RAAN every 60 deg), 4 per plane 90 deg apart,
/// each plane phased by 30 deg * plane index, 55 deg inclination.
inline Constellation nominal_gps_constellation() {
    Constellation cst;
    for (int plane = 0; plane < 6; ++plane) {
        for (int slot = 0; slot < 4; ++slot) {
            OrbitalElement e;
            e.prn = plane * 4 + slot + 1;
            e.semi_major_axis_m = kNominalGpsSemiMajorAxis_m;
            e.inclination_rad = deg2rad(55.0);
            e.raan_rad = wrap_two_pi(deg2rad(60.0 * plane));
            e.arg_lat_epoch_rad = wrap_two_pi(deg2rad(90.0 * slot + 30.0 * plane));
            cst.elements.push_back(e);
        }
    }
    return cst;
}

inline double orbital_period_s(const OrbitalElement& e, double gm = wgs84::gm) {
    return 2.0 * std::numbers::pi * std::sqrt(e.semi_major_axis_m * e.semi_major_axis_m * e.semi_major_axis_m / gm);
}

/// Earth-fixed position of a satellite `t` seconds after the constellation
/// reference epoch (at which inertial and Earth-fixed axes coincide).
inline Vec3 satellite_ecef(const OrbitalElement& elem, double t, const Constellation& cst) {
    const double a = elem.semi_major_axis_m;
    const double mean_motion = std::sqrt(cst.gm_m3_s2 / (a * a * a));
    const double u = elem.arg_lat_epoch_rad + mean_motion * t;
    const double node = elem.raan_rad - cst.earth_rotation_rate_rad_s * t;

    const double cu = std::cos(u), su = std::sin(u);
    const double cn = std::cos(node), sn = std::sin(node);
    const double ci = std::cos(elem.inclination_rad), si = std::sin(elem.inclination_rad);
    return {a * (cu * cn - su * ci * sn), a * (cu * sn + su * ci * cn), a * su * si};
}

inline Vec3 geodetic_to_ecef(const ReceiverPos& p) {
    const double sl = std::sin(p.lat_rad), cl = std::cos(p.lat_rad);
    const double n = wgs84::a / std::sqrt(1.0 - wgs84::e2 * sl * sl);
    return {(n + p.alt_m) * cl * std::cos(p.lon_rad), (n + p.alt_m) * cl * std::sin(p.lon_rad),
            (n * (1.0 - wgs84::e2) + p.alt_m) * sl};
}

/// Rotates an Earth-fixed vector into the local East-North-Up frame.
inline Vec3 ecef_to_enu(const Vec3& d, const ReceiverPos& p) {
    const double sl = std::sin(p.lat_rad), cl = std::cos(p.lat_rad);
    const double so = std::sin(p.lon_rad), co = std::cos(p.lon_rad);
    return {-so * d[0] + co * d[1], -sl * co * d[0] - sl * so * d[1] + cl * d[2],
            cl * co * d[0] + cl * so * d[1] + sl * d[2]};
}

/// DOP factors from >= 4 unit line-of-sight vectors (ENU). The geometry
/// matrix has rows [-e, -n, -u, 1]; Q = (G^T G)^-1.
inline DopSet dop_from_los(std::span<const Vec3> los) {
    if (los.size() < 4) {
        throw Error(ErrorKind::degenerate_geometry,
                    "need at least 4 line-of-sight vectors, got " + std::to_string(los.size()));
    }
    linalg::Matrix<4> gtg{};
    for (const auto& v : los) {
        if (std::abs(linalg::norm(v) - 1.0) > 1e-6) {
            throw Error(ErrorKind::invalid_argument, "line-of-sight vector is not unit length");
        }
        const std::array<double, 4> row{-v[0], -v[1], -v[2], 1.0};
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                gtg[i][j] += row[i] * row[j];
            }
        }
    }

    const auto inv = linalg::spd_inverse<4>(gtg, kMaxGeometryCondition);
    if (!inv) {
        throw Error(ErrorKind::degenerate_geometry, "geometry matrix is singular or ill-conditioned");
    }
    const auto& q = inv->inverse;
    DopSet d;
    d.hdop = std::sqrt(q[0][0] + q[1][1]);
    d.vdop = std::sqrt(q[2][2]);
    d.pdop = std::sqrt(q[0][0] + q[1][1] + q[2][2]);
    d.tdop = std::sqrt(q[3][3]);
    d.gdop = std::sqrt(q[0][0] + q[1][1] + q[2][2] + q[3][3]);
    return d;
}

/// Satellites visible from `rx` at time `t` above `mask_rad`. When more than
/// `max_sats` are visible the highest-elevation ones are kept (ties go to the
/// lower PRN). DOPs are filled when at least 4 remain and the geometry is
/// non-singular.
inline SkyState sky_state(const Constellation& cst, const ReceiverPos& rx, double t, double mask_rad,
                          std::optional<int> max_sats = std::nullopt, double t_rel_s = 0.0) {
    if (!(mask_rad >= 0.0 && mask_rad < std::numbers::pi / 2.0)) {
        throw Error(ErrorKind::invalid_argument, "elevation mask must lie in [0, pi/2)");
    }
    if (max_sats && *max_sats <= 0) {
        throw Error(ErrorKind::invalid_argument, "max_sats must be positive");
    }

    const Vec3 rx_ecef = geodetic_to_ecef(rx);
    const double min_up = std::sin(mask_rad);

    SkyState state;
    state.t_rel_s = t_rel_s;
    for (const auto& e : cst.elements) {
        const Vec3 d = linalg::sub(satellite_ecef(e, t, cst), rx_ecef);
        const double range = linalg::norm(d);
        Vec3 enu = ecef_to_enu(linalg::scale(1.0 / range, d), rx);
        // Renormalize to keep |los| = 1 to machine precision after rotation.
        enu = linalg::scale(1.0 / linalg::norm(enu), enu);
        if (enu[2] >= min_up) {
            state.los.push_back({e.prn, enu, std::asin(std::clamp(enu[2], -1.0, 1.0))});
        }
    }

    std::sort(state.los.begin(), state.los.end(), [](const LineOfSight& a, const LineOfSight& b) {
        if (a.elevation_rad != b.elevation_rad) {
            return a.elevation_rad > b.elevation_rad;
        }
        return a.prn < b.prn;
    });
    if (max_sats && state.los.size() > static_cast<std::size_t>(*max_sats)) {
        state.los.resize(static_cast<std::size_t>(*max_sats));
    }
    state.n_vis = static_cast<int>(state.los.size());

    if (state.n_vis >= 4) {
        std::vector<Vec3> vecs;
        vecs.reserve(state.los.size());
        for (const auto& l : state.los) {
            vecs.push_back(l.enu);
        }
        try {
            state.dops = dop_from_los(vecs);
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::degenerate_geometry) {
                throw;
            }
        }
    }
    return state;
}

// JSON form: a list of {prn, a_m, inc_deg, raan_deg, arg_lat_deg}.

inline Constellation constellation_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw Error(ErrorKind::config, "constellation: expected a JSON array of satellites");
    }
    Constellation cst;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& s = j[i];
        const auto field = [&](const char* name) {
            if (!s.contains(name) || !s[name].is_number()) {
                throw Error(ErrorKind::config,
                            "constellation[" + std::to_string(i) + "]." + name + ": missing or not a number");
            }
            return s[name].get<double>();
        };
        OrbitalElement e;
        e.prn = static_cast<int>(field("prn"));
        e.semi_major_axis_m = field("a_m");
        e.inclination_rad = deg2rad(field("inc_deg"));
        e.raan_rad = wrap_two_pi(deg2rad(field("raan_deg")));
        e.arg_lat_epoch_rad = wrap_two_pi(deg2rad(field("arg_lat_deg")));
        cst.elements.push_back(e);
    }
    try {
        cst.validate();
    } catch (const Error& err) {
        throw Error(ErrorKind::config, std::string("constellation: ") + err.what());
    }
    return cst;
}

inline nlohmann::json constellation_to_json(const Constellation& cst) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : cst.elements) {
        out.push_back({{"prn", e.prn},
                       {"a_m", e.semi_major_axis_m},
                       {"inc_deg", rad2deg(e.inclination_rad)},
                       {"raan_deg", rad2deg(e.raan_rad)},
                       {"arg_lat_deg", rad2deg(e.arg_lat_epoch_rad)}});
    }
    return out;
}

} // namespace csacdrift

#endif
