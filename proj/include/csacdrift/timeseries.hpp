#ifndef CSACDRIFT_TIMESERIES_HPP
#define CSACDRIFT_TIMESERIES_HPP

#include "csacdrift/error.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace csacdrift {

/// Header line of the measurement CSV format. Bit-exact.
inline constexpr std::string_view kSeriesCsvHeader = "t_rel_s,offset_ns,n_vis,tdop";

/// Epoch spacing tolerance used when checking a declared cadence.
inline constexpr double kEpochTolerance_s = 1e-9;

struct Epoch {
    double t_rel_s = 0.0;
    std::optional<std::chrono::sys_seconds> t_abs;

    friend bool operator==(const Epoch&, const Epoch&) = default;
};

/// One CSAC-minus-GPST measurement and the GPS quality metadata at its epoch.
/// `tdop` is absent when fewer than four satellites were usable.
struct Sample {
    Epoch epoch;
    double offset_ns = 0.0;
    int n_vis = 0;
    std::optional<double> tdop;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Validated, immutable sequence of samples. Construction enforces:
/// non-empty, t_rel >= 0, strictly increasing epochs, finite offsets,
/// tdop present implies tdop > 0 and n_vis >= 4, and (when a cadence is
/// declared) uniform spacing equal to that cadence.
class MeasurementSeries {
public:
    MeasurementSeries(std::vector<Sample> samples, std::optional<double> cadence_s = 2.0, std::string label = {})
        : samples_(std::move(samples)), cadence_s_(cadence_s), label_(std::move(label)) {
        validate();
    }

    std::span<const Sample> samples() const noexcept { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    const Sample& front() const { return samples_.front(); }
    const Sample& back() const { return samples_.back(); }
    std::size_t size() const noexcept { return samples_.size(); }
    std::optional<double> cadence_s() const noexcept { return cadence_s_; }
    const std::string& label() const noexcept { return label_; }

    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

    std::vector<double> times() const {
        std::vector<double> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) {
            out.push_back(s.epoch.t_rel_s);
        }
        return out;
    }

    std::vector<double> offsets() const {
        std::vector<double> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) {
            out.push_back(s.offset_ns);
        }
        return out;
    }

    /// Samples [first, last) as a new series with the same cadence and label.
    MeasurementSeries slice(std::size_t first, std::size_t last) const {
        if (first >= last || last > samples_.size()) {
            throw Error(ErrorKind::bounds, "slice [" + std::to_string(first) + ", " + std::to_string(last) +
                                               ") out of range for series of length " +
                                               std::to_string(samples_.size()));
        }
        return MeasurementSeries(std::vector<Sample>(samples_.begin() + static_cast<std::ptrdiff_t>(first),
                                                     samples_.begin() + static_cast<std::ptrdiff_t>(last)),
                                 cadence_s_, label_);
    }

    friend bool operator==(const MeasurementSeries&, const MeasurementSeries&) = default;

private:
    void validate() const {
        if (samples_.empty()) {
            throw Error(ErrorKind::insufficient_data, "measurement series is empty");
        }
        if (cadence_s_ && !(*cadence_s_ > 0.0 && std::isfinite(*cadence_s_))) {
            throw Error(ErrorKind::invalid_argument, "cadence must be positive and finite");
        }
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            check_sample(samples_[i], i);
            if (i == 0) {
                continue;
            }
            const double dt = samples_[i].epoch.t_rel_s - samples_[i - 1].epoch.t_rel_s;
            if (!(dt > 0.0)) {
                throw Error(ErrorKind::ordering, "sample " + std::to_string(i) + ": t_rel not strictly increasing");
            }
            if (cadence_s_ && std::abs(dt - *cadence_s_) > kEpochTolerance_s) {
                throw Error(ErrorKind::cadence, "sample " + std::to_string(i) + ": spacing differs from cadence");
            }
        }
    }

    static void check_sample(const Sample& s, std::size_t i) {
        const auto where = "sample " + std::to_string(i) + ": ";
        if (!(s.epoch.t_rel_s >= 0.0) || !std::isfinite(s.epoch.t_rel_s)) {
            throw Error(ErrorKind::invalid_argument, where + "t_rel must be finite and non-negative");
        }
        if (!std::isfinite(s.offset_ns)) {
            throw Error(ErrorKind::invalid_argument, where + "offset must be finite");
        }
        if (s.n_vis < 0) {
            throw Error(ErrorKind::invalid_argument, where + "n_vis must be non-negative");
        }
        if (s.tdop) {
            if (!(*s.tdop > 0.0) || !std::isfinite(*s.tdop)) {
                throw Error(ErrorKind::invalid_argument, where + "tdop must be positive");
            }
            if (s.n_vis < 4) {
                throw Error(ErrorKind::invalid_argument, where + "tdop present with fewer than 4 satellites");
            }
        }
    }

    std::vector<Sample> samples_;
    std::optional<double> cadence_s_;
    std::string label_;
};

namespace detail {

inline std::string format_fixed(double v, int precision) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) {
        return false;
    }
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

} // namespace detail

/// Reads the `t_rel_s,offset_ns,n_vis,tdop` CSV format. Errors carry the
/// 1-based line number of the offending row (the header is line 1).
inline MeasurementSeries parse_series(std::istream& in, std::optional<double> cadence_s = std::nullopt,
                                      std::string label = {}) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::parse, "line 1: missing header", 1);
    }
    if (line != kSeriesCsvHeader) {
        throw Error(ErrorKind::parse, "line 1: expected header '" + std::string(kSeriesCsvHeader) + "'", 1);
    }

    std::vector<Sample> samples;
    std::size_t line_no = 1;
    std::optional<double> prev_t;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) {
            break;
        }
        const auto at = [&](const std::string& msg) { return "line " + std::to_string(line_no) + ": " + msg; };

        const auto fields = detail::split_commas(line);
        if (fields.size() != 4) {
            throw Error(ErrorKind::parse, at("expected 4 fields, got " + std::to_string(fields.size())), line_no);
        }
        Sample s;
        if (!detail::parse_number(fields[0], s.epoch.t_rel_s) || !std::isfinite(s.epoch.t_rel_s) ||
            s.epoch.t_rel_s < 0.0) {
            throw Error(ErrorKind::parse, at("bad t_rel_s '" + std::string(fields[0]) + "'"), line_no);
        }
        if (!detail::parse_number(fields[1], s.offset_ns) || !std::isfinite(s.offset_ns)) {
            throw Error(ErrorKind::parse, at("bad offset_ns '" + std::string(fields[1]) + "'"), line_no);
        }
        if (!detail::parse_number(fields[2], s.n_vis) || s.n_vis < 0) {
            throw Error(ErrorKind::parse, at("bad n_vis '" + std::string(fields[2]) + "'"), line_no);
        }
        if (!fields[3].empty()) {
            double tdop = 0.0;
            if (!detail::parse_number(fields[3], tdop) || !(tdop > 0.0) || !std::isfinite(tdop)) {
                throw Error(ErrorKind::parse, at("bad tdop '" + std::string(fields[3]) + "'"), line_no);
            }
            if (s.n_vis < 4) {
                throw Error(ErrorKind::parse, at("tdop given with n_vis < 4"), line_no);
            }
            s.tdop = tdop;
        }

        if (prev_t) {
            const double dt = s.epoch.t_rel_s - *prev_t;
            if (!(dt > 0.0)) {
                throw Error(ErrorKind::ordering, at("t_rel_s not strictly increasing"), line_no);
            }
            if (cadence_s && std::abs(dt - *cadence_s) > kEpochTolerance_s) {
                throw Error(ErrorKind::cadence,
                            at("spacing " + detail::format_shortest(dt) + " s differs from cadence " +
                               detail::format_shortest(*cadence_s) + " s"),
                            line_no);
            }
        }
        prev_t = s.epoch.t_rel_s;
        samples.push_back(std::move(s));
    }

    if (samples.empty()) {
        throw Error(ErrorKind::insufficient_data, "no data rows", line_no);
    }
    return MeasurementSeries(std::move(samples), cadence_s, std::move(label));
}

inline MeasurementSeries parse_series(std::string_view text, std::optional<double> cadence_s = std::nullopt,
                                      std::string label = {}) {
    std::istringstream in{std::string(text)};
    return parse_series(in, cadence_s, std::move(label));
}

/// Writes the CSV format read by parse_series. Times and TDOP use the
/// shortest round-trip representation; offsets use six decimals (ns).
inline void emit_series(const MeasurementSeries& series, std::ostream& out) {
    out << kSeriesCsvHeader << '\n';
    for (const auto& s : series) {
        out << detail::format_shortest(s.epoch.t_rel_s) << ',' << detail::format_fixed(s.offset_ns, 6) << ','
            << s.n_vis << ',';
        if (s.tdop) {
            out << detail::format_shortest(*s.tdop);
        }
        out << '\n';
    }
}

inline std::string emit_series(const MeasurementSeries& series) {
    std::ostringstream out;
    emit_series(series, out);
    return out.str();
}

/// Splits into the fit window [0, n_fit) and the coast window [n_fit, end).
inline std::pair<MeasurementSeries, MeasurementSeries> split_at(const MeasurementSeries& series, std::size_t n_fit) {
    if (n_fit == 0 || n_fit >= series.size()) {
        throw Error(ErrorKind::bounds, "split point " + std::to_string(n_fit) + " must lie in (0, " +
                                           std::to_string(series.size()) + ")");
    }
    return {series.slice(0, n_fit), series.slice(n_fit, series.size())};
}

} // namespace csacdrift

#endif
