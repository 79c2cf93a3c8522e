#ifndef CSACDRIFT_ERROR_HPP
#define CSACDRIFT_ERROR_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace csacdrift {

enum class ErrorKind {
    parse,               // malformed CSV row or field
    ordering,            // non-increasing epochs
    cadence,             // epoch spacing differs from the declared cadence
    bounds,              // index or count out of range
    invalid_argument,    // precondition on a plain argument violated
    degenerate_geometry, // singular or ill-conditioned geometry matrix
    insufficient_data,   // not enough values for the requested statistic
    alignment,           // datasets that should line up do not
    metadata,            // required per-sample metadata (tdop, n_vis) missing
    zero_weight,         // a sample would receive weight 0
    fit,                 // rank-deficient regression
    config               // bad JSON configuration
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::ordering: return "ordering";
    case ErrorKind::cadence: return "cadence";
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::degenerate_geometry: return "degenerate_geometry";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::metadata: return "metadata";
    case ErrorKind::zero_weight: return "zero_weight";
    case ErrorKind::fit: return "fit";
    case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Single exception type for the library. `kind()` says what went wrong,
/// `line()` is the 1-based input line for errors raised while parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(what), kind_(kind), line_(line) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> line_;
};

} // namespace csacdrift

#endif
