#ifndef CSACDRIFT_QUALITY_HPP
#define CSACDRIFT_QUALITY_HPP

// GPS measurement quality from repeated datasets of one scenario: the
// pairwise noise variance and its stratification by visible-satellite count
// or TDOP range.

#include "csacdrift/error.hpp"
#include "csacdrift/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace csacdrift {

/// Mean squared difference over all unordered pairs,
///   (1 / C(n,2)) * sum_{i<j} (x_i - x_j)^2,
/// evaluated in one pass through the identity
///   sum_{i<j} (x_i - x_j)^2 = n * sum_i (x_i - mean)^2
/// with Welford's update for the centered sum of squares.
inline double noise_variance(std::span<const double> x) {
    if (x.size() < 2) {
        throw Error(ErrorKind::insufficient_data,
                    "noise variance needs at least 2 values, got " + std::to_string(x.size()));
    }
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::invalid_argument, "noise variance input must be finite");
        }
        ++k;
        const double delta = v - mean;
        mean += delta / static_cast<double>(k);
        m2 += delta * (v - mean);
    }
    const double n = static_cast<double>(x.size());
    // n * m2 / (n (n - 1) / 2)
    return 2.0 * m2 / (n - 1.0);
}

struct PairDifference {
    std::size_t first = 0;  // index of the minuend dataset
    std::size_t second = 0; // index of the subtrahend dataset
    std::vector<double> diff_ns;
};

namespace detail {

inline void check_aligned(std::span<const MeasurementSeries> datasets) {
    if (datasets.size() < 2) {
        throw Error(ErrorKind::insufficient_data, "need at least 2 datasets, got " + std::to_string(datasets.size()));
    }
    const auto& ref = datasets.front();
    for (std::size_t d = 1; d < datasets.size(); ++d) {
        const auto& other = datasets[d];
        const auto who = "dataset " + std::to_string(d) + (other.label().empty() ? "" : " (" + other.label() + ")");
        if (other.size() != ref.size()) {
            throw Error(ErrorKind::alignment, who + " has " + std::to_string(other.size()) + " samples, expected " +
                                                  std::to_string(ref.size()));
        }
        if (other.cadence_s() != ref.cadence_s()) {
            throw Error(ErrorKind::alignment, who + " has a different cadence");
        }
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (std::abs(other[i].epoch.t_rel_s - ref[i].epoch.t_rel_s) > kEpochTolerance_s) {
                throw Error(ErrorKind::alignment, who + ": epoch " + std::to_string(i) + " does not line up");
            }
        }
    }
}

} // namespace detail

/// Element-wise offset differences for every pair (i, j), i < j, in
/// lexicographic order: datasets[i] - datasets[j].
inline std::vector<PairDifference> pairwise_noise_series(std::span<const MeasurementSeries> datasets) {
    detail::check_aligned(datasets);
    std::vector<PairDifference> out;
    out.reserve(datasets.size() * (datasets.size() - 1) / 2);
    for (std::size_t i = 0; i + 1 < datasets.size(); ++i) {
        for (std::size_t j = i + 1; j < datasets.size(); ++j) {
            PairDifference p{i, j, {}};
            p.diff_ns.reserve(datasets[i].size());
            for (std::size_t k = 0; k < datasets[i].size(); ++k) {
                p.diff_ns.push_back(datasets[i][k].offset_ns - datasets[j][k].offset_ns);
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

struct QualityBinSpec {
    enum class Mode { by_tdop, by_n_vis };

    Mode mode = Mode::by_tdop;
    std::vector<double> tdop_thresholds{1.25, 2.0};

    void validate() const {
        if (mode != Mode::by_tdop) {
            return;
        }
        for (std::size_t i = 0; i < tdop_thresholds.size(); ++i) {
            if (!(tdop_thresholds[i] > 0.0) || !std::isfinite(tdop_thresholds[i])) {
                throw Error(ErrorKind::invalid_argument, "TDOP thresholds must be positive");
            }
            if (i > 0 && !(tdop_thresholds[i] > tdop_thresholds[i - 1])) {
                throw Error(ErrorKind::invalid_argument, "TDOP thresholds must be strictly increasing");
            }
        }
    }
};

struct QualityBin {
    std::string label;
    std::size_t epochs = 0; // epochs falling in the bin
    std::size_t values = 0; // pooled pairwise differences (epochs * pairs)
    std::optional<double> noise_variance_ns2;
};

struct QualityReport {
    QualityBinSpec::Mode mode = QualityBinSpec::Mode::by_tdop;
    std::size_t pairs = 0;
    std::vector<QualityBin> bins;
};

/// Index of the left-closed, right-open TDOP interval containing `tdop`;
/// the last interval is unbounded above.
inline std::size_t tdop_bin_index(double tdop, std::span<const double> thresholds) {
    return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), tdop) - thresholds.begin());
}

inline std::vector<std::string> tdop_bin_labels(std::span<const double> thresholds) {
    std::vector<std::string> labels;
    if (thresholds.empty()) {
        labels.emplace_back("all");
        return labels;
    }
    labels.push_back("tdop<" + detail::format_shortest(thresholds.front()));
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        labels.push_back(detail::format_shortest(thresholds[i - 1]) + "<=tdop<" +
                         detail::format_shortest(thresholds[i]));
    }
    labels.push_back("tdop>=" + detail::format_shortest(thresholds.back()));
    return labels;
}

/// Pools the pairwise differences of every epoch into the bin chosen by that
/// epoch's metadata, then applies noise_variance per bin. All datasets must
/// carry identical n_vis/tdop per epoch. Bins with fewer than two pooled
/// values report no variance. TDOP mode always reports every interval;
/// n_vis mode reports one bin per observed count, ascending.
inline QualityReport stratified_quality(std::span<const MeasurementSeries> datasets, const QualityBinSpec& spec) {
    spec.validate();
    const auto pairs = pairwise_noise_series(datasets);
    const auto& ref = datasets.front();

    for (std::size_t d = 1; d < datasets.size(); ++d) {
        for (std::size_t k = 0; k < ref.size(); ++k) {
            if (datasets[d][k].n_vis != ref[k].n_vis || datasets[d][k].tdop != ref[k].tdop) {
                throw Error(ErrorKind::alignment, "dataset " + std::to_string(d) +
                                                      " disagrees with dataset 0 on n_vis/tdop at epoch " +
                                                      std::to_string(k));
            }
        }
    }

    QualityReport report;
    report.mode = spec.mode;
    report.pairs = pairs.size();

    std::vector<std::size_t> bin_of(ref.size());
    std::vector<std::string> labels;
    if (spec.mode == QualityBinSpec::Mode::by_tdop) {
        labels = tdop_bin_labels(spec.tdop_thresholds);
        for (std::size_t k = 0; k < ref.size(); ++k) {
            if (!ref[k].tdop) {
                throw Error(ErrorKind::metadata,
                            "epoch " + std::to_string(k) + " (t=" + detail::format_shortest(ref[k].epoch.t_rel_s) +
                                " s) has no tdop; cannot stratify by TDOP");
            }
            bin_of[k] = tdop_bin_index(*ref[k].tdop, spec.tdop_thresholds);
        }
    } else {
        std::map<int, std::size_t> index;
        for (const auto& s : ref) {
            index.emplace(s.n_vis, 0);
        }
        std::size_t next = 0;
        for (auto& [n_vis, idx] : index) {
            idx = next++;
            labels.push_back(std::to_string(n_vis));
        }
        for (std::size_t k = 0; k < ref.size(); ++k) {
            bin_of[k] = index.at(ref[k].n_vis);
        }
    }

    std::vector<std::vector<double>> pooled(labels.size());
    std::vector<std::size_t> epochs(labels.size(), 0);
    for (std::size_t k = 0; k < ref.size(); ++k) {
        ++epochs[bin_of[k]];
        for (const auto& p : pairs) {
            pooled[bin_of[k]].push_back(p.diff_ns[k]);
        }
    }

    for (std::size_t b = 0; b < labels.size(); ++b) {
        QualityBin bin{labels[b], epochs[b], pooled[b].size(), std::nullopt};
        if (pooled[b].size() >= 2) {
            bin.noise_variance_ns2 = noise_variance(pooled[b]);
        }
        report.bins.push_back(std::move(bin));
    }
    return report;
}

inline std::string_view to_string(QualityBinSpec::Mode mode) {
    return mode == QualityBinSpec::Mode::by_tdop ? "tdop" : "n_vis";
}

/// `bin,count,noise_variance` with count = epochs in the bin and the
/// variance in ns^2 (empty when undefined).
inline void write_csv(const QualityReport& r, std::ostream& out) {
    out << "bin,count,noise_variance\n";
    for (const auto& b : r.bins) {
        out << b.label << ',' << b.epochs << ',';
        if (b.noise_variance_ns2) {
            out << detail::format_fixed(*b.noise_variance_ns2, 6);
        }
        out << '\n';
    }
}

inline nlohmann::json to_json(const QualityReport& r) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : r.bins) {
        nlohmann::json j{{"bin", b.label}, {"count", b.epochs}, {"values", b.values}};
        j["noise_variance_ns2"] = b.noise_variance_ns2 ? nlohmann::json(*b.noise_variance_ns2) : nlohmann::json(nullptr);
        bins.push_back(std::move(j));
    }
    return {{"mode", std::string(to_string(r.mode))}, {"pairs", r.pairs}, {"bins", bins}};
}

} // namespace csacdrift

#endif
