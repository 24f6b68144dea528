#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pelm/rng.hpp"

// Converts per-node physical intensities into the design matrix H, either
// directly or through synthesized camera patches. The patch path exists so
// that per-patch statistics ("virtual nodes") carry real information: shot
// and read noise make the higher moments intensity-dependent.

namespace pelm::readout {

/// One grating's camera view: a 36x36 grid of 16-bit grayscale counts.
struct NodePatch {
    static constexpr int kSide = 36;
    static constexpr int kPixelCount = kSide * kSide;  // 1296

    std::array<std::uint16_t, kPixelCount> pixels{};

    double mean() const {
        double s = 0.0;
        for (auto p : pixels) s += p;
        return s / kPixelCount;
    }
};

/// Radiometric model of the synthetic camera.
struct NoiseSpec {
    double gain_counts_per_mw = 786420.0;  // full-scale 0.05 mW -> 60% of 16-bit range
    double spot_sigma_px = 6.0;
    double read_std_counts = 20.0;
    bool shot_noise = true;

    /// Analytic noise-free patch mean per mW: gain * sum(spot) / pixel count.
    /// Dividing a patch mean by this recovers the intensity in mW.
    double mean_counts_per_mw() const;
};

namespace detail {

inline double gaussian_spot_sum(double sigma_px) {
    const double c = (NodePatch::kSide - 1) / 2.0;
    double s = 0.0;
    for (int y = 0; y < NodePatch::kSide; ++y)
        for (int x = 0; x < NodePatch::kSide; ++x) {
            const double dx = x - c, dy = y - c;
            s += std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px));
        }
    return s;
}

}  // namespace detail

inline double NoiseSpec::mean_counts_per_mw() const {
    return gain_counts_per_mw * detail::gaussian_spot_sum(spot_sigma_px) / NodePatch::kPixelCount;
}

/// Synthesizes the camera patch for one node: a centered Gaussian spot with
/// peak count gain*intensity, additive Gaussian read noise and a Poisson-like
/// shot term, clipped and quantized to 16 bits. Deterministic in
/// (seed, node_index, sample_counter).
inline NodePatch render_patch(double intensity_mw, const NoiseSpec& noise, std::uint64_t seed,
                              int node_index, std::uint64_t sample_counter = 0) {
    if (!(intensity_mw >= 0.0))
        throw std::domain_error("render_patch: intensity must be non-negative");

    rng::Stream stream{seed, static_cast<std::uint64_t>(node_index), sample_counter};
    const double peak = noise.gain_counts_per_mw * intensity_mw;
    const double c = (NodePatch::kSide - 1) / 2.0;
    const double inv2s2 = 1.0 / (2.0 * noise.spot_sigma_px * noise.spot_sigma_px);

    NodePatch patch;
    for (int y = 0; y < NodePatch::kSide; ++y) {
        for (int x = 0; x < NodePatch::kSide; ++x) {
            const double dx = x - c, dy = y - c;
            const double signal = peak * std::exp(-(dx * dx + dy * dy) * inv2s2);
            double value = signal;
            if (noise.read_std_counts > 0.0)
                value += noise.read_std_counts * stream.next_gaussian();
            if (noise.shot_noise && signal > 0.0)
                value += std::sqrt(signal) * stream.next_gaussian();
            value = std::clamp(std::round(value), 0.0, 65535.0);
            patch.pixels[static_cast<std::size_t>(y * NodePatch::kSide + x)] =
                static_cast<std::uint16_t>(value);
        }
    }
    return patch;
}

/// Per-patch statistics. `mean` is the physical node; the rest are virtual.
enum class Statistic {
    mean,
    median,
    std_dev,
    skewness,
    kurtosis,
    geometric_mean,
    harmonic_mean,
    maximum,
};

inline const char* statistic_name(Statistic s) {
    switch (s) {
        case Statistic::mean: return "mean";
        case Statistic::median: return "median";
        case Statistic::std_dev: return "std";
        case Statistic::skewness: return "skew";
        case Statistic::kurtosis: return "kurt";
        case Statistic::geometric_mean: return "gmean";
        case Statistic::harmonic_mean: return "hmean";
        case Statistic::maximum: return "max";
    }
    return "?";
}

inline Statistic statistic_from_name(const std::string& name) {
    for (Statistic s : {Statistic::mean, Statistic::median, Statistic::std_dev,
                        Statistic::skewness, Statistic::kurtosis, Statistic::geometric_mean,
                        Statistic::harmonic_mean, Statistic::maximum})
        if (name == statistic_name(s)) return s;
    throw std::invalid_argument("unknown statistic: " + name);
}

/// Which statistics over which nodes form the design matrix columns.
struct FeatureSpec {
    std::vector<Statistic> functions{Statistic::mean};
    std::vector<int> node_subset;  // ordered node indices, 0..17

    static FeatureSpec physical(int node_count = 18) {
        FeatureSpec s;
        s.node_subset.resize(static_cast<std::size_t>(node_count));
        for (int i = 0; i < node_count; ++i) s.node_subset[static_cast<std::size_t>(i)] = i;
        return s;
    }

    /// mean + the seven virtual statistics on all nodes: 18 + 126 columns.
    static FeatureSpec with_virtual(int node_count = 18) {
        FeatureSpec s = physical(node_count);
        s.functions = {Statistic::mean,          Statistic::median,
                       Statistic::std_dev,       Statistic::skewness,
                       Statistic::kurtosis,      Statistic::geometric_mean,
                       Statistic::harmonic_mean, Statistic::maximum};
        return s;
    }

    void validate() const {
        if (functions.empty() || functions.front() != Statistic::mean)
            throw std::invalid_argument("FeatureSpec: mean must be present and listed first");
        for (std::size_t i = 0; i < functions.size(); ++i)
            for (std::size_t j = i + 1; j < functions.size(); ++j)
                if (functions[i] == functions[j])
                    throw std::invalid_argument("FeatureSpec: duplicate statistic");
        if (node_subset.empty()) throw std::invalid_argument("FeatureSpec: empty node subset");
        for (int n : node_subset)
            if (n < 0 || n >= 18) throw std::invalid_argument("FeatureSpec: node index out of range");
    }
};

/// The H matrix: one row per sample, one column per (node, statistic).
struct DesignMatrix {
    struct ColumnLabel {
        int node = 0;
        Statistic function = Statistic::mean;

        std::string name() const {
            return "node" + std::to_string(node + 1) + "_" + statistic_name(function);
        }
    };

    Eigen::MatrixXd values;
    std::vector<ColumnLabel> columns;
    // (sample, column) pairs where a constant patch made skewness/kurtosis
    // undefined and 0 was emitted instead.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> degenerate_cells;

    Eigen::Index samples() const { return values.rows(); }
    Eigen::Index features() const { return values.cols(); }
};

namespace detail {

struct PatchStats {
    double mean, median, std_dev, skewness, kurtosis, geometric_mean, harmonic_mean, maximum;
    bool degenerate_moments;  // constant patch: skewness/kurtosis forced to 0
};

inline PatchStats compute_stats(const NodePatch& patch) {
    constexpr int n = NodePatch::kPixelCount;
    double sum = 0.0, log_sum = 0.0, inv_sum = 0.0;
    std::uint16_t maxv = 0;
    for (auto p : patch.pixels) {
        sum += p;
        log_sum += std::log(p + 1.0);  // +1 offset keeps zero pixels finite
        inv_sum += 1.0 / (p + 1.0);
        maxv = std::max(maxv, p);
    }
    const double mean = sum / n;

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (auto p : patch.pixels) {
        const double d = p - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    std::array<std::uint16_t, NodePatch::kPixelCount> sorted = patch.pixels;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2 - 1, sorted.end());
    const double lo = sorted[n / 2 - 1];
    const double hi = *std::min_element(sorted.begin() + n / 2, sorted.end());

    PatchStats s{};
    s.mean = mean;
    s.median = 0.5 * (lo + hi);  // even pixel count
    s.std_dev = std::sqrt(m2);
    s.degenerate_moments = (m2 == 0.0);
    s.skewness = s.degenerate_moments ? 0.0 : m3 / std::pow(m2, 1.5);
    s.kurtosis = s.degenerate_moments ? 0.0 : m4 / (m2 * m2);  // Pearson, non-excess
    s.geometric_mean = std::exp(log_sum / n);
    s.harmonic_mean = n / inv_sum;
    s.maximum = maxv;
    return s;
}

inline double pick_stat(const PatchStats& s, Statistic which) {
    switch (which) {
        case Statistic::mean: return s.mean;
        case Statistic::median: return s.median;
        case Statistic::std_dev: return s.std_dev;
        case Statistic::skewness: return s.skewness;
        case Statistic::kurtosis: return s.kurtosis;
        case Statistic::geometric_mean: return s.geometric_mean;
        case Statistic::harmonic_mean: return s.harmonic_mean;
        case Statistic::maximum: return s.maximum;
    }
    return 0.0;
}

}  // namespace detail

/// Builds H from per-sample patches. Column order: for each node in
/// node_subset, each statistic in spec order.
inline DesignMatrix extract_features(const std::vector<std::array<NodePatch, 18>>& samples,
                                     const FeatureSpec& spec) {
    spec.validate();
    DesignMatrix out;
    const auto cols =
        static_cast<Eigen::Index>(spec.node_subset.size() * spec.functions.size());
    out.values.resize(static_cast<Eigen::Index>(samples.size()), cols);
    out.columns.reserve(static_cast<std::size_t>(cols));
    for (int node : spec.node_subset)
        for (Statistic fn : spec.functions) out.columns.push_back({node, fn});

    for (std::size_t row = 0; row < samples.size(); ++row) {
        Eigen::Index col = 0;
        for (int node : spec.node_subset) {
            const auto stats = detail::compute_stats(samples[row][static_cast<std::size_t>(node)]);
            for (Statistic fn : spec.functions) {
                out.values(static_cast<Eigen::Index>(row), col) = detail::pick_stat(stats, fn);
                if (stats.degenerate_moments &&
                    (fn == Statistic::skewness || fn == Statistic::kurtosis))
                    out.degenerate_cells.emplace_back(static_cast<Eigen::Index>(row), col);
                ++col;
            }
        }
    }
    return out;
}

/// Noise-free fast path: the 18 intensities become the mean-only columns.
inline DesignMatrix direct_matrix(const Eigen::MatrixXd& intensity_table) {
    if (intensity_table.cols() != 18)
        throw std::invalid_argument("direct_matrix: expected 18 intensity columns");
    DesignMatrix out;
    out.values = intensity_table;
    out.columns.reserve(18);
    for (int node = 0; node < 18; ++node) out.columns.push_back({node, Statistic::mean});
    return out;
}

/// 16-bit binary PGM dump for patch inspection.
inline void write_pgm(std::ostream& os, const NodePatch& patch) {
    os << "P5\n" << NodePatch::kSide << " " << NodePatch::kSide << "\n65535\n";
    for (auto p : patch.pixels) {
        // big-endian per the PGM spec
        os.put(static_cast<char>(p >> 8));
        os.put(static_cast<char>(p & 0xff));
    }
}

}  // namespace pelm::readout
