#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "pelm/readout.hpp"

using namespace pelm;
using readout::DesignMatrix;
using readout::FeatureSpec;
using readout::NodePatch;
using readout::NoiseSpec;
using readout::Statistic;

namespace {

NoiseSpec quiet() {
    NoiseSpec n;
    n.read_std_counts = 0.0;
    n.shot_noise = false;
    return n;
}

NodePatch constant_patch(std::uint16_t value) {
    NodePatch p;
    p.pixels.fill(value);
    return p;
}

// test-side analytic sum of the Gaussian spot over the 36x36 grid
double spot_sum(double sigma) {
    double s = 0.0;
    for (int y = 0; y < 36; ++y)
        for (int x = 0; x < 36; ++x) {
            const double dx = x - 17.5, dy = y - 17.5;
            s += std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    return s;
}

}  // namespace

TEST_CASE("render_patch: zero intensity and zero read noise give a black patch") {
    const NodePatch p = readout::render_patch(0.0, quiet(), 1, 0);
    for (auto v : p.pixels) REQUIRE(v == 0);
}

TEST_CASE("render_patch: rejects negative intensity") {
    REQUIRE_THROWS_AS(readout::render_patch(-1e-6, quiet(), 1, 0), std::domain_error);
}

TEST_CASE("render_patch: peak saturates at 16 bits") {
    NoiseSpec n = quiet();
    n.gain_counts_per_mw = 80000.0;
    const NodePatch p = readout::render_patch(1.0, n, 1, 0);  // peak would be 80000 counts
    const auto at = [&](int x, int y) { return p.pixels[static_cast<std::size_t>(y * 36 + x)]; };
    REQUIRE(at(17, 17) == 65535);
    REQUIRE(at(18, 18) == 65535);
    REQUIRE(at(0, 0) < 65535);
}

TEST_CASE("render_patch: noise-free mean follows the analytic spot sum") {
    const NoiseSpec n = quiet();
    const double half_scale = 0.5 * 65535.0 / n.gain_counts_per_mw;
    const NodePatch p = readout::render_patch(half_scale, n, 3, 5);
    const double expected = n.gain_counts_per_mw * half_scale * spot_sum(n.spot_sigma_px) / 1296.0;
    REQUIRE(std::abs(p.mean() - expected) / expected < 1e-3);
}

TEST_CASE("render_patch: deterministic in (seed, node, sample counter)") {
    NoiseSpec n;  // noise on
    const NodePatch a = readout::render_patch(0.02, n, 99, 4, 7);
    const NodePatch b = readout::render_patch(0.02, n, 99, 4, 7);
    const NodePatch c = readout::render_patch(0.02, n, 99, 4, 8);
    REQUIRE(a.pixels == b.pixels);
    REQUIRE(a.pixels != c.pixels);
}

TEST_CASE("render_patch: noise-free mean is strictly increasing until saturation") {
    const NoiseSpec n = quiet();
    double prev = -1.0;
    for (double i : {0.001, 0.005, 0.01, 0.02, 0.04, 0.05}) {
        const double m = readout::render_patch(i, n, 1, 0).mean();
        REQUIRE(m > prev);
        prev = m;
    }
}

TEST_CASE("extract_features: mean-only spec reproduces patch means") {
    std::vector<std::array<NodePatch, 18>> samples(2);
    for (int node = 0; node < 18; ++node) {
        samples[0][static_cast<std::size_t>(node)] =
            readout::render_patch(0.002 * (node + 1), NoiseSpec{}, 5, node, 0);
        samples[1][static_cast<std::size_t>(node)] =
            readout::render_patch(0.001 * (node + 1), NoiseSpec{}, 5, node, 1);
    }
    const DesignMatrix H = readout::extract_features(samples, FeatureSpec::physical());
    REQUIRE(H.samples() == 2);
    REQUIRE(H.features() == 18);
    for (int s = 0; s < 2; ++s)
        for (int node = 0; node < 18; ++node)
            REQUIRE(H.values(s, node) ==
                    Catch::Approx(samples[static_cast<std::size_t>(s)][static_cast<std::size_t>(node)].mean()));
}

TEST_CASE("extract_features: full spec yields 18 physical + 126 virtual columns") {
    std::vector<std::array<NodePatch, 18>> samples(1);
    for (int node = 0; node < 18; ++node)
        samples[0][static_cast<std::size_t>(node)] = readout::render_patch(0.01, NoiseSpec{}, 2, node);
    const DesignMatrix H = readout::extract_features(samples, FeatureSpec::with_virtual());
    REQUIRE(H.features() == 144);
    REQUIRE(H.columns.size() == 144);
    REQUIRE(H.columns[0].name() == "node1_mean");
    REQUIRE(H.columns[7].name() == "node1_max");
    REQUIRE(H.columns[143].name() == "node18_max");
    // 18 mean columns, 126 virtual
    int means = 0;
    for (const auto& c : H.columns) means += (c.function == Statistic::mean);
    REQUIRE(means == 18);
}

TEST_CASE("extract_features: constant patch statistics and degeneracy flag") {
    std::vector<std::array<NodePatch, 18>> samples(1);
    for (int node = 0; node < 18; ++node)
        samples[0][static_cast<std::size_t>(node)] = constant_patch(100);
    const DesignMatrix H = readout::extract_features(samples, FeatureSpec::with_virtual());

    const auto value = [&](int node, Statistic fn) {
        for (Eigen::Index c = 0; c < H.features(); ++c)
            if (H.columns[static_cast<std::size_t>(c)].node == node &&
                H.columns[static_cast<std::size_t>(c)].function == fn)
                return H.values(0, c);
        FAIL("column not found");
        return 0.0;
    };
    REQUIRE(value(0, Statistic::mean) == 100.0);
    REQUIRE(value(0, Statistic::median) == 100.0);
    REQUIRE(value(0, Statistic::maximum) == 100.0);
    REQUIRE(value(0, Statistic::std_dev) == 0.0);
    REQUIRE(value(0, Statistic::skewness) == 0.0);
    REQUIRE(value(0, Statistic::kurtosis) == 0.0);
    // geometric/harmonic means use the +1 offset convention
    REQUIRE(value(0, Statistic::geometric_mean) == Catch::Approx(101.0));
    REQUIRE(value(0, Statistic::harmonic_mean) == Catch::Approx(101.0));
    REQUIRE(H.degenerate_cells.size() == 36);  // skew + kurt for each of 18 nodes
}

TEST_CASE("direct_matrix matches the patch path after gain normalization") {
    const NoiseSpec n = quiet();
    Eigen::MatrixXd intensities(3, 18);
    std::vector<std::array<NodePatch, 18>> samples(3);
    for (int s = 0; s < 3; ++s)
        for (int node = 0; node < 18; ++node) {
            const double i = 0.01 + 0.002 * s + 0.0005 * node;  // near half scale
            intensities(s, node) = i;
            samples[static_cast<std::size_t>(s)][static_cast<std::size_t>(node)] =
                readout::render_patch(i, n, 1, node, static_cast<std::uint64_t>(s));
        }

    const DesignMatrix direct = readout::direct_matrix(intensities);
    const DesignMatrix via_patches = readout::extract_features(samples, FeatureSpec::physical());
    const double k = n.mean_counts_per_mw();
    for (int s = 0; s < 3; ++s)
        for (int node = 0; node < 18; ++node) {
            const double recovered = via_patches.values(s, node) / k;
            REQUIRE(std::abs(recovered - direct.values(s, node)) / direct.values(s, node) < 1e-3);
        }
}

TEST_CASE("direct_matrix: shape, labels, and row order") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(1, 18);
    const DesignMatrix H = readout::direct_matrix(t);
    REQUIRE(H.samples() == 1);
    REQUIRE(H.features() == 18);
    REQUIRE(H.values.row(0).isZero());
    REQUIRE(H.columns[5].name() == "node6_mean");

    Eigen::MatrixXd two(2, 18);
    for (int c = 0; c < 18; ++c) {
        two(0, c) = c;
        two(1, c) = 100 + c;
    }
    const DesignMatrix H2 = readout::direct_matrix(two);
    REQUIRE(H2.values(0, 3) == 3.0);
    REQUIRE(H2.values(1, 3) == 103.0);

    REQUIRE_THROWS_AS(readout::direct_matrix(Eigen::MatrixXd::Zero(2, 7)), std::invalid_argument);
}

TEST_CASE("FeatureSpec validation") {
    FeatureSpec no_mean;
    no_mean.functions = {Statistic::median};
    no_mean.node_subset = {0};
    REQUIRE_THROWS_AS(no_mean.validate(), std::invalid_argument);

    FeatureSpec dup = FeatureSpec::physical();
    dup.functions = {Statistic::mean, Statistic::median, Statistic::median};
    REQUIRE_THROWS_AS(dup.validate(), std::invalid_argument);

    FeatureSpec bad_node = FeatureSpec::physical();
    bad_node.node_subset.push_back(18);
    REQUIRE_THROWS_AS(bad_node.validate(), std::invalid_argument);

    REQUIRE_NOTHROW(FeatureSpec::with_virtual().validate());
}

TEST_CASE("write_pgm emits a 16-bit binary PGM") {
    std::ostringstream os;
    readout::write_pgm(os, constant_patch(258));  // 0x0102
    const std::string s = os.str();
    REQUIRE(s.rfind("P5\n36 36\n65535\n", 0) == 0);
    REQUIRE(s.size() == 15 + 2 * 1296);
    REQUIRE(static_cast<unsigned char>(s[15]) == 1);
    REQUIRE(static_cast<unsigned char>(s[16]) == 2);
}
