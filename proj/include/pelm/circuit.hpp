#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pelm/rng.hpp"

// Steady-state coherent propagation through a 4-bus, 3-column array of
// pair-coupled racetrack microresonators. Each resonator pair forms a
// second-order add-drop filter bridging two adjacent buses, so the drop port
// co-propagates with the input and the whole array is strictly feed-forward.
// Every resonator carries a weak tap that diverts a fixed fraction of the
// circulating intensity to a monitor node; the 18 monitored intensities are
// the hidden-layer outputs.

namespace pelm::circuit {

using Complex = std::complex<double>;

/// Lossless directional coupler described by its power coupling efficiency.
struct CouplerSpec {
    double power_efficiency = 0.0;  // eta in [0,1]

    double kappa() const { return std::sqrt(power_efficiency); }
    double tau() const { return std::sqrt(1.0 - power_efficiency); }

    void validate() const {
        if (!(power_efficiency >= 0.0 && power_efficiency <= 1.0))
            throw std::domain_error("CouplerSpec: power_efficiency must lie in [0,1]");
    }
};

/// Racetrack resonator geometry and material model.
///
/// The effective index follows a first-order dispersion model anchored at
/// reference_wavelength_nm; the tap is treated as a lumped amplitude loss per
/// round trip plus an intensity monitor.
struct ResonatorSpec {
    double round_trip_length_um = 0.0;
    double effective_index_at_ref = 0.0;
    double group_index = 0.0;
    double reference_wavelength_nm = 1550.0;
    double propagation_loss_db_per_cm = 0.0;
    CouplerSpec tap;
    double length_perturbation_um = 0.0;  // fabrication disorder offset

    double physical_length_um() const { return round_trip_length_um + length_perturbation_um; }

    double effective_index(double wavelength_nm) const {
        const double detune = (wavelength_nm - reference_wavelength_nm) / reference_wavelength_nm;
        return effective_index_at_ref - (group_index - effective_index_at_ref) * detune;
    }

    /// Round-trip amplitude survival a = 10^(-loss_dB/20) * sqrt(1 - eta_tap).
    double round_trip_amplitude() const {
        return propagation_amplitude() * tap.tau();
    }

    /// Amplitude survival from propagation loss alone (tap excluded).
    double propagation_amplitude() const {
        const double loss_db = propagation_loss_db_per_cm * physical_length_um() * 1e-4;
        return std::pow(10.0, -loss_db / 20.0);
    }

    double round_trip_phase(double wavelength_nm) const {
        return 2.0 * std::numbers::pi * effective_index(wavelength_nm) *
               (physical_length_um() * 1e3) / wavelength_nm;
    }

    /// Resonance wavelength of azimuthal order m, from n_eff(lambda) L = m lambda.
    /// The first-order dispersion model makes this closed-form.
    double resonance_wavelength_nm(int order) const {
        const double length_nm = physical_length_um() * 1e3;
        const double slope = (group_index - effective_index_at_ref) / reference_wavelength_nm;
        return group_index * length_nm / (static_cast<double>(order) + slope * length_nm);
    }

    int resonance_order_near(double wavelength_nm) const {
        return static_cast<int>(
            std::lround(effective_index(wavelength_nm) * physical_length_um() * 1e3 / wavelength_nm));
    }

    double free_spectral_range_nm(double wavelength_nm) const {
        return wavelength_nm * wavelength_nm / (group_index * physical_length_um() * 1e3);
    }

    void validate() const {
        if (!(round_trip_length_um > 0.0))
            throw std::domain_error("ResonatorSpec: round_trip_length must be positive");
        if (!(physical_length_um() > 0.0))
            throw std::domain_error("ResonatorSpec: perturbed length must stay positive");
        if (!(propagation_loss_db_per_cm >= 0.0))
            throw std::domain_error("ResonatorSpec: propagation loss must be non-negative");
        tap.validate();
        const double a = round_trip_amplitude();
        if (!(a > 0.0 && a <= 1.0))
            throw std::domain_error("ResonatorSpec: round-trip amplitude must lie in (0,1]");
    }
};

/// Round-trip field factor a * exp(i phi) at the given wavelength.
inline Complex round_trip_factor(const ResonatorSpec& res, double wavelength_nm) {
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("round_trip_factor: wavelength must be positive");
    return std::polar(res.round_trip_amplitude(), res.round_trip_phase(wavelength_nm));
}

/// One microresonator pair bridging two adjacent buses.
struct FilterStage {
    ResonatorSpec ring_upper;  // adjacent to the lower-indexed bus
    ResonatorSpec ring_lower;  // adjacent to the higher-indexed bus
    CouplerSpec bus_to_ring;   // input-side bus <-> upper ring
    CouplerSpec ring_to_ring;  // upper ring <-> lower ring
    CouplerSpec ring_to_bus;   // lower ring <-> drop-side bus

    void validate() const {
        ring_upper.validate();
        ring_lower.validate();
        bus_to_ring.validate();
        ring_to_ring.validate();
        ring_to_bus.validate();
    }
};

/// Through/drop fields on the two buses plus the steady-state circulating
/// field in each ring, evaluated at the ring's tap location (just before the
/// tap extracts its fraction).
struct StageFields {
    Complex out_a;       // continuation on the upper bus
    Complex out_b;       // continuation on the lower bus
    Complex circ_upper;  // circulating field at the upper ring's tap
    Complex circ_lower;  // circulating field at the lower ring's tap
};

namespace detail {

struct HalfTrip {
    Complex g;  // propagation over half a round trip (loss + phase, tap excluded)
    double s;   // tap amplitude survival, applied once per round trip
};

inline HalfTrip half_trip(const ResonatorSpec& res, double wavelength_nm) {
    const double a_half = std::sqrt(res.propagation_amplitude());
    const double phi_half = 0.5 * res.round_trip_phase(wavelength_nm);
    return {std::polar(a_half, phi_half), res.tap.tau()};
}

inline void require_finite(Complex v, const char* what) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw std::domain_error(std::string("stage_transfer: non-finite ") + what);
}

}  // namespace detail

/// Exact steady state of the second-order add-drop filter.
///
/// Field layout: in_a couples into the upper ring (coupler 1), the rings
/// couple to each other (coupler 2), the lower ring couples to bus b
/// (coupler 3). Cross-coupling carries the usual i*kappa phase. The closed
/// form solves the 2x2 linear system for the two circulating fields; it
/// equals the limit of the recirculation series.
inline StageFields stage_transfer(const FilterStage& stage, double wavelength_nm,
                                  Complex in_a, Complex in_b) {
    detail::require_finite(in_a, "in_a");
    detail::require_finite(in_b, "in_b");
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("stage_transfer: wavelength must be positive");

    const double k1 = stage.bus_to_ring.kappa(), t1 = stage.bus_to_ring.tau();
    const double k2 = stage.ring_to_ring.kappa(), t2 = stage.ring_to_ring.tau();
    const double k3 = stage.ring_to_bus.kappa(), t3 = stage.ring_to_bus.tau();
    const auto [g1, s1] = detail::half_trip(stage.ring_upper, wavelength_nm);
    const auto [g2, s2] = detail::half_trip(stage.ring_lower, wavelength_nm);
    const Complex i{0.0, 1.0};

    // Decoupled configurations would make the linear system singular for
    // lossless rings exactly on resonance; they have trivial steady states.
    if (k1 == 0.0 && k3 == 0.0) return {in_a, in_b, 0.0, 0.0};
    if (k1 == 0.0 && k2 == 0.0) {
        // upper ring unreachable; lower ring is an all-pass on bus b
        const Complex A2 = t2 * t3 * s2 * g2 * g2;
        const Complex y2p = i * k3 * in_b / (1.0 - A2);
        const Complex v2 = g2 * (t2 * g2 * s2 * y2p);
        return {in_a, t3 * in_b + i * k3 * v2, 0.0, y2p};
    }
    if (k2 == 0.0 && k3 == 0.0) {
        // lower ring unreachable; upper ring is an all-pass on bus a
        const Complex A1 = t1 * t2 * s1 * g1 * g1;
        const Complex x1 = i * k1 * in_a / (1.0 - A1);
        const Complex r1 = g1 * (t2 * g1 * s1 * x1);
        return {t1 * in_a + i * k1 * r1, in_b, x1, 0.0};
    }

    // x1: upper circulating field just after coupler 1 (pre-tap).
    // y2p: lower circulating field just after coupler 3 (pre-tap).
    const Complex A1 = t1 * t2 * s1 * g1 * g1;
    const Complex A2 = t2 * t3 * s2 * g2 * g2;
    const Complex B = k2 * g1 * g2;
    const Complex D = (1.0 - A1) * (1.0 - A2) + t1 * t3 * s1 * s2 * B * B;

    const Complex src_a = i * k1 * in_a;
    const Complex src_b = i * k3 * in_b;
    const Complex x1 = ((1.0 - A2) * src_a + i * t1 * s2 * B * src_b) / D;
    const Complex y2p = ((1.0 - A1) * src_b + i * t3 * s1 * B * src_a) / D;

    const Complex u1 = g1 * s1 * x1;   // upper field arriving at coupler 2
    const Complex u2 = g2 * s2 * y2p;  // lower field arriving at coupler 2
    const Complex x1c = t2 * u1 + i * k2 * u2;
    const Complex y2 = i * k2 * u1 + t2 * u2;
    const Complex r1 = g1 * x1c;  // upper field returning to coupler 1
    const Complex v2 = g2 * y2;   // lower field returning to coupler 3

    return {t1 * in_a + i * k1 * r1, t3 * in_b + i * k3 * v2, x1, y2p};
}

/// Bus fields at a column interface, units sqrt(mW).
struct FieldVector {
    std::array<Complex, 4> amplitudes{};

    double total_power_mw() const {
        double p = 0.0;
        for (const auto& a : amplitudes) p += std::norm(a);
        return p;
    }

    void validate() const {
        for (const auto& a : amplitudes) detail::require_finite(a, "input amplitude");
    }
};

/// Optional smooth grating-coupler envelope applied to calibration outputs.
struct GratingEnvelope {
    double center_nm = 1550.0;
    double sigma_nm = 30.0;
    double peak_transmission = 0.25;  // ~6 dB split over input+output gratings

    double factor(double wavelength_nm) const {
        const double d = (wavelength_nm - center_nm) / sigma_nm;
        return peak_transmission * std::exp(-0.5 * d * d);
    }
};

/// The full 3x3 array of filter stages. stages[column][row]; the stage at
/// row r bridges buses r and r+1 (buses 0..3 carry inputs I..IV). Within a
/// column the stages are applied sequentially in row order; this convention
/// is what makes shared-bus updates deterministic.
struct ArrayModel {
    static constexpr int kColumns = 3;
    static constexpr int kRows = 3;
    static constexpr int kBuses = 4;
    static constexpr int kNodeCount = 18;

    std::array<std::array<FilterStage, kRows>, kColumns> stages{};
    std::uint64_t disorder_seed = 1;
    double disorder_sigma_um = 0.0;
    std::optional<GratingEnvelope> grating_envelope;  // off by default

    /// Stable node index: (column, row, upper/lower) -> 0..17.
    static int node_index(int column, int row, bool lower) {
        return column * 6 + row * 2 + (lower ? 1 : 0);
    }

    const ResonatorSpec& resonator(int node) const {
        const auto& st = stages[node / 6][(node % 6) / 2];
        return (node % 2) ? st.ring_lower : st.ring_upper;
    }
    ResonatorSpec& resonator(int node) {
        auto& st = stages[node / 6][(node % 6) / 2];
        return (node % 2) ? st.ring_lower : st.ring_upper;
    }

    void validate() const {
        for (const auto& col : stages)
            for (const auto& st : col) st.validate();
        if (!(disorder_sigma_um >= 0.0))
            throw std::domain_error("ArrayModel: disorder_sigma must be non-negative");
    }
};

namespace defaults {

inline constexpr double kMinEulerRadiusUm = 15.0;
inline constexpr double kStraightSectionUm = 4.0;

// A 90 deg Euler bend made of two mirrored clothoid halves (curvature ramps
// linearly 0 -> 1/R_min -> 0) has arc length pi * R_min, twice the circular
// arc of the same radius.
inline constexpr double kEulerBendLengthUm = std::numbers::pi * kMinEulerRadiusUm;

// Racetrack: four Euler bends plus two pairs of 4 um straights.
inline constexpr double kRoundTripLengthUm =
    4.0 * kEulerBendLengthUm + 4.0 * kStraightSectionUm;  // 204.496 um

// Strip-waveguide index model. The effective index is tuned so that the
// m = 309 resonance of the nominal racetrack sits at 1561.45 nm, centered in
// the resonance band used by every experiment default.
inline constexpr double kEffectiveIndexAtRef = 2.3729;
inline constexpr double kGroupIndex = 4.2;
inline constexpr double kReferenceWavelengthNm = 1550.0;
inline constexpr double kPropagationLossDbPerCm = 2.0;

// Power coupling efficiencies of the four coupler classes.
inline constexpr double kBusToRingEta = 0.10;
inline constexpr double kRingToRingEta = 0.099;
inline constexpr double kRingToBusEta = 0.10;
inline constexpr double kTapEta = 0.005;

// Operating band: wavelengths inside are "in-resonance".
inline constexpr double kInResonanceLowNm = 1561.06;
inline constexpr double kInResonanceHighNm = 1561.87;
inline constexpr double kBandCenterNm = 1561.45;

// Default disorder strength, expressed as the standard deviation of the
// per-ring resonance wavelength it induces.
inline constexpr double kResonanceSpreadNm = 0.2;

inline ResonatorSpec nominal_resonator() {
    ResonatorSpec r;
    r.round_trip_length_um = kRoundTripLengthUm;
    r.effective_index_at_ref = kEffectiveIndexAtRef;
    r.group_index = kGroupIndex;
    r.reference_wavelength_nm = kReferenceWavelengthNm;
    r.propagation_loss_db_per_cm = kPropagationLossDbPerCm;
    r.tap.power_efficiency = kTapEta;
    return r;
}

/// Length disorder sigma that produces a given resonance-wavelength spread:
/// d(lambda)/lambda = (n_eff/n_g) dL/L  =>  sigma_L = spread * n_g L / (n_eff lambda).
inline double disorder_sigma_um_for_spread(double spread_nm = kResonanceSpreadNm) {
    const ResonatorSpec r = nominal_resonator();
    const double lambda = kBandCenterNm;
    return spread_nm / lambda * r.group_index / r.effective_index(lambda) * r.round_trip_length_um;
}

}  // namespace defaults

inline FilterStage nominal_stage() {
    FilterStage st;
    st.ring_upper = defaults::nominal_resonator();
    st.ring_lower = defaults::nominal_resonator();
    st.bus_to_ring.power_efficiency = defaults::kBusToRingEta;
    st.ring_to_ring.power_efficiency = defaults::kRingToRingEta;
    st.ring_to_bus.power_efficiency = defaults::kRingToBusEta;
    return st;
}

inline ArrayModel nominal_array(std::uint64_t disorder_seed = 1,
                                double disorder_sigma_um = defaults::disorder_sigma_um_for_spread()) {
    ArrayModel m;
    for (auto& col : m.stages)
        for (auto& st : col) st = nominal_stage();
    m.disorder_seed = disorder_seed;
    m.disorder_sigma_um = disorder_sigma_um;
    return m;
}

/// Copy of the model with independent Gaussian length offsets drawn from
/// (disorder_seed, node index). sigma = 0 returns the input unchanged.
inline ArrayModel perturb(const ArrayModel& model) {
    if (!(model.disorder_sigma_um >= 0.0))
        throw std::domain_error("perturb: disorder_sigma must be non-negative");
    if (model.disorder_sigma_um == 0.0) return model;
    ArrayModel out = model;
    for (int node = 0; node < ArrayModel::kNodeCount; ++node) {
        rng::Stream stream{model.disorder_seed, static_cast<std::uint64_t>(node)};
        out.resonator(node).length_perturbation_um =
            model.disorder_sigma_um * stream.next_gaussian();
    }
    return out;
}

/// Complex field state after propagation: per-node circulating fields at the
/// taps and the four bus fields leaving the last column.
struct FieldState {
    std::array<Complex, ArrayModel::kNodeCount> node_fields{};
    std::array<Complex, ArrayModel::kBuses> bus_fields{};
};

inline FieldState propagate_fields(const ArrayModel& model, const FieldVector& inputs,
                                   double wavelength_nm) {
    inputs.validate();
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("propagate: wavelength must be positive");

    FieldState state;
    state.bus_fields = inputs.amplitudes;
    for (int c = 0; c < ArrayModel::kColumns; ++c) {
        for (int r = 0; r < ArrayModel::kRows; ++r) {
            const FilterStage& st = model.stages[c][r];
            const StageFields f =
                stage_transfer(st, wavelength_nm, state.bus_fields[r], state.bus_fields[r + 1]);
            state.bus_fields[r] = f.out_a;
            state.bus_fields[r + 1] = f.out_b;
            state.node_fields[ArrayModel::node_index(c, r, false)] = f.circ_upper;
            state.node_fields[ArrayModel::node_index(c, r, true)] = f.circ_lower;
        }
    }
    return state;
}

/// Detected intensities: square-law applied once, at detection.
struct PropagationResult {
    std::array<double, ArrayModel::kNodeCount> node_intensities_mw{};
    std::array<double, ArrayModel::kBuses> calibration_mw{};
};

inline PropagationResult propagate(const ArrayModel& model, const FieldVector& inputs,
                                   double wavelength_nm) {
    const FieldState state = propagate_fields(model, inputs, wavelength_nm);
    PropagationResult res;
    for (int node = 0; node < ArrayModel::kNodeCount; ++node) {
        res.node_intensities_mw[node] =
            model.resonator(node).tap.power_efficiency * std::norm(state.node_fields[node]);
    }
    const double env =
        model.grating_envelope ? model.grating_envelope->factor(wavelength_nm) : 1.0;
    for (int b = 0; b < ArrayModel::kBuses; ++b)
        res.calibration_mw[b] = env * std::norm(state.bus_fields[b]);
    return res;
}

struct SpectrumRow {
    double wavelength_nm = 0.0;
    PropagationResult result;
};

/// Per-wavelength propagate over a strictly increasing grid.
inline std::vector<SpectrumRow> spectrum(const ArrayModel& model, const FieldVector& inputs,
                                         std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("spectrum: wavelength grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("spectrum: wavelength grid must be strictly increasing");

    std::vector<SpectrumRow> rows(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        rows[i] = {grid[i], propagate(model, inputs, grid[i])};
    return rows;
}

/// Linearly spaced wavelength grid, inclusive of both ends.
inline std::vector<double> linspace(double lo, double hi, int count) {
    if (count < 1) throw std::invalid_argument("linspace: count must be positive");
    if (count == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return g;
}

/// Amplitude encoding of features in [0,1]: amplitude = floor + (1-floor)*x.
/// Inactive channels model a modulator set to destructive interference and
/// carry amplitude exactly 0.
inline FieldVector encode_features(const std::array<double, 4>& features, double floor_level,
                                   const std::array<bool, 4>& active = {true, true, true, true}) {
    if (!(floor_level >= 0.0 && floor_level < 1.0))
        throw std::domain_error("encode_features: floor must lie in [0,1)");
    FieldVector out;
    for (int i = 0; i < 4; ++i) {
        if (!active[i]) {
            out.amplitudes[i] = 0.0;
            continue;
        }
        if (!(features[i] >= 0.0 && features[i] <= 1.0))
            throw std::domain_error("encode_features: features must lie in [0,1]");
        out.amplitudes[i] = floor_level + (1.0 - floor_level) * features[i];
    }
    return out;
}

}  // namespace pelm::circuit
