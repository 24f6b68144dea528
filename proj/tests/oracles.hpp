#pragma once

// Independent oracles used by the test suites. These deliberately avoid the
// closed-form code paths they are checking: the stage oracle iterates the
// physical recirculation series until it converges, statistics are recomputed
// with direct formulas, and optimizers are generic descent loops.

#include <complex>
#include <cstddef>
#include <stdexcept>

#include "pelm/circuit.hpp"

namespace oracles {

using Complex = std::complex<double>;

struct StageState {
    Complex out_a, out_b, circ_upper, circ_lower;
    int iterations = 0;
};

/// Recirculation-series steady state: inject the inputs and iterate the
/// one-round-trip field updates through the three couplers until successive
/// circulating fields change by less than `tol` in magnitude.
inline StageState iterate_stage(const pelm::circuit::FilterStage& stage, double wavelength_nm,
                                Complex in_a, Complex in_b, double tol = 1e-13,
                                int max_iters = 400000) {
    const double k1 = stage.bus_to_ring.kappa(), t1 = stage.bus_to_ring.tau();
    const double k2 = stage.ring_to_ring.kappa(), t2 = stage.ring_to_ring.tau();
    const double k3 = stage.ring_to_bus.kappa(), t3 = stage.ring_to_bus.tau();

    const auto half = [&](const pelm::circuit::ResonatorSpec& r) {
        const double a_half = std::sqrt(r.propagation_amplitude());
        return std::polar(a_half, 0.5 * r.round_trip_phase(wavelength_nm));
    };
    const Complex g1 = half(stage.ring_upper), g2 = half(stage.ring_lower);
    const double s1 = stage.ring_upper.tap.tau(), s2 = stage.ring_lower.tap.tau();
    const Complex i{0.0, 1.0};

    Complex x1 = 0.0, y2p = 0.0;  // circulating fields at the taps
    int it = 0;
    for (; it < max_iters; ++it) {
        const Complex u1 = g1 * s1 * x1;
        const Complex u2 = g2 * s2 * y2p;
        const Complex x1c = t2 * u1 + i * k2 * u2;
        const Complex y2 = i * k2 * u1 + t2 * u2;
        const Complex x1_next = i * k1 * in_a + t1 * (g1 * x1c);
        const Complex y2p_next = i * k3 * in_b + t3 * (g2 * y2);
        const double delta = std::abs(x1_next - x1) + std::abs(y2p_next - y2p);
        x1 = x1_next;
        y2p = y2p_next;
        if (delta < tol) break;
    }
    if (it == max_iters) throw std::runtime_error("iterate_stage: did not converge");

    const Complex u1 = g1 * s1 * x1;
    const Complex u2 = g2 * s2 * y2p;
    const Complex x1c = t2 * u1 + i * k2 * u2;
    const Complex y2 = i * k2 * u1 + t2 * u2;
    return {t1 * in_a + i * k1 * (g1 * x1c), t3 * in_b + i * k3 * (g2 * y2), x1, y2p, it};
}

/// Generic backtracking gradient descent on the ridge objective
/// ||H b + b0 - t||^2 + lambda^2 ||b||^2, agnostic of the closed form.
struct RidgeDescentResult {
    Eigen::VectorXd beta;
    double intercept;
};

inline RidgeDescentResult descend_ridge(const Eigen::MatrixXd& H, const Eigen::VectorXd& t,
                                        double lambda, double grad_tol = 1e-11,
                                        int max_iters = 2000000) {
    const auto n = H.rows();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(H.cols());
    double b0 = 0.0;
    const auto value = [&](const Eigen::VectorXd& b, double c) {
        return (H * b - t).array().plus(c).matrix().squaredNorm() + lambda * lambda * b.squaredNorm();
    };
    double f = value(beta, b0);
    double step = 1.0 / static_cast<double>(n);
    for (int it = 0; it < max_iters; ++it) {
        const Eigen::VectorXd r = (H * beta).array() + b0 - t.array();
        const Eigen::VectorXd gb = 2.0 * (H.transpose() * r + lambda * lambda * beta);
        const double g0 = 2.0 * r.sum();
        const double g2 = gb.squaredNorm() + g0 * g0;
        if (std::sqrt(g2) < grad_tol) break;
        step *= 2.0;
        while (true) {
            const Eigen::VectorXd beta2 = beta - step * gb;
            const double b02 = b0 - step * g0;
            const double f2 = value(beta2, b02);
            if (f2 <= f - 1e-4 * step * g2 || step < 1e-20) {
                beta = beta2;
                b0 = b02;
                f = f2;
                break;
            }
            step *= 0.5;
        }
        if (step < 1e-20) break;
    }
    return {beta, b0};
}

}  // namespace oracles
