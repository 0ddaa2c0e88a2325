#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "iontrap/core.hpp"

namespace iontrap {

/// Physical constants of the trap and its noise sources.
///
/// Position noise enters as xi(t) x with xi dt = sqrt(gamma) dW; spring noise
/// as (1/2) m w^2 eps(t) x^2 with eps dt = sqrt(Gamma) dW.
struct TrapParams {
    double m = kBerylliumIonMass;  // kg
    double omega = 1.0;            // rad/s
    double gamma = 0.0;            // N^2 s
    double Gamma = 0.0;            // s
    double q = kElementaryCharge;  // C
    double E0 = 0.0;               // V/m sqrt(s)
    double hbar = kHbarSI;

    /// hbar = m = omega = 1.
    static TrapParams natural(double gamma = 0.0, double Gamma = 0.0);

    /// Throws ParameterError on m, omega, hbar <= 0 or negative noise strengths.
    void validate() const;
};

struct TrapGeometry {
    double V0 = 0.0;       // V
    double Omega_T = 0.0;  // rad/s
    double R = 0.0;        // m
    double omega_z = 0.0;  // rad/s
};

/// A sampled Wiener path on a uniform grid t_k = k dt.
///
/// `increments` are dW_k = W(t_{k+1}) - W(t_k). When a carrier frequency is
/// requested the exact oscillatory integrals
///     Z_k = int_{t_k}^{t_{k+1}} exp(i carrier t) dW(t)
/// are drawn jointly with dW_k from the same path.
struct NoiseRealization {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double dt = 0.0;
    std::vector<double> increments;
    double carrier = 0.0;
    std::vector<cplx> carrier_integrals;

    std::size_t steps() const { return increments.size(); }
};

/// i.i.d. Normal(0, dt) increments, reproducible from (seed, stream, dt, steps).
NoiseRealization sample_wiener(std::uint64_t seed, double dt, int steps, std::uint64_t stream = 0);

/// Same, plus the carrier integrals Z_k at angular frequency `carrier`.
NoiseRealization sample_wiener_with_carrier(std::uint64_t seed, double dt, int steps,
                                            double carrier, std::uint64_t stream = 0);

/// gamma = q^2 E0^2
double gamma_from_field(double q, double E0);

/// White-noise spectral density S_E = 2 E0^2 (one-sided, factor-4 convention).
double spectral_density(double E0);

/// t* = 2 hbar m w / gamma; nullopt when gamma == 0 (no decoherence).
std::optional<double> decoherence_time(const TrapParams& params);

/// t* = 4 hbar m w / (q^2 S_E); nullopt when S_E == 0.
std::optional<double> decoherence_time_from_SE(double m, double omega, double q, double S_E,
                                               double hbar = kHbarSI);

/// Radial secular frequency of a linear Paul trap, q V0 / (sqrt(2) Omega_T m R^2).
double radial_frequency(const TrapGeometry& geom, double q, double m);

}  // namespace iontrap
