#include "iontrap/noise.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "iontrap/rng.hpp"

namespace iontrap {

TrapParams TrapParams::natural(double gamma, double Gamma) {
    TrapParams p;
    p.m = 1.0;
    p.omega = 1.0;
    p.hbar = 1.0;
    p.q = 1.0;
    p.gamma = gamma;
    p.Gamma = Gamma;
    return p;
}

void TrapParams::validate() const {
    if (!(m > 0.0)) throw ParameterError("trap mass must be positive");
    if (!(omega > 0.0)) throw ParameterError("trap frequency must be positive");
    if (!(hbar > 0.0)) throw ParameterError("hbar must be positive");
    if (!(gamma >= 0.0)) throw ParameterError("gamma must be >= 0");
    if (!(Gamma >= 0.0)) throw ParameterError("Gamma must be >= 0");
    if (!(E0 >= 0.0)) throw ParameterError("E0 must be >= 0");
}

namespace {

void check_grid(double dt, int steps) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
    if (steps < 1) throw ParameterError("steps must be >= 1");
}

// Square root of the covariance of (dW, int cos(w s) dW, int sin(w s) dW)
// over [0, h]. Eigen-decomposition rather than Cholesky because the matrix is
// singular for w h -> 0.
Eigen::Matrix3d carrier_covariance_root(double w, double h) {
    Eigen::Matrix3d c;
    if (w == 0.0) {
        c << h, h, 0, h, h, 0, 0, 0, 0;
    } else {
        const double x = w * h;
        const double s = std::sin(x);
        const double half = std::sin(0.5 * x);
        const double i_cos = s / w;
        const double i_sin = 2.0 * half * half / w;
        const double s2 = std::sin(2.0 * x) / (4.0 * w);
        const double i_cos2 = 0.5 * h + s2;
        const double i_sin2 = 0.5 * h - s2;
        const double i_cs = s * s / (2.0 * w);
        c << h, i_cos, i_sin, i_cos, i_cos2, i_cs, i_sin, i_cs, i_sin2;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    const Eigen::Vector3d lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace

NoiseRealization sample_wiener(std::uint64_t seed, double dt, int steps, std::uint64_t stream) {
    check_grid(dt, steps);
    NoiseRealization out;
    out.seed = seed;
    out.stream = stream;
    out.dt = dt;
    out.increments.resize(static_cast<std::size_t>(steps));
    CounterRng rng(seed, stream);
    const double sd = std::sqrt(dt);
    for (auto& dw : out.increments) dw = sd * rng.normal();
    return out;
}

NoiseRealization sample_wiener_with_carrier(std::uint64_t seed, double dt, int steps,
                                            double carrier, std::uint64_t stream) {
    check_grid(dt, steps);
    NoiseRealization out;
    out.seed = seed;
    out.stream = stream;
    out.dt = dt;
    out.carrier = carrier;
    out.increments.resize(static_cast<std::size_t>(steps));
    out.carrier_integrals.resize(static_cast<std::size_t>(steps));
    const Eigen::Matrix3d root = carrier_covariance_root(carrier, dt);
    CounterRng rng(seed, stream);
    for (int k = 0; k < steps; ++k) {
        const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d v = root * z;
        // Shift from [0, dt] to [t_k, t_k + dt]: Z_k = e^{i w t_k} (C + i S).
        const cplx phase = std::polar(1.0, carrier * dt * k);
        out.increments[k] = v(0);
        out.carrier_integrals[k] = phase * cplx(v(1), v(2));
    }
    return out;
}

double gamma_from_field(double q, double E0) {
    return q * q * E0 * E0;
}

double spectral_density(double E0) {
    return 2.0 * E0 * E0;
}

std::optional<double> decoherence_time(const TrapParams& params) {
    params.validate();
    if (params.gamma == 0.0) return std::nullopt;
    return 2.0 * params.hbar * params.m * params.omega / params.gamma;
}

std::optional<double> decoherence_time_from_SE(double m, double omega, double q, double S_E,
                                               double hbar) {
    if (!(m > 0.0) || !(omega > 0.0) || !(hbar > 0.0)) {
        throw ParameterError("decoherence_time_from_SE: m, omega, hbar must be positive");
    }
    if (!(S_E >= 0.0)) throw ParameterError("spectral density must be >= 0");
    if (S_E == 0.0 || q == 0.0) return std::nullopt;
    return 4.0 * hbar * m * omega / (q * q * S_E);
}

double radial_frequency(const TrapGeometry& geom, double q, double m) {
    if (!(geom.V0 > 0.0) || !(geom.Omega_T > 0.0) || !(geom.R > 0.0) || !(q > 0.0) ||
        !(m > 0.0)) {
        throw ParameterError("radial_frequency: all inputs must be positive");
    }
    return q * geom.V0 / (std::sqrt(2.0) * geom.Omega_T * m * geom.R * geom.R);
}

}  // namespace iontrap
