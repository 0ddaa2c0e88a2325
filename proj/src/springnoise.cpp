#include "iontrap/springnoise.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace iontrap {

namespace {

void check_rates(double Gamma, double omega) {
    if (!(omega > 0.0)) throw ParameterError("omega must be positive");
    if (!(Gamma >= 0.0)) throw ParameterError("Gamma must be >= 0");
}

}  // namespace

Eigen::Matrix3d moment_matrix(double Gamma, double omega) {
    check_rates(Gamma, omega);
    Eigen::Matrix3d A;
    A << 0.0, 0.0, 2.0 * omega,
         Gamma * omega * omega, 0.0, -2.0 * omega,
         -omega, omega, 0.0;
    return A;
}

MomentState propagate_moments(const MomentState& m0, double Gamma, double omega, double t) {
    if (!(t >= 0.0)) throw ParameterError("propagate_moments: t must be >= 0");
    const Eigen::Matrix3d A = moment_matrix(Gamma, omega);
    const Eigen::Matrix3d E = (A * t).exp();
    const Eigen::Vector3d v = E * Eigen::Vector3d(m0.xx, m0.pp, m0.xp);
    return {v(0), v(1), v(2)};
}

double D_parameter(double Gamma, double omega) {
    check_rates(Gamma, omega);
    const double g = 0.5 * Gamma * omega;
    return std::cbrt(3.0 * std::sqrt(3.0) / 4.0 * g + std::sqrt(1.0 + 27.0 / 16.0 * g * g));
}

SpringExactParams spring_exact_params(double Gamma, double omega) {
    return {D_parameter(Gamma, omega), 0.5 * Gamma * omega};
}

double spring_growth_rate(double Gamma, double omega) {
    const double D = D_parameter(Gamma, omega);
    return 2.0 * (D * D - 1.0) * omega / (std::sqrt(3.0) * D);
}

const char* to_string(ClosedFormReading reading) {
    return reading == ClosedFormReading::Printed ? "printed" : "corrected";
}

double exact_energy(const MomentState& m0, double Gamma, double omega, double t,
                    ClosedFormReading reading) {
    check_rates(Gamma, omega);
    if (!(t >= 0.0)) throw ParameterError("exact_energy: t must be >= 0");
    if (!(0.5 * Gamma * omega < 1.0)) {
        throw ValidityError("exact_energy: requires Gamma w / 2 < 1");
    }
    const double D = D_parameter(Gamma, omega);
    const double s3 = std::sqrt(3.0);
    const double D2 = D * D, D4 = D2 * D2, D6 = D4 * D2, D8 = D4 * D4;
    const double wt = omega * t;

    const double grow = std::exp(2.0 * (D2 - 1.0) * wt / (s3 * D));
    const double decay = std::exp(-(D2 - 1.0) * wt / (s3 * D));
    // Kept in the published cos(-theta), sin(-theta) form.
    const double theta = -(1.0 + D2) * wt / D;
    const double c = std::cos(theta);
    const double s = std::sin(theta);

    const double q = 1.0 - D2 + D4;  // (1 + D^6) = (1 + D^2) q
    const bool printed = reading == ClosedFormReading::Printed;

    const double x_grow = (2.0 - D2 + 2.0 * D4) * (1.0 + D2 + D4) / (9.0 * D2 * q);
    const double x_cos = -2.0 * std::pow(D2 - 1.0, 4) / (9.0 * D2 * q);
    const double x_poly = printed ? 1.0 + 2.0 * D2 - D4 + D6 + D8 : 1.0 + D2 - D4 + D6 + D8;
    const double x_sin = 2.0 * (1.0 - D2) * x_poly / (3.0 * s3 * D2 * (1.0 + D6));

    const double p_grow = (1.0 + D2 + D4) / (3.0 * q);
    const double p_cos = 2.0 * (D2 - 1.0) * (D2 - 1.0) / (3.0 * q);
    const double p_den = printed ? (1.0 + D2) * (1.0 + D2 + D4) : (1.0 + D2) * q;
    const double p_sin = 2.0 * D2 * (D2 - 1.0) / (s3 * p_den);

    const double c_grow = 2.0 * (D6 - 1.0) / (3.0 * s3 * D * q);
    const double c_cos = -c_grow;
    const double c_sin = 2.0 * (D2 - 1.0) * (D2 - 1.0) * (1.0 + D2 + D4) / (3.0 * D * (1.0 + D6));

    const double kx = grow * x_grow + decay * (x_cos * c + x_sin * s);
    const double kp = grow * p_grow + decay * (p_cos * c + p_sin * s);
    const double kc = grow * c_grow + decay * (c_cos * c + c_sin * s);
    return kx * m0.xx + kp * m0.pp + kc * m0.xp;
}

double approx_energy(const MomentState& m0, double Gamma, double omega, double t) {
    check_rates(Gamma, omega);
    if (!(t >= 0.0)) throw ParameterError("approx_energy: t must be >= 0");
    return std::exp(0.5 * Gamma * omega * omega * t) * (m0.pp + m0.xx);
}

bool approx_energy_in_range(double Gamma, double omega) {
    return 0.5 * Gamma * omega <= 0.2;
}

SpringMaster::SpringMaster(double Gamma, double omega, const FockSpace& space) {
    check_rates(Gamma, omega);
    const int n = space.dim();
    free_phase_.resize(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) free_phase_(i, j) = -kI * omega * double(i - j);
    }
    x2_ = dimensionless_position_squared(space);
    x4_ = x2_ * x2_;
    coupling_ = 0.5 * Gamma * omega * omega;
}

Matrix SpringMaster::operator()(const Matrix& rho) const {
    Matrix out = (free_phase_ * rho.array()).matrix();
    if (coupling_ != 0.0) {
        out.noalias() -= coupling_ * (x4_ * rho - 2.0 * x2_ * rho * x2_ + rho * x4_);
    }
    return out;
}

Matrix spring_master_rhs(const DensityMatrix& rho, double Gamma, double omega,
                         const FockSpace& space) {
    if (rho.dim() != space.dim()) throw SpaceError("spring_master_rhs: dimension mismatch");
    return SpringMaster(Gamma, omega, space)(rho.matrix());
}

}  // namespace iontrap
