#pragma once

#include "iontrap/heating.hpp"
#include "iontrap/hilbert.hpp"

namespace iontrap {

/// Second moments in dimensionless coordinates X, P with [X, P] = i/2.
struct MomentState {
    double xx = 0.0;  // <X^2>
    double pp = 0.0;  // <P^2>
    double xp = 0.0;  // (1/2)<XP + PX>

    static MomentState vacuum() { return {0.25, 0.25, 0.0}; }

    /// Robertson-Schroedinger determinant xx pp - xp^2; >= 1/16 for states.
    double uncertainty() const { return xx * pp - xp * xp; }
    bool physical(double tol = 1e-9) const {
        return xx >= 0.0 && pp >= 0.0 && uncertainty() >= 1.0 / 16.0 - tol;
    }
    /// <H0> / (hbar w)
    double energy() const { return xx + pp; }
};

struct SpringExactParams {
    double D = 1.0;
    double Gamma_omega = 0.0;  // Gamma w / 2
};

/// d/dt (xx, pp, xp) = A (xx, pp, xp) with
///   A = [[0, 0, 2w], [Gamma w^2, 0, -2w], [-w, w, 0]].
Eigen::Matrix3d moment_matrix(double Gamma, double omega);

/// exp(A t) m0 via Pade scaling-and-squaring.
MomentState propagate_moments(const MomentState& m0, double Gamma, double omega, double t);

/// Cube-root parameter D of the closed-form solution; D = 1 iff Gamma = 0.
double D_parameter(double Gamma, double omega);
SpringExactParams spring_exact_params(double Gamma, double omega);

/// Real growth eigenvalue of A, 2 (D^2 - 1) w / (sqrt(3) D).
double spring_growth_rate(double Gamma, double omega);

/// Which transcription of the closed-form energy to evaluate.
///
/// `Printed` keeps the published coefficients verbatim. Two of its
/// sine coefficients do not solve the moment ODE; `Corrected` replaces them:
///  - <X^2>_0 bracket: (1 + 2D^2 - D^4 + D^6 + D^8) -> (1 + D^2 - D^4 + D^6 + D^8)
///  - <P^2>_0 bracket: denominator (1 + D^2 + D^4) -> (1 - D^2 + D^4)
enum class ClosedFormReading { Corrected, Printed };

const char* to_string(ClosedFormReading reading);

/// Closed-form <H0>(t) / (hbar w). Requires t >= 0 and Gamma w / 2 < 1
/// (ValidityError otherwise).
double exact_energy(const MomentState& m0, double Gamma, double omega, double t,
                    ClosedFormReading reading = ClosedFormReading::Corrected);

/// Small-noise form exp(Gamma w^2 t / 2) (xx0 + pp0), in units of hbar w.
double approx_energy(const MomentState& m0, double Gamma, double omega, double t);

/// True while Gamma w / 2 <= 0.2, the range where approx_energy is meant
/// to be used.
bool approx_energy_in_range(double Gamma, double omega);

/// Averaged spring-noise master equation in the Fock basis:
///   d rho/dt = -i w [a^dag a, rho] - (Gamma/2) w^2 [X^2, [X^2, rho]]
class SpringMaster {
public:
    SpringMaster(double Gamma, double omega, const FockSpace& space);
    Matrix operator()(const Matrix& rho) const;

private:
    Eigen::ArrayXXcd free_phase_;
    Matrix x2_;
    Matrix x4_;
    double coupling_;
};

Matrix spring_master_rhs(const DensityMatrix& rho, double Gamma, double omega,
                         const FockSpace& space);

}  // namespace iontrap
