#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "iontrap/hilbert.hpp"
#include "iontrap/noise.hpp"

namespace iontrap {

/// Right-hand side d rho / dt of a deterministic master equation.
using MasterRhs = std::function<Matrix(const Matrix&)>;

/// Noise-averaged dynamics under trap-center noise:
///   d rho/dt = -(i/hbar)[H0, rho] - (gamma / 2 hbar^2) [x, [x, rho]]
/// with H0 = hbar w (a^dag a + 1/2).
class AveragedMaster {
public:
    AveragedMaster(const TrapParams& params, const FockSpace& space);
    Matrix operator()(const Matrix& rho) const;

private:
    Eigen::ArrayXXcd free_phase_;  // -i w (n_i - n_j)
    Matrix q_;                     // a + a^dag
    Matrix q2_;
    double coupling_;              // gamma x0^2 / (2 hbar^2) = gamma / (4 hbar m w)
};

/// Rotating-frame form with the fast terms dropped: a symmetric dissipator
/// on the a and a^dag channels at rate gamma / (2 hbar m w).
class TimeAveragedMaster {
public:
    TimeAveragedMaster(const TrapParams& params, const FockSpace& space);
    Matrix operator()(const Matrix& rho) const;

    double rate() const { return rate_; }

private:
    Matrix a_, ad_, anti_;  // anti_ = a^dag a + a a^dag
    double rate_;
};

Matrix averaged_master_rhs(const DensityMatrix& rho, const TrapParams& params,
                           const FockSpace& space);
Matrix time_averaged_master_rhs(const DensityMatrix& rho, const TrapParams& params,
                                const FockSpace& space);

/// <H0>(t) = gamma t / (2m) + E_initial
double mean_energy_linear(double t, const TrapParams& params, double E_initial);

/// Time derivatives of (<x^2>, <p^2>, <xp + px>) implied by the averaged
/// master equation. Note the signs of the free-motion terms:
///   d<x^2>/dt = <xp+px>/m,  d<p^2>/dt = -m w^2 <xp+px> + gamma.
struct PositionMoments {
    double x2 = 0.0;
    double p2 = 0.0;
    double xp_sym = 0.0;  // <xp + px>
};
PositionMoments position_moment_rates(const PositionMoments& m, const TrapParams& params);

struct IntegrationOptions {
    double t_final = 0.0;
    double dt = 0.0;
    int record_every = 1;
    bool keep_states = false;
    double truncation_threshold = 1e-6;
};

struct HeatingResult {
    std::vector<double> times;
    std::vector<double> mean_energy;     // <H0>, J (or hbar w units in natural mode)
    std::vector<double> nbar;            // <a^dag a>
    std::vector<double> top_population;  // population of the two highest Fock levels
    std::optional<double> truncation_breach_time;
    std::vector<Matrix> states;          // only with keep_states
    Matrix final_state;
    // Worst invariant values seen over all recorded steps.
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 1.0;

    bool truncation_breached() const { return truncation_breach_time.has_value(); }
    /// Index of the last record before any truncation breach.
    std::size_t valid_records() const;
};

/// Fixed-step classical RK4 on rho. Requires dt <= 0.01 (2 pi / w). Every
/// recorded state is checked against the DensityMatrix invariants; a breach
/// throws InvariantError. Truncation breaches are flagged, not fatal.
HeatingResult integrate_master(const DensityMatrix& rho0, const MasterRhs& rhs,
                               const FockSpace& space, const TrapParams& params,
                               const IntegrationOptions& options);

/// Diagonal of H0 = hbar w (n + 1/2).
Eigen::VectorXd oscillator_energies(const FockSpace& space, const TrapParams& params);

}  // namespace iontrap
