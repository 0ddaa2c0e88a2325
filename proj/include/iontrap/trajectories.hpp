#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iontrap/hilbert.hpp"
#include "iontrap/noise.hpp"

namespace iontrap {

/// How one conditioned step of the position-noise SDE is taken.
///
/// SplitStep: rho -> U rho U^dag with
///   U = e^{-i H0 dt / 2 hbar} e^{-i sqrt(gamma) x dW / hbar} e^{-i H0 dt / 2 hbar}.
///   Its Ito expansion is the stochastic master equation increment; it keeps
///   rho positive and pure states pure, and its noise average is a Strang
///   splitting of the averaged master equation.
/// EulerMaruyama: the literal density-matrix increment
///   -(i/hbar)[H0, rho] dt - (i/hbar) sqrt(gamma) [x, rho] dW - (gamma / 2 hbar^2)[x, [x, rho]] dt.
///   Loses positivity at O(dW^2) per step, so most trajectories fail the
///   invariant check at practical step sizes.
enum class Scheme { SplitStep, EulerMaruyama };

const char* to_string(Scheme scheme);
Scheme parse_scheme(const std::string& text);

struct TrajectoryConfig {
    long n_traj = 1;
    double dt = 0.0;
    double t_final = 0.0;
    std::uint64_t master_seed = 0;
    Scheme scheme = Scheme::SplitStep;
    int record_every = 1;
    int n_threads = 0;          // 0: OpenMP default
    bool keep_density = false;  // also average the full density matrix
    /// Per-trajectory energy slopes are fitted on records with t <= fit_t_max.
    double fit_t_max = 1e300;
    double truncation_threshold = 1e-6;

    /// n_traj >= 1, 0 < dt <= 0.005 (2 pi / w), t_final >= 0.
    void validate(const TrapParams& params) const;
};

struct StepOutcome {
    Matrix rho;
    double trace_drift = 0.0;  // |tr - 1| before renormalization
};

/// One conditioned step. Throws InvariantError, with diagnostics, if the
/// result is not a density matrix or the trace drifted by more than 1e-10.
StepOutcome conditioned_step_checked(const DensityMatrix& rho, double dW, double dt,
                                     const TrapParams& params, const FockSpace& space,
                                     Scheme scheme = Scheme::SplitStep);

DensityMatrix conditioned_step(const DensityMatrix& rho, double dW, double dt,
                               const TrapParams& params, const FockSpace& space,
                               Scheme scheme = Scheme::SplitStep);

struct TrajectoryFailure {
    long index = 0;
    std::string message;
};

struct EnsembleResult {
    std::vector<double> times;
    std::vector<double> mean_energy;
    std::vector<double> energy_stderr;
    std::vector<double> mean_nbar;
    std::vector<double> nbar_stderr;
    std::vector<double> mean_top_population;
    std::optional<double> truncation_breach_time;

    /// Only with keep_density. Imaginary part of density_stderr holds the
    /// stderr of the imaginary parts.
    std::vector<Matrix> mean_density;
    std::vector<Matrix> density_stderr;

    /// Mean and stderr over trajectories of the fitted d<H0>/dt.
    double slope_mean = 0.0;
    double slope_stderr = 0.0;

    long n_traj = 0;
    long n_failures = 0;
    std::vector<TrajectoryFailure> failures;  // index order
    double max_trace_drift = 0.0;             // largest per-step renormalization
    DensityDiagnostics worst_mean_density;    // over recorded averaged states
};

/// Averages n_traj conditioned evolutions of rho0. Trajectory i draws its
/// noise from stream i of master_seed; sums are formed in fixed blocks of
/// trajectory indices and combined in block order, so the result does not
/// depend on the number of threads.
EnsembleResult run_ensemble(const TrajectoryConfig& config, const DensityMatrix& rho0,
                            const TrapParams& params, const FockSpace& space);

}  // namespace iontrap
