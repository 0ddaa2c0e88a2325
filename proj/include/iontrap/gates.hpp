#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iontrap/hilbert.hpp"
#include "iontrap/noise.hpp"

namespace iontrap {

enum class GateVariant { MutualPhase, Nist };

const char* to_string(GateVariant variant);

/// Controlled phase implementation. All frequencies in rad/s.
///
/// MutualPhase: H_G = hbar kappa a^dag a |e><e|, T = pi / kappa.
/// Nist: H_G = hbar (Omega eta / 4)(|e><aux| a^dag + |aux><e| a), T = 4 pi / (Omega eta).
/// The Nist coupling is chosen so that the |e,1> <-> |aux,0> Rabi cycle
/// completes exactly once in T and returns |e,1> with a sign flip.
struct GateSpec {
    GateVariant variant = GateVariant::MutualPhase;
    double omega = 0.0;  // trap frequency
    double kappa = 0.0;  // MutualPhase only
    double Omega = 0.0;  // Nist only
    double eta = 0.0;    // Nist only
    double T = 0.0;

    static GateSpec mutual(double kappa, double omega);
    static GateSpec nist(double Omega, double eta, double omega);

    double Omega_eta() const { return Omega * eta; }
    /// Coefficient of the gate generator, kappa or Omega eta / 4.
    double coupling() const;
    bool needs_aux() const { return variant == GateVariant::Nist; }
    void validate() const;
};

/// lambda = (2 hbar m w)^{-1/2}
double gate_lambda(const TrapParams& params);

/// Gamma_gate = 2 lambda^2 gamma T. Equals Gamma_kappa for MutualPhase and
/// Gamma_a for Nist.
double gate_noise_parameter(const TrapParams& params, const GateSpec& spec);

/// Inverse of gate_noise_parameter: the gamma giving `Gamma_gate`.
double gamma_for_gate_noise(double Gamma_gate, const TrapParams& params, const GateSpec& spec);

/// Trap parameters with params.omega = spec.omega and gamma set so that the
/// gate noise parameter equals Gamma_gate.
TrapParams gate_trap_params(const GateSpec& spec, double Gamma_gate,
                            double m = kBerylliumIonMass, double hbar = kHbarSI);

/// {g, e} (x) Fock for MutualPhase, {g, e, aux} (x) Fock for Nist.
CompositeSpace gate_space(const GateSpec& spec, int cutoff = 16);

/// (alpha |g> + beta |e>) (x) (delta |0> + epsilon |1>)
struct InputState {
    cplx alpha{1.0, 0.0};
    cplx beta{0.0, 0.0};
    cplx delta{1.0, 0.0};
    cplx epsilon{0.0, 0.0};
    double Delta = 0.0;  // arg(delta) - arg(epsilon)

    /// alpha = sqrt(a2), beta = sqrt(1 - a2), delta = sqrt(1 - e2) e^{i Delta},
    /// epsilon = sqrt(e2).
    static InputState from_populations(double alpha2, double eps2, double Delta = 0.0);
    /// Logical basis |el, vib> with el, vib in {0, 1}.
    static InputState basis(int electronic, int vibrational);

    /// Throws ParameterError if either factor is not normalized to 1e-12 or
    /// Delta disagrees with the amplitude phases.
    void validate() const;
};

/// Product vector of the input in `space`.
StateVector input_vector(const InputState& input, const CompositeSpace& space);

enum class RotationSign { Plus, Minus };

/// U_R^+ = [[1, 1], [-1, 1]] / sqrt2 and U_R^- = its transpose on {g, e};
/// identity on aux and on the vibrational factor.
OperatorMatrix rotation(RotationSign sign, const CompositeSpace& space);

/// H_G / hbar in rad/s.
Matrix gate_generator(const GateSpec& spec, const CompositeSpace& space);

/// U_P = exp(-i H_G T / hbar).
OperatorMatrix controlled_phase_ideal(const GateSpec& spec, const CompositeSpace& space);

/// U_R^- U_P U_R^+
OperatorMatrix cnot_ideal(const GateSpec& spec, const CompositeSpace& space);

StateVector ideal_output(const InputState& input, const GateSpec& spec,
                         const CompositeSpace& space);

/// Noise term in the gate frame,
///   exp(i H_G t / hbar) (-hbar lambda xi (a^dag e^{i w t} + a e^{-i w t})) exp(-i H_G t / hbar),
/// by explicit conjugation.
OperatorMatrix noise_hamiltonian(double t, double xi, const GateSpec& spec,
                                 const TrapParams& params, const CompositeSpace& space);

/// MutualPhase only: -hbar lambda xi (a e^{-i(kappa t |e><e| + w t)} + h.c.),
/// assembled sector by sector without any matrix exponential.
OperatorMatrix noise_hamiltonian_mutual(double t, double xi, const GateSpec& spec,
                                        const TrapParams& params, const CompositeSpace& space);

struct GateTrajectoryOptions {
    int steps = 1000;
    double truncation_threshold = 1e-6;
};

struct GateTrajectoryResult {
    StateVector state;  // U_R^- U(T) U_R^+ |input>
    double top_population = 0.0;
    bool truncation_flag = false;
    double norm_error = 0.0;
};

/// Full (non-perturbative) evolution for one noise realization. `noise` must
/// carry carrier integrals at spec.omega on a grid with steps * dt = T.
///
/// Each step is exp(-i H_G h/2) D(beta_k) exp(-i H_G h/2) with
/// beta_k = i lambda sqrt(gamma) Z_k; the noise-only propagator over a step is
/// exactly a displacement because the noise terms commute to c-numbers.
GateTrajectoryResult evolve_gate_trajectory(const InputState& input, const GateSpec& spec,
                                            const NoiseRealization& noise,
                                            const TrapParams& params,
                                            const CompositeSpace& space,
                                            const GateTrajectoryOptions& options = {});

/// Noise realization matching evolve_gate_trajectory's grid.
NoiseRealization sample_gate_noise(const GateSpec& spec, std::uint64_t seed, std::uint64_t stream,
                                   int steps = 1000);

struct CorrelationEstimate {
    cplx mean{0.0, 0.0};
    double stderr_re = 0.0;
    double stderr_im = 0.0;
};

struct NuStatistics {
    CorrelationEstimate gg;      // E(nu_g nu_g)
    CorrelationEstimate gs_g;    // E(nu_g^* nu_g)
    CorrelationEstimate es_e;    // E(nu_e^* nu_e)
    CorrelationEstimate gs_e;    // E(nu_g^* nu_e)
    CorrelationEstimate g_es;    // E(nu_g nu_e^*)
    long n_samples = 0;
};

/// Samples nu_g = lambda sqrt(gamma) int_0^T e^{-i w t} dW and
/// nu_e = lambda sqrt(gamma) int_0^T e^{-i (w + kappa) t} dW on a fine Wiener
/// path (midpoint phases). MutualPhase only.
NuStatistics nu_statistics(const GateSpec& spec, const TrapParams& params, long n_samples,
                           std::uint64_t seed, int fine_steps = 1000, int n_threads = 0);

/// Exact second moments from the Ito isometry, e.g.
/// E(nu_g^* nu_e) = lambda^2 gamma int_0^T e^{-i kappa t} dt. Stderrs are zero.
NuStatistics nu_correlations_exact(const GateSpec& spec, const TrapParams& params);

/// int_0^T exp(i W t) dt
cplx oscillatory_integral(double W, double T);

/// Second-order, noise-averaged Dyson result. Not a DensityMatrix: truncating
/// at second order leaves positivity violations of order Gamma^2.
struct DysonResult {
    Matrix rho1;     // averaged state after the noisy controlled phase, gate frame
    Matrix rho_out;  // U_R^- U_P rho1 U_P^dag U_R^-^dag
    double fidelity = 1.0;  // <Psi_1| rho1 |Psi_1>
    DensityDiagnostics diagnostics;  // of rho1
};

/// rho1' = rho1 - (lambda^2 gamma / 2) int_0^T [B(t), [B(t), rho1]] dt,
///   B(t) = e^{i H_G t} (a^dag e^{i w t} + a e^{-i w t}) e^{-i H_G t},
/// with every time integral done in closed form in the H_G eigenbasis.
DysonResult dyson_averaged_state(const InputState& input, const GateSpec& spec,
                                 const TrapParams& params, const CompositeSpace& space);

/// Balanced readings of the MutualPhase fidelity bracket.
///   A: the |alpha+beta|^4 factor closes after its cosine; the cross term
///      enters the outer bracket with weight 1.
///   B: the cross term sits inside the |alpha+beta|^4 factor.
enum class FormulaReading { A, B };

const char* to_string(FormulaReading reading);
FormulaReading parse_formula_reading(const std::string& text);

/// Printed first-order fidelity of the mutual phase gate.
double fidelity_analytic_mutual(double Gamma_kappa, const InputState& input, double omega,
                                double kappa, FormulaReading reading = FormulaReading::A);

/// Printed first-order fidelity of the NIST gate. ValidityError when
/// Omega eta hits 2 w or 4 w.
double fidelity_analytic_nist(double Gamma_a, const InputState& input, double omega,
                              double Omega_eta);

/// Dispatches on spec.variant; the reading only affects MutualPhase.
double fidelity_analytic(double Gamma_gate, const InputState& input, const GateSpec& spec,
                         FormulaReading reading = FormulaReading::A);

struct FidelityResult {
    double analytic = 1.0;
    double mc_estimate = 1.0;
    double mc_stderr = 0.0;
    long n_traj = 0;
    long n_failures = 0;
    long n_truncation_flags = 0;
};

struct GateMcOptions {
    int cutoff = 16;
    int steps = 1000;
    int n_threads = 0;  // 0: OpenMP default
    FormulaReading reading = FormulaReading::A;
};

/// Monte Carlo estimate of |<Psi_out|Psi'[xi]>|^2 over n_traj >= 100 seeded
/// realizations. One ensemble serves every input in `inputs`; results are
/// reduced in trajectory-index order.
std::vector<FidelityResult> fidelity_mc_batch(const std::vector<InputState>& inputs,
                                              const GateSpec& spec, const TrapParams& params,
                                              long n_traj, std::uint64_t master_seed,
                                              const GateMcOptions& options = {});

FidelityResult fidelity_mc(const InputState& input, const GateSpec& spec,
                           const TrapParams& params, long n_traj, std::uint64_t master_seed,
                           const GateMcOptions& options = {});

struct GateEnsembleOutput {
    Matrix mean;     // E |Psi'_out><Psi'_out|
    Matrix stderr_;  // real part: stderr of Re, imaginary part: stderr of Im
    long n_traj = 0;
    long n_failures = 0;
};

/// Ensemble average of the output density matrix, entry by entry.
GateEnsembleOutput mc_averaged_output(const InputState& input, const GateSpec& spec,
                                      const TrapParams& params, long n_traj,
                                      std::uint64_t master_seed,
                                      const GateMcOptions& options = {});

struct GammaEstimate {
    double heating_rate = 0.0;  // phonons / s
    double t_star = 0.0;        // s, inf for zero heating
    double gamma = 0.0;         // N^2 s
    double lambda2 = 0.0;       // 1 / (2 hbar m w)
    double gate_time = 0.0;     // 4 pi / Omega eta
    double Gamma_a = 0.0;
    std::vector<std::string> chain;  // human-readable conversion steps
};

/// dn/dt = gamma / (2 hbar m w) -> gamma -> Gamma_a = 4 pi gamma / (hbar m w Omega eta).
GammaEstimate estimate_gamma_a_from_heating(double heating_rate, double omega, double m,
                                            double Omega_eta, double hbar = kHbarSI);

/// Inverse chain: phonons / s that produce `Gamma_a`.
double heating_rate_from_gamma_a(double Gamma_a, double omega, double m, double Omega_eta,
                                 double hbar = kHbarSI);

}  // namespace iontrap
