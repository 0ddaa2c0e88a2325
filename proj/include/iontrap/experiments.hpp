#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "iontrap/gates.hpp"
#include "iontrap/springnoise.hpp"
#include "iontrap/trajectories.hpp"

namespace iontrap {

/// Rows of formatted cells under a header. Numbers use 17 significant
/// digits in scientific notation so a rerun reproduces the bytes exactly.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
};

std::string format_number(double v);
void write_csv(std::ostream& os, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

/// Position-noise heating by deterministic master-equation integration from
/// the vacuum. In natural units (m = w = hbar = 1) energies are in hbar w.
struct HeatLinearParams {
    bool natural_units = true;
    double m = 1.0;
    double omega = 1.0;
    double hbar = 1.0;
    double gamma = 2.0;
    int cutoff = 32;
    double dt = 0.01;
    double t_final = 1.5;
    int record_every = 10;
    bool time_averaged = false;  // rotating-frame Lindblad form instead

    TrapParams trap() const;
};

/// Columns: t, energy, nbar, trunc_top_pop, E_linear.
CsvTable run_heat_linear(const HeatLinearParams& p);

/// Spring-constant noise, energies in hbar w.
struct HeatSpringParams {
    double omega = 2.0 * kPi * 11.2e3;
    double g = 0.1;  // Gamma w / 2
    double xx = 0.25;
    double pp = 0.25;
    double xp = 0.25;
    double wt_max = 50.0;
    int points = 501;

    double Gamma() const { return 2.0 * g / omega; }
};

/// Columns: t, omega_t, E_exact, E_approx, E_matexp, E_printed.
CsvTable run_heat_spring(const HeatSpringParams& p);

struct TrajectoriesParams {
    HeatLinearParams trap;  // cutoff and units
    long n_traj = 2000;
    double dt = 0.01;
    double t_final = 1.5;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::SplitStep;
    int record_every = 10;
    int threads = 0;
};

/// Columns: t, mean_energy, stderr, n_failures.
CsvTable run_trajectories(const TrajectoriesParams& p, EnsembleResult* result = nullptr);

struct GateRunParams {
    GateVariant variant = GateVariant::MutualPhase;
    double omega = 2.0 * kPi * 11.0e6;
    double kappa = 2.0 * kPi * 1.0e6;
    double Omega_eta = 2.0 * kPi * 12.0e3;
    double Gamma_gate = 0.02;
    double mass = kBerylliumIonMass;
    std::vector<double> alpha2 = {0.0, 0.5, 1.0};
    std::vector<double> eps2 = {0.0, 0.5, 1.0};
    double Delta = 0.0;
    long n_traj = 2000;  // 0 skips the Monte Carlo columns
    std::uint64_t seed = 1;
    int cutoff = 16;
    int steps = 1000;
    int threads = 0;
    FormulaReading reading = FormulaReading::A;

    GateSpec spec() const;
    TrapParams trap() const;
};

/// Columns: alpha2, eps2, Delta, F_analytic, F_dyson, F_mc, F_mc_stderr,
/// variant, formula_reading.
CsvTable run_gate_fidelity(const GateRunParams& p);

/// Fidelity against the noise parameter for one input.
/// Columns: Gamma, F_analytic, F_dyson, F_mc, F_mc_stderr, variant, formula_reading.
CsvTable run_gate_sweep(const GateRunParams& p, const std::vector<double>& gammas,
                        double alpha2, double eps2);

struct EstimateParams {
    double heating_rate = 19.0e3;  // phonons / s
    double omega = 2.0 * kPi * 11.0e6;
    double mass = kBerylliumIonMass;
    double Omega_eta = 2.0 * kPi * 12.0e3;
};

/// Columns: heating_rate, gamma, Gamma_a, heating_rate_roundtrip.
CsvTable run_estimate(const EstimateParams& p, GammaEstimate* chain = nullptr);

}  // namespace iontrap
