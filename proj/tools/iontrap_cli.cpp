// Batch runner: one subcommand per experiment family, INI config plus flag
// overrides, CSV output with a re-runnable .meta sidecar.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <type_traits>

#include "CLI11.hpp"

#include "iontrap/experiments.hpp"

#ifndef IONTRAP_VERSION
#define IONTRAP_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace iontrap;

namespace {

enum Exit : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kInvariantBreach = 3,
    kValidityError = 4,
    kIoError = 5,
};

int report(const char* category, const std::string& message, int code) {
    std::cerr << "error[" << category << "]: " << message << "\n";
    return code;
}

// Floating-point defaults are written at full precision so the .meta sidecar
// reproduces the run exactly.
template <class T>
CLI::Option* opt(CLI::App* sub, const std::string& flag, T& value, const std::string& desc) {
    CLI::Option* o = sub->add_option(flag, value, desc);
    if constexpr (std::is_floating_point_v<T>) {
        o->default_str(format_number(value));
    } else {
        o->capture_default_str();
    }
    return o;
}

struct Common {
    std::string out_dir = ".";
    std::string name;
    int threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
    opt(sub, "--out", c.out_dir, "Output directory");
    sub->add_option("--name", c.name, "Output file stem (default: subcommand name)");
    opt(sub, "--threads", c.threads, "Worker threads, 0 = OpenMP default")
        ->check(CLI::NonNegativeNumber);
}

const std::map<std::string, GateVariant> kVariants{{"mutual", GateVariant::MutualPhase},
                                                   {"nist", GateVariant::Nist}};
const std::map<std::string, FormulaReading> kReadings{{"a", FormulaReading::A},
                                                      {"b", FormulaReading::B}};
const std::map<std::string, Scheme> kSchemes{{"split_step", Scheme::SplitStep},
                                             {"euler_maruyama", Scheme::EulerMaruyama}};

// Trap options shared by heat-linear and trajectories.
struct TrapOpts {
    std::string units = "natural";
    HeatLinearParams p;
};

void add_trap(CLI::App* sub, TrapOpts& t) {
    opt(sub, "--units", t.units, "natural (m = w = hbar = 1) or si")
        ->check(CLI::IsMember({"natural", "si"}));
    opt(sub, "--mass", t.p.m, "Ion mass in kg (si units)");
    opt(sub, "--omega", t.p.omega, "Trap frequency in rad/s (si units)");
    opt(sub, "--hbar", t.p.hbar, "Reduced Planck constant (si units)");
    opt(sub, "--gamma", t.p.gamma, "Position-noise strength gamma");
    opt(sub, "--cutoff", t.p.cutoff, "Fock cutoff");
}

void finish_trap(TrapOpts& t) {
    t.p.natural_units = t.units == "natural";
    if (t.p.natural_units) {
        t.p.m = t.p.omega = t.p.hbar = 1.0;
    }
}

struct GateOpts {
    std::string variant = "mutual";
    std::string reading = "a";
    double trap_hz = 11.0e6;
    double kappa_hz = 1.0e6;
    double omega_eta_hz = 12.0e3;
    GateRunParams p;
};

void add_gate(CLI::App* sub, GateOpts& g) {
    opt(sub, "--variant", g.variant, "Gate variant")
        ->check(CLI::IsMember({"mutual", "nist"}));
    opt(sub, "--formula-reading", g.reading, "Bracket reading of the mutual-gate formula")
        ->check(CLI::IsMember({"a", "b"}));
    opt(sub, "--trap-hz", g.trap_hz, "Trap frequency w / 2pi in Hz");
    opt(sub, "--kappa-hz", g.kappa_hz, "Mutual gate kappa / 2pi in Hz");
    opt(sub, "--omega-eta-hz", g.omega_eta_hz, "NIST sideband Rabi frequency Omega eta / 2pi in Hz");
    opt(sub, "--gamma-gate", g.p.Gamma_gate, "Dimensionless gate noise parameter");
    opt(sub, "--mass", g.p.mass, "Ion mass in kg");
    opt(sub, "--delta", g.p.Delta, "Phase difference arg(delta) - arg(epsilon)");
    opt(sub, "--n-traj", g.p.n_traj, "Monte Carlo realizations, 0 skips Monte Carlo");
    opt(sub, "--seed", g.p.seed, "Master seed");
    opt(sub, "--cutoff", g.p.cutoff, "Fock cutoff");
    opt(sub, "--steps", g.p.steps, "Time steps per gate");
}

void finish_gate(GateOpts& g, int threads) {
    g.p.variant = kVariants.at(g.variant);
    g.p.reading = kReadings.at(g.reading);
    g.p.omega = 2.0 * kPi * g.trap_hz;
    g.p.kappa = 2.0 * kPi * g.kappa_hz;
    g.p.Omega_eta = 2.0 * kPi * g.omega_eta_hz;
    g.p.threads = threads;
}

void write_outputs(CLI::App* sub, const Common& c, const CsvTable& table,
                   const std::vector<std::string>& notes) {
    fs::create_directories(c.out_dir);
    const std::string stem = c.name.empty() ? sub->get_name() : c.name;
    const fs::path csv = fs::path(c.out_dir) / (stem + ".csv");
    write_csv_file(csv.string(), table);
    const fs::path meta = fs::path(c.out_dir) / (stem + ".csv.meta");
    std::ofstream m(meta, std::ios::binary);
    if (!m) throw std::runtime_error("cannot open '" + meta.string() + "' for writing");
    m << "# iontrap " << IONTRAP_VERSION << "\n";
    m << "# rerun: iontrap " << sub->get_name() << " --config " << meta.filename().string() << "\n";
    for (const auto& n : notes) m << "# " << n << "\n";
    m << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, false);
    if (!m) throw std::runtime_error("write to '" + meta.string() + "' failed");
    std::cout << "wrote " << csv.string() << " (" << table.rows.size() << " rows)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trapped-ion heating and gate-fidelity simulations"};
    app.set_version_flag("--version", std::string(IONTRAP_VERSION));
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI file; keys go in a [subcommand] section");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Common common;

    TrapOpts hl;
    std::string master = "averaged";
    auto* heat_linear = app.add_subcommand("heat-linear", "Position-noise heating from the averaged master equation");
    add_common(heat_linear, common);
    add_trap(heat_linear, hl);
    opt(heat_linear, "--dt", hl.p.dt, "Time step");
    opt(heat_linear, "--t-final", hl.p.t_final, "Final time");
    opt(heat_linear, "--record-every", hl.p.record_every, "Steps between records");
    opt(heat_linear, "--master", master, "averaged or time-averaged")
        ->check(CLI::IsMember({"averaged", "time-averaged"}));

    HeatSpringParams hs;
    double spring_hz = 11.2e3;
    auto* heat_spring = app.add_subcommand("heat-spring", "Spring-constant noise: closed form, approximation, moments");
    add_common(heat_spring, common);
    opt(heat_spring, "--trap-hz", spring_hz, "Trap frequency w / 2pi in Hz");
    opt(heat_spring, "--g", hs.g, "Gamma w / 2");
    opt(heat_spring, "--xx", hs.xx, "Initial <X^2>");
    opt(heat_spring, "--pp", hs.pp, "Initial <P^2>");
    opt(heat_spring, "--xp", hs.xp, "Initial <XP + PX> / 2");
    opt(heat_spring, "--wt-max", hs.wt_max, "Last w t");
    opt(heat_spring, "--points", hs.points, "Number of time points");

    TrapOpts tr;
    TrajectoriesParams tp;
    std::string scheme = "split_step";
    auto* trajectories = app.add_subcommand("trajectories", "Stochastic trajectory ensemble under position noise");
    add_common(trajectories, common);
    add_trap(trajectories, tr);
    opt(trajectories, "--n-traj", tp.n_traj, "Number of trajectories");
    opt(trajectories, "--dt", tp.dt, "Time step");
    opt(trajectories, "--t-final", tp.t_final, "Final time");
    opt(trajectories, "--seed", tp.seed, "Master seed");
    opt(trajectories, "--record-every", tp.record_every, "Steps between records");
    opt(trajectories, "--scheme", scheme, "split_step or euler_maruyama")
        ->check(CLI::IsMember({"split_step", "euler_maruyama"}));

    GateOpts gf;
    auto* gate = app.add_subcommand("gate-fidelity", "CNOT fidelity over a grid of input states");
    add_common(gate, common);
    add_gate(gate, gf);
    opt(gate, "--alpha2", gf.p.alpha2, "Grid of |alpha|^2")->delimiter(',');
    opt(gate, "--eps2", gf.p.eps2, "Grid of |epsilon|^2")->delimiter(',');

    GateOpts sw;
    std::vector<double> gammas{0.0, 0.005, 0.01, 0.02, 0.05};
    double sw_a2 = 0.5, sw_e2 = 1.0;
    auto* sweep = app.add_subcommand("sweep", "CNOT fidelity against the gate noise parameter");
    add_common(sweep, common);
    add_gate(sweep, sw);
    opt(sweep, "--gammas", gammas, "Gate noise parameters")->delimiter(',');
    opt(sweep, "--input-alpha2", sw_a2, "Input |alpha|^2");
    opt(sweep, "--input-eps2", sw_e2, "Input |epsilon|^2");

    EstimateParams ep;
    double est_trap_hz = 11.0e6, est_oe_hz = 12.0e3;
    auto* estimate = app.add_subcommand("estimate", "Gate noise parameter from a measured heating rate");
    add_common(estimate, common);
    opt(estimate, "--heating-rate", ep.heating_rate, "Phonons per second");
    opt(estimate, "--trap-hz", est_trap_hz, "Trap frequency w / 2pi in Hz");
    opt(estimate, "--omega-eta-hz", est_oe_hz, "Omega eta / 2pi in Hz");
    opt(estimate, "--mass", ep.mass, "Ion mass in kg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("config", e.what(), kConfigError);
    }

    try {
        if (heat_linear->parsed()) {
            finish_trap(hl);
            hl.p.time_averaged = master == "time-averaged";
            write_outputs(heat_linear, common, run_heat_linear(hl.p), {});
        } else if (heat_spring->parsed()) {
            hs.omega = 2.0 * kPi * spring_hz;
            write_outputs(heat_spring, common, run_heat_spring(hs),
                          {"E_exact uses the corrected closed form; E_printed the published coefficients"});
        } else if (trajectories->parsed()) {
            finish_trap(tr);
            tp.trap = tr.p;
            tp.scheme = kSchemes.at(scheme);
            tp.threads = common.threads;
            EnsembleResult r;
            const CsvTable t = run_trajectories(tp, &r);
            std::cout << "fitted d<H0>/dt = " << format_number(r.slope_mean) << " +- "
                      << format_number(r.slope_stderr) << ", failures " << r.n_failures << "\n";
            write_outputs(trajectories, common, t, {"scheme=" + scheme});
        } else if (gate->parsed()) {
            finish_gate(gf, common.threads);
            write_outputs(gate, common, run_gate_fidelity(gf.p),
                          {std::string("formula_reading=") + to_string(gf.p.reading),
                           std::string("variant=") + to_string(gf.p.variant)});
        } else if (sweep->parsed()) {
            finish_gate(sw, common.threads);
            write_outputs(sweep, common, run_gate_sweep(sw.p, gammas, sw_a2, sw_e2),
                          {std::string("formula_reading=") + to_string(sw.p.reading),
                           std::string("variant=") + to_string(sw.p.variant)});
        } else if (estimate->parsed()) {
            ep.omega = 2.0 * kPi * est_trap_hz;
            ep.Omega_eta = 2.0 * kPi * est_oe_hz;
            GammaEstimate chain;
            const CsvTable t = run_estimate(ep, &chain);
            for (const auto& line : chain.chain) std::cout << line << "\n";
            write_outputs(estimate, common, t, {});
        }
    } catch (const ParameterError& e) {
        return report("config", e.what(), kConfigError);
    } catch (const SpaceError& e) {
        return report("config", e.what(), kConfigError);
    } catch (const InvariantError& e) {
        return report("invariant", e.what(), kInvariantBreach);
    } catch (const ValidityError& e) {
        return report("validity", e.what(), kValidityError);
    } catch (const fs::filesystem_error& e) {
        return report("io", e.what(), kIoError);
    } catch (const std::runtime_error& e) {
        return report("io", e.what(), kIoError);
    } catch (const std::exception& e) {
        return report("internal", e.what(), kFailure);
    }
    return kOk;
}
