#include "iontrap/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "iontrap/heating.hpp"

namespace iontrap {

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::logic_error("csv row width != header width");
    rows.push_back(std::move(row));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

namespace {

std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        os << quote(cells[i]);
    }
    os << '\n';
}

}  // namespace

void write_csv(std::ostream& os, const CsvTable& table) {
    write_line(os, table.header);
    for (const auto& r : table.rows) write_line(os, r);
}

void write_csv_file(const std::string& path, const CsvTable& table) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(f, table);
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------- heating

TrapParams HeatLinearParams::trap() const {
    TrapParams t = natural_units ? TrapParams::natural(gamma) : TrapParams{};
    if (!natural_units) {
        t.m = m;
        t.omega = omega;
        t.hbar = hbar;
        t.gamma = gamma;
    }
    t.validate();
    return t;
}

CsvTable run_heat_linear(const HeatLinearParams& p) {
    const TrapParams params = p.trap();
    const FockSpace space(p.cutoff);
    IntegrationOptions opt;
    opt.t_final = p.t_final;
    opt.dt = p.dt;
    opt.record_every = p.record_every;
    MasterRhs rhs;
    if (p.time_averaged) {
        rhs = TimeAveragedMaster(params, space);
    } else {
        rhs = AveragedMaster(params, space);
    }
    const HeatingResult r =
        integrate_master(DensityMatrix::basis(space.dim(), 0), rhs, space, params, opt);
    const double e0 = 0.5 * params.hbar * params.omega;
    CsvTable t;
    t.header = {"t", "energy", "nbar", "trunc_top_pop", "E_linear"};
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        t.add_row({format_number(r.times[k]), format_number(r.mean_energy[k]),
                   format_number(r.nbar[k]), format_number(r.top_population[k]),
                   format_number(mean_energy_linear(r.times[k], params, e0))});
    }
    return t;
}

CsvTable run_heat_spring(const HeatSpringParams& p) {
    if (p.points < 2) throw ParameterError("heat-spring: points must be >= 2");
    if (!(p.wt_max > 0.0)) throw ParameterError("heat-spring: wt_max must be positive");
    const MomentState m0{p.xx, p.pp, p.xp};
    const double G = p.Gamma();
    CsvTable t;
    t.header = {"t", "omega_t", "E_exact", "E_approx", "E_matexp", "E_printed"};
    for (int k = 0; k < p.points; ++k) {
        const double wt = p.wt_max * k / (p.points - 1);
        const double time = wt / p.omega;
        t.add_row({format_number(time), format_number(wt),
                   format_number(exact_energy(m0, G, p.omega, time)),
                   format_number(approx_energy(m0, G, p.omega, time)),
                   format_number(propagate_moments(m0, G, p.omega, time).energy()),
                   format_number(exact_energy(m0, G, p.omega, time, ClosedFormReading::Printed))});
    }
    return t;
}

CsvTable run_trajectories(const TrajectoriesParams& p, EnsembleResult* result) {
    const TrapParams params = p.trap.trap();
    const FockSpace space(p.trap.cutoff);
    TrajectoryConfig cfg;
    cfg.n_traj = p.n_traj;
    cfg.dt = p.dt;
    cfg.t_final = p.t_final;
    cfg.master_seed = p.seed;
    cfg.scheme = p.scheme;
    cfg.record_every = p.record_every;
    cfg.n_threads = p.threads;
    const EnsembleResult r = run_ensemble(cfg, DensityMatrix::basis(space.dim(), 0), params, space);
    CsvTable t;
    t.header = {"t", "mean_energy", "stderr", "n_failures"};
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        t.add_row({format_number(r.times[k]), format_number(r.mean_energy[k]),
                   format_number(r.energy_stderr[k]), std::to_string(r.n_failures)});
    }
    if (result) *result = r;
    return t;
}

// ---------------------------------------------------------------- gates

GateSpec GateRunParams::spec() const {
    if (variant == GateVariant::MutualPhase) return GateSpec::mutual(kappa, omega);
    return GateSpec::nist(Omega_eta, 1.0, omega);
}

TrapParams GateRunParams::trap() const {
    return gate_trap_params(spec(), Gamma_gate, mass);
}

namespace {

GateMcOptions mc_options(const GateRunParams& p) {
    GateMcOptions o;
    o.cutoff = p.cutoff;
    o.steps = p.steps;
    o.n_threads = p.threads;
    o.reading = p.reading;
    return o;
}

}  // namespace

CsvTable run_gate_fidelity(const GateRunParams& p) {
    const GateSpec spec = p.spec();
    const TrapParams params = p.trap();
    const CompositeSpace space = gate_space(spec, p.cutoff);
    std::vector<InputState> inputs;
    for (double a2 : p.alpha2) {
        for (double e2 : p.eps2) inputs.push_back(InputState::from_populations(a2, e2, p.Delta));
    }
    std::vector<FidelityResult> mc;
    if (p.n_traj > 0) mc = fidelity_mc_batch(inputs, spec, params, p.n_traj, p.seed, mc_options(p));

    CsvTable t;
    t.header = {"alpha2", "eps2",        "Delta",   "F_analytic",     "F_dyson",
                "F_mc",   "F_mc_stderr", "variant", "formula_reading"};
    std::size_t i = 0;
    for (double a2 : p.alpha2) {
        for (double e2 : p.eps2) {
            const InputState& in = inputs[i];
            const double fa = fidelity_analytic(p.Gamma_gate, in, spec, p.reading);
            const double fd = dyson_averaged_state(in, spec, params, space).fidelity;
            const double nan = std::nan("");
            t.add_row({format_number(a2), format_number(e2), format_number(p.Delta),
                       format_number(fa), format_number(fd),
                       format_number(mc.empty() ? nan : mc[i].mc_estimate),
                       format_number(mc.empty() ? nan : mc[i].mc_stderr), to_string(p.variant),
                       to_string(p.reading)});
            ++i;
        }
    }
    return t;
}

CsvTable run_gate_sweep(const GateRunParams& p, const std::vector<double>& gammas, double alpha2,
                        double eps2) {
    const GateSpec spec = p.spec();
    const CompositeSpace space = gate_space(spec, p.cutoff);
    const InputState in = InputState::from_populations(alpha2, eps2, p.Delta);
    CsvTable t;
    t.header = {"Gamma", "F_analytic", "F_dyson", "F_mc", "F_mc_stderr", "variant",
                "formula_reading"};
    for (double G : gammas) {
        GateRunParams q = p;
        q.Gamma_gate = G;
        const TrapParams params = q.trap();
        const double fa = fidelity_analytic(G, in, spec, p.reading);
        const double fd = dyson_averaged_state(in, spec, params, space).fidelity;
        double fm = std::nan(""), fs = std::nan("");
        if (p.n_traj > 0) {
            const FidelityResult r = fidelity_mc(in, spec, params, p.n_traj, p.seed, mc_options(p));
            fm = r.mc_estimate;
            fs = r.mc_stderr;
        }
        t.add_row({format_number(G), format_number(fa), format_number(fd), format_number(fm),
                   format_number(fs), to_string(p.variant), to_string(p.reading)});
    }
    return t;
}

CsvTable run_estimate(const EstimateParams& p, GammaEstimate* chain) {
    const GammaEstimate g =
        estimate_gamma_a_from_heating(p.heating_rate, p.omega, p.mass, p.Omega_eta);
    const double back = heating_rate_from_gamma_a(g.Gamma_a, p.omega, p.mass, p.Omega_eta);
    CsvTable t;
    t.header = {"heating_rate", "gamma", "Gamma_a", "heating_rate_roundtrip"};
    t.add_row({format_number(p.heating_rate), format_number(g.gamma), format_number(g.Gamma_a),
               format_number(back)});
    if (chain) *chain = g;
    return t;
}

}  // namespace iontrap
