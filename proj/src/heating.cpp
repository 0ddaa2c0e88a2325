#include "iontrap/heating.hpp"

#include <cmath>
#include <sstream>

namespace iontrap {

Eigen::VectorXd oscillator_energies(const FockSpace& space, const TrapParams& params) {
    Eigen::VectorXd e(space.dim());
    for (int n = 0; n < space.dim(); ++n) {
        e(n) = params.hbar * params.omega * (n + 0.5);
    }
    return e;
}

AveragedMaster::AveragedMaster(const TrapParams& params, const FockSpace& space) {
    params.validate();
    const int n = space.dim();
    free_phase_.resize(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) free_phase_(i, j) = -kI * params.omega * double(i - j);
    }
    const auto ops = ladder_operators(space);
    q_ = ops.a.matrix() + ops.a_dagger.matrix();
    q2_ = q_ * q_;
    coupling_ = params.gamma / (4.0 * params.hbar * params.m * params.omega);
}

Matrix AveragedMaster::operator()(const Matrix& rho) const {
    Matrix out = (free_phase_ * rho.array()).matrix();
    if (coupling_ != 0.0) {
        const Matrix qr = q_ * rho;
        // [q, [q, rho]] = q^2 rho - 2 q rho q + rho q^2
        out.noalias() -= coupling_ * (q2_ * rho - 2.0 * qr * q_ + rho * q2_);
    }
    return out;
}

TimeAveragedMaster::TimeAveragedMaster(const TrapParams& params, const FockSpace& space) {
    params.validate();
    const auto ops = ladder_operators(space);
    a_ = ops.a.matrix();
    ad_ = ops.a_dagger.matrix();
    anti_ = ad_ * a_ + a_ * ad_;
    rate_ = params.gamma / (2.0 * params.hbar * params.m * params.omega);
}

Matrix TimeAveragedMaster::operator()(const Matrix& rho) const {
    return rate_ * (a_ * rho * ad_ + ad_ * rho * a_ - 0.5 * (anti_ * rho + rho * anti_));
}

namespace {

void check_dims(const DensityMatrix& rho, const FockSpace& space) {
    if (rho.dim() != space.dim()) throw SpaceError("density matrix / Fock space dimension mismatch");
}

}  // namespace

Matrix averaged_master_rhs(const DensityMatrix& rho, const TrapParams& params,
                           const FockSpace& space) {
    check_dims(rho, space);
    return AveragedMaster(params, space)(rho.matrix());
}

Matrix time_averaged_master_rhs(const DensityMatrix& rho, const TrapParams& params,
                                const FockSpace& space) {
    check_dims(rho, space);
    return TimeAveragedMaster(params, space)(rho.matrix());
}

double mean_energy_linear(double t, const TrapParams& params, double E_initial) {
    if (!(t >= 0.0)) throw ParameterError("mean_energy_linear: t must be >= 0");
    params.validate();
    return params.gamma * t / (2.0 * params.m) + E_initial;
}

PositionMoments position_moment_rates(const PositionMoments& s, const TrapParams& params) {
    params.validate();
    const double m = params.m;
    const double mw2 = m * params.omega * params.omega;
    PositionMoments d;
    d.x2 = s.xp_sym / m;
    d.p2 = -mw2 * s.xp_sym + params.gamma;
    d.xp_sym = 2.0 * s.p2 / m - 2.0 * mw2 * s.x2;
    return d;
}

std::size_t HeatingResult::valid_records() const {
    if (!truncation_breach_time) return times.size();
    std::size_t k = 0;
    while (k < times.size() && times[k] < *truncation_breach_time) ++k;
    return k;
}

HeatingResult integrate_master(const DensityMatrix& rho0, const MasterRhs& rhs,
                               const FockSpace& space, const TrapParams& params,
                               const IntegrationOptions& options) {
    params.validate();
    if (rho0.dim() != space.dim()) throw SpaceError("integrate_master: dimension mismatch");
    if (!(options.t_final >= 0.0)) throw ParameterError("t_final must be >= 0");
    if (!(options.dt > 0.0)) throw ParameterError("dt must be positive");
    const double dt_max = 0.01 * 2.0 * kPi / params.omega;
    if (options.dt > dt_max * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "integrate_master: dt = " << options.dt << " exceeds 0.01 trap periods (" << dt_max
           << ")";
        throw ParameterError(os.str());
    }
    if (options.record_every < 1) throw ParameterError("record_every must be >= 1");

    const long steps = options.t_final == 0.0
                           ? 0
                           : static_cast<long>(std::ceil(options.t_final / options.dt - 1e-9));
    const double h = steps > 0 ? options.t_final / static_cast<double>(steps) : 0.0;
    const int n = space.dim();
    const Eigen::VectorXd energies = oscillator_energies(space, params);

    HeatingResult res;
    auto record = [&](double t, const Matrix& rho) {
        const DensityDiagnostics d = diagnose(rho);
        res.max_trace_error = std::fmax(res.max_trace_error, d.trace_error);
        res.max_hermiticity_error = std::fmax(res.max_hermiticity_error, d.hermiticity_error);
        res.min_eigenvalue = std::fmin(res.min_eigenvalue, d.min_eigenvalue);
        if (!d.ok()) {
            std::ostringstream os;
            os << "integrate_master: invariant breach at t = " << t << ": " << d.describe();
            throw InvariantError(os.str());
        }
        const Eigen::VectorXd pop = rho.diagonal().real();
        double nbar = 0.0;
        for (int k = 0; k < n; ++k) nbar += k * pop(k);
        const double top = pop(n - 1) + pop(n - 2);
        if (top > options.truncation_threshold && !res.truncation_breach_time) {
            res.truncation_breach_time = t;
        }
        res.times.push_back(t);
        res.mean_energy.push_back(energies.dot(pop));
        res.nbar.push_back(nbar);
        res.top_population.push_back(top);
        if (options.keep_states) res.states.push_back(rho);
    };

    Matrix rho = rho0.matrix();
    record(0.0, rho);
    for (long k = 1; k <= steps; ++k) {
        const Matrix k1 = rhs(rho);
        const Matrix k2 = rhs(rho + 0.5 * h * k1);
        const Matrix k3 = rhs(rho + 0.5 * h * k2);
        const Matrix k4 = rhs(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (k % options.record_every == 0 || k == steps) {
            record(h * static_cast<double>(k), rho);
        }
    }
    res.final_state = rho;
    return res;
}

}  // namespace iontrap
