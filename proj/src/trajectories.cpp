#include "iontrap/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "iontrap/heating.hpp"
#include "iontrap/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace iontrap {

const char* to_string(Scheme scheme) {
    return scheme == Scheme::EulerMaruyama ? "euler_maruyama" : "split_step";
}

Scheme parse_scheme(const std::string& text) {
    if (text == "split_step" || text == "split-step") return Scheme::SplitStep;
    if (text == "euler_maruyama" || text == "euler-maruyama") return Scheme::EulerMaruyama;
    throw ParameterError("unknown scheme '" + text + "'");
}

void TrajectoryConfig::validate(const TrapParams& params) const {
    params.validate();
    if (n_traj < 1) throw ParameterError("n_traj must be >= 1");
    if (!(dt > 0.0)) throw ParameterError("dt must be positive");
    const double dt_max = 0.005 * 2.0 * kPi / params.omega;
    if (dt > dt_max * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "dt = " << dt << " exceeds 0.005 trap periods (" << dt_max << ")";
        throw ParameterError(os.str());
    }
    if (!(t_final >= 0.0)) throw ParameterError("t_final must be >= 0");
    if (record_every < 1) throw ParameterError("record_every must be >= 1");
    if (n_threads < 0) throw ParameterError("n_threads must be >= 0");
}

namespace {

// Fixed per-ensemble operators for the split step.
struct SplitOperators {
    Eigen::VectorXd energies;  // hbar w (n + 1/2)
    Eigen::VectorXd x_eig;     // eigenvalues of x
    Matrix W;                  // eigenvectors of x
    Matrix Wh;                 // W^dag
    Matrix x;

    SplitOperators(const TrapParams& params, const FockSpace& space) {
        energies = oscillator_energies(space, params);
        x = quadrature_operators(space, params.m, params.omega, params.hbar).x.matrix();
        Eigen::SelfAdjointEigenSolver<Matrix> es(x);
        x_eig = es.eigenvalues();
        W = es.eigenvectors();
        Wh = W.adjoint();
    }

    Vector free_half(double dt, double hbar) const {
        Vector ph(energies.size());
        for (Eigen::Index n = 0; n < energies.size(); ++n) {
            ph(n) = std::polar(1.0, -0.5 * energies(n) * dt / hbar);
        }
        return ph;
    }

    Vector kick(double dW, const TrapParams& params) const {
        Vector k(x_eig.size());
        const double c = std::sqrt(params.gamma) * dW / params.hbar;
        for (Eigen::Index j = 0; j < x_eig.size(); ++j) k(j) = std::polar(1.0, -c * x_eig(j));
        return k;
    }

    // U = half W kick W^dag half, as a dense matrix.
    Matrix step_unitary(double dW, double dt, const TrapParams& params) const {
        const Vector h = free_half(dt, params.hbar);
        return h.asDiagonal() * (W * kick(dW, params).asDiagonal() * Wh) * h.asDiagonal();
    }
};

Matrix euler_maruyama_increment(const Matrix& rho, double dW, double dt, const Matrix& x,
                                const Eigen::VectorXd& energies, const TrapParams& params) {
    const int n = static_cast<int>(rho.rows());
    Matrix out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out(i, j) = -kI * (energies(i) - energies(j)) / params.hbar * rho(i, j) * dt;
        }
    }
    const Matrix xr = x * rho;
    const Matrix rx = rho * x;
    const Matrix comm = xr - rx;
    out += (-kI * std::sqrt(params.gamma) / params.hbar * dW) * comm;
    out -= (params.gamma / (2.0 * params.hbar * params.hbar) * dt) * (x * comm - comm * x);
    return out;
}

void renormalize(Matrix& rho, double& drift) {
    const cplx tr = rho.trace();
    drift = std::abs(tr - 1.0);
    rho /= tr.real();
    rho = 0.5 * (rho + rho.adjoint()).eval();
}

}  // namespace

StepOutcome conditioned_step_checked(const DensityMatrix& rho, double dW, double dt,
                                     const TrapParams& params, const FockSpace& space,
                                     Scheme scheme) {
    params.validate();
    if (rho.dim() != space.dim()) throw SpaceError("conditioned_step: dimension mismatch");
    if (!std::isfinite(dW)) throw ParameterError("conditioned_step: dW must be finite");
    if (!(dt > 0.0)) throw ParameterError("conditioned_step: dt must be positive");
    const SplitOperators ops(params, space);
    StepOutcome out;
    if (scheme == Scheme::SplitStep) {
        const Matrix U = ops.step_unitary(dW, dt, params);
        out.rho = U * rho.matrix() * U.adjoint();
    } else {
        out.rho = rho.matrix() + euler_maruyama_increment(rho.matrix(), dW, dt, ops.x, ops.energies, params);
    }
    renormalize(out.rho, out.trace_drift);
    const DensityDiagnostics d = diagnose(out.rho);
    if (!d.ok() || out.trace_drift > 1e-10) {
        std::ostringstream os;
        os << "conditioned_step (" << to_string(scheme) << "): trace drift " << out.trace_drift
           << ", " << d.describe();
        throw InvariantError(os.str());
    }
    return out;
}

DensityMatrix conditioned_step(const DensityMatrix& rho, double dW, double dt,
                               const TrapParams& params, const FockSpace& space, Scheme scheme) {
    return DensityMatrix(conditioned_step_checked(rho, dW, dt, params, space, scheme).rho);
}

namespace {

constexpr long kBlock = 16;

struct BlockSums {
    long count = 0;
    std::vector<double> e, e2, nb, nb2, top;
    std::vector<Matrix> rho;
    std::vector<Eigen::MatrixXd> re2, im2;
    std::vector<TrajectoryFailure> failures;
    double max_drift = 0.0;

    void init(std::size_t records, int dim, bool density) {
        e.assign(records, 0.0);
        e2 = nb = nb2 = top = e;
        if (density) {
            rho.assign(records, Matrix::Zero(dim, dim));
            re2.assign(records, Eigen::MatrixXd::Zero(dim, dim));
            im2 = re2;
        }
    }

    void merge(const BlockSums& o) {
        count += o.count;
        for (std::size_t r = 0; r < e.size(); ++r) {
            e[r] += o.e[r];
            e2[r] += o.e2[r];
            nb[r] += o.nb[r];
            nb2[r] += o.nb2[r];
            top[r] += o.top[r];
        }
        for (std::size_t r = 0; r < rho.size(); ++r) {
            rho[r] += o.rho[r];
            re2[r] += o.re2[r];
            im2[r] += o.im2[r];
        }
        failures.insert(failures.end(), o.failures.begin(), o.failures.end());
        max_drift = std::max(max_drift, o.max_drift);
    }
};

struct Record {
    double energy = 0.0;
    double nbar = 0.0;
    double top = 0.0;
};

Record observe(const Matrix& rho, const Eigen::VectorXd& energies) {
    const Eigen::VectorXd pop = rho.diagonal().real();
    Record r;
    const int n = static_cast<int>(pop.size());
    r.energy = energies.dot(pop);
    for (int k = 0; k < n; ++k) r.nbar += k * pop(k);
    r.top = pop(n - 1) + pop(n - 2);
    return r;
}

// Weighted pure components of rho0.
struct Components {
    std::vector<double> weight;
    std::vector<Vector> psi;
};

Components decompose(const DensityMatrix& rho0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho0.matrix());
    Components c;
    double total = 0.0;
    for (Eigen::Index k = es.eigenvalues().size() - 1; k >= 0; --k) {
        const double p = es.eigenvalues()(k);
        if (p < 1e-14) continue;
        c.weight.push_back(p);
        c.psi.push_back(es.eigenvectors().col(k));
        total += p;
    }
    for (double& w : c.weight) w /= total;
    return c;
}

struct Grid {
    long steps = 0;
    double h = 0.0;
    std::vector<long> record_steps;
};

Grid make_grid(const TrajectoryConfig& cfg) {
    Grid g;
    g.steps = cfg.t_final == 0.0 ? 0 : static_cast<long>(std::ceil(cfg.t_final / cfg.dt - 1e-9));
    g.h = g.steps > 0 ? cfg.t_final / static_cast<double>(g.steps) : cfg.dt;
    g.record_steps.push_back(0);
    for (long k = 1; k <= g.steps; ++k) {
        if (k % cfg.record_every == 0 || k == g.steps) g.record_steps.push_back(k);
    }
    return g;
}

// One trajectory; fills `records` (and `states` with keep_density). Throws on failure.
void run_one(long index, const TrajectoryConfig& cfg, const Grid& grid, const Components& comp,
             const DensityMatrix& rho0, const SplitOperators& ops, const TrapParams& params,
             std::vector<Record>& records, std::vector<Matrix>* states, double& max_drift) {
    const NoiseRealization noise =
        grid.steps > 0 ? sample_wiener(cfg.master_seed, grid.h, static_cast<int>(grid.steps),
                                       static_cast<std::uint64_t>(index))
                       : NoiseRealization{};
    const int n = rho0.dim();
    std::size_t next = 0;
    auto is_record = [&](long k) {
        return next < grid.record_steps.size() && grid.record_steps[next] == k;
    };

    if (cfg.scheme == Scheme::EulerMaruyama) {
        Matrix rho = rho0.matrix();
        for (long k = 0; k <= grid.steps; ++k) {
            if (k > 0) {
                rho += euler_maruyama_increment(rho, noise.increments[k - 1], grid.h, ops.x,
                                                ops.energies, params);
                double drift = 0.0;
                renormalize(rho, drift);
                max_drift = std::max(max_drift, drift);
                const DensityDiagnostics d = diagnose(rho);
                if (!d.ok() || drift > 1e-10) {
                    std::ostringstream os;
                    os << "step " << k << ": trace drift " << drift << ", " << d.describe();
                    throw InvariantError(os.str());
                }
            }
            if (is_record(k)) {
                records[next] = observe(rho, ops.energies);
                if (states) (*states)[next] = rho;
                ++next;
            }
        }
        return;
    }

    Matrix psi(n, static_cast<Eigen::Index>(comp.psi.size()));
    for (std::size_t c = 0; c < comp.psi.size(); ++c) psi.col(c) = comp.psi[c];
    const Vector half = ops.free_half(grid.h, params.hbar);
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(comp.weight.data(),
                                                                 static_cast<Eigen::Index>(comp.weight.size()));
    Matrix tmp(n, psi.cols());
    for (long k = 0; k <= grid.steps; ++k) {
        if (k > 0) {
            psi = half.asDiagonal() * psi;
            tmp.noalias() = ops.Wh * psi;
            tmp = ops.kick(noise.increments[k - 1], params).asDiagonal() * tmp;
            psi.noalias() = ops.W * tmp;
            psi = half.asDiagonal() * psi;
            for (Eigen::Index c = 0; c < psi.cols(); ++c) {
                const double nrm2 = psi.col(c).squaredNorm();
                const double drift = std::abs(nrm2 - 1.0);
                max_drift = std::max(max_drift, drift);
                if (!(drift <= 1e-10)) {
                    std::ostringstream os;
                    os << "step " << k << ": norm drift " << drift;
                    throw InvariantError(os.str());
                }
                psi.col(c) /= std::sqrt(nrm2);
            }
        }
        if (is_record(k)) {
            const Eigen::VectorXd pop = psi.cwiseAbs2() * w;
            Record r;
            r.energy = ops.energies.dot(pop);
            for (int m = 0; m < n; ++m) r.nbar += m * pop(m);
            r.top = pop(n - 1) + pop(n - 2);
            records[next] = r;
            if (states) (*states)[next] = psi * w.asDiagonal() * psi.adjoint();
            ++next;
        }
    }
}

}  // namespace

EnsembleResult run_ensemble(const TrajectoryConfig& config, const DensityMatrix& rho0,
                            const TrapParams& params, const FockSpace& space) {
    config.validate(params);
    if (rho0.dim() != space.dim()) throw SpaceError("run_ensemble: dimension mismatch");
    const Grid grid = make_grid(config);
    const std::size_t nrec = grid.record_steps.size();
    const SplitOperators ops(params, space);
    const Components comp = decompose(rho0);
    const int dim = space.dim();

    EnsembleResult res;
    res.n_traj = config.n_traj;
    for (long k : grid.record_steps) res.times.push_back(grid.h * static_cast<double>(k));

    std::vector<std::size_t> fit_idx;
    for (std::size_t r = 0; r < nrec; ++r) {
        if (res.times[r] <= config.fit_t_max) fit_idx.push_back(r);
    }
    std::vector<double> fit_t;
    for (std::size_t r : fit_idx) fit_t.push_back(res.times[r]);
    std::vector<double> slopes(config.n_traj, std::numeric_limits<double>::quiet_NaN());

    const long n_blocks = (config.n_traj + kBlock - 1) / kBlock;
    int threads = 1;
#ifdef _OPENMP
    threads = config.n_threads > 0 ? config.n_threads : omp_get_max_threads();
#endif
    const long wave = std::max<long>(1, 2L * threads);

    BlockSums total;
    total.init(nrec, dim, config.keep_density);

    for (long b0 = 0; b0 < n_blocks; b0 += wave) {
        const long b1 = std::min(n_blocks, b0 + wave);
        std::vector<BlockSums> blocks(static_cast<std::size_t>(b1 - b0));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
        for (long b = b0; b < b1; ++b) {
            BlockSums& acc = blocks[static_cast<std::size_t>(b - b0)];
            acc.init(nrec, dim, config.keep_density);
            std::vector<Record> rec(nrec);
            std::vector<Matrix> states(config.keep_density ? nrec : 0);
            std::vector<double> ys(fit_idx.size());
            for (long i = b * kBlock; i < std::min(config.n_traj, (b + 1) * kBlock); ++i) {
                try {
                    run_one(i, config, grid, comp, rho0, ops, params, rec,
                            config.keep_density ? &states : nullptr, acc.max_drift);
                } catch (const std::exception& ex) {
                    acc.failures.push_back({i, ex.what()});
                    continue;
                }
                ++acc.count;
                for (std::size_t r = 0; r < nrec; ++r) {
                    acc.e[r] += rec[r].energy;
                    acc.e2[r] += rec[r].energy * rec[r].energy;
                    acc.nb[r] += rec[r].nbar;
                    acc.nb2[r] += rec[r].nbar * rec[r].nbar;
                    acc.top[r] += rec[r].top;
                    if (config.keep_density) {
                        acc.rho[r] += states[r];
                        acc.re2[r] += states[r].real().cwiseAbs2();
                        acc.im2[r] += states[r].imag().cwiseAbs2();
                    }
                }
                if (fit_idx.size() >= 2) {
                    for (std::size_t q = 0; q < fit_idx.size(); ++q) ys[q] = rec[fit_idx[q]].energy;
                    slopes[i] = fit_line(fit_t, ys).slope;
                }
            }
        }
        for (const BlockSums& b : blocks) total.merge(b);
    }

    res.failures = total.failures;
    res.n_failures = static_cast<long>(total.failures.size());
    res.max_trace_drift = total.max_drift;
    const double n = static_cast<double>(total.count);
    auto mean_se = [&](double s, double s2, double& mean, double& se) {
        if (total.count == 0) {
            mean = se = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        mean = s / n;
        const double var = total.count > 1 ? std::max(0.0, (s2 - s * mean) / (n - 1.0)) : 0.0;
        se = std::sqrt(var / n);
    };
    for (std::size_t r = 0; r < nrec; ++r) {
        double m, se;
        mean_se(total.e[r], total.e2[r], m, se);
        res.mean_energy.push_back(m);
        res.energy_stderr.push_back(se);
        mean_se(total.nb[r], total.nb2[r], m, se);
        res.mean_nbar.push_back(m);
        res.nbar_stderr.push_back(se);
        res.mean_top_population.push_back(total.top[r] / n);
        if (!res.truncation_breach_time && total.top[r] / n > config.truncation_threshold) {
            res.truncation_breach_time = res.times[r];
        }
    }
    if (config.keep_density && total.count > 0) {
        res.worst_mean_density.min_eigenvalue = 1.0;
        for (std::size_t r = 0; r < nrec; ++r) {
            Matrix mean = total.rho[r] / n;
            Matrix se(dim, dim);
            const double corr = total.count > 1 ? n / (n - 1.0) : 0.0;
            se.real() = (((total.re2[r] / n) - mean.real().cwiseAbs2()).cwiseMax(0.0) * corr / n).cwiseSqrt();
            se.imag() = (((total.im2[r] / n) - mean.imag().cwiseAbs2()).cwiseMax(0.0) * corr / n).cwiseSqrt();
            const DensityDiagnostics d = diagnose(mean);
            auto& w = res.worst_mean_density;
            w.trace_error = std::max(w.trace_error, d.trace_error);
            w.hermiticity_error = std::max(w.hermiticity_error, d.hermiticity_error);
            w.min_eigenvalue = std::min(w.min_eigenvalue, d.min_eigenvalue);
            res.mean_density.push_back(std::move(mean));
            res.density_stderr.push_back(std::move(se));
        }
    }
    RunningStats st;
    for (long i = 0; i < config.n_traj; ++i) {
        if (std::isfinite(slopes[i])) st.add(slopes[i]);
    }
    res.slope_mean = st.count() ? st.mean() : std::numeric_limits<double>::quiet_NaN();
    res.slope_stderr = st.stderr_of_mean();
    return res;
}

}  // namespace iontrap
