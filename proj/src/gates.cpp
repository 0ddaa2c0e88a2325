#include "iontrap/gates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "iontrap/rng.hpp"
#include "iontrap/stats.hpp"

namespace iontrap {

const char* to_string(GateVariant variant) {
    return variant == GateVariant::Nist ? "nist" : "mutual";
}

GateSpec GateSpec::mutual(double kappa, double omega) {
    GateSpec s;
    s.variant = GateVariant::MutualPhase;
    s.kappa = kappa;
    s.omega = omega;
    s.T = kPi / kappa;
    s.validate();
    return s;
}

GateSpec GateSpec::nist(double Omega, double eta, double omega) {
    GateSpec s;
    s.variant = GateVariant::Nist;
    s.Omega = Omega;
    s.eta = eta;
    s.omega = omega;
    s.T = 4.0 * kPi / (Omega * eta);
    s.validate();
    return s;
}

double GateSpec::coupling() const {
    return variant == GateVariant::Nist ? 0.25 * Omega_eta() : kappa;
}

void GateSpec::validate() const {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ParameterError("gate: omega must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("gate: T must be positive");
    if (variant == GateVariant::MutualPhase) {
        if (!(kappa > 0.0)) throw ParameterError("gate: kappa must be positive");
        if (std::abs(kappa * T - kPi) > 1e-12 * kPi) throw ParameterError("gate: kappa T != pi");
    } else {
        if (!(Omega > 0.0) || !(eta > 0.0)) throw ParameterError("gate: Omega, eta must be positive");
        if (std::abs(Omega_eta() * T - 4.0 * kPi) > 1e-12 * kPi) {
            throw ParameterError("gate: Omega eta T != 4 pi");
        }
    }
}

double gate_lambda(const TrapParams& params) {
    params.validate();
    return 1.0 / std::sqrt(2.0 * params.hbar * params.m * params.omega);
}

double gate_noise_parameter(const TrapParams& params, const GateSpec& spec) {
    spec.validate();
    const double lam = gate_lambda(params);
    return 2.0 * lam * lam * params.gamma * spec.T;
}

double gamma_for_gate_noise(double Gamma_gate, const TrapParams& params, const GateSpec& spec) {
    if (!(Gamma_gate >= 0.0)) throw ParameterError("gate noise parameter must be >= 0");
    spec.validate();
    const double lam = gate_lambda(params);
    return Gamma_gate / (2.0 * lam * lam * spec.T);
}

TrapParams gate_trap_params(const GateSpec& spec, double Gamma_gate, double m, double hbar) {
    TrapParams p;
    p.m = m;
    p.hbar = hbar;
    p.omega = spec.omega;
    p.gamma = gamma_for_gate_noise(Gamma_gate, p, spec);
    p.validate();
    return p;
}

CompositeSpace gate_space(const GateSpec& spec, int cutoff) {
    return CompositeSpace(spec.needs_aux() ? ElectronicSpace::with_aux() : ElectronicSpace::qubit(),
                          FockSpace(cutoff));
}

// ---------------------------------------------------------------- inputs

InputState InputState::from_populations(double alpha2, double eps2, double Delta) {
    if (!(alpha2 >= 0.0 && alpha2 <= 1.0) || !(eps2 >= 0.0 && eps2 <= 1.0)) {
        throw ParameterError("input populations must lie in [0, 1]");
    }
    if (!std::isfinite(Delta)) throw ParameterError("Delta must be finite");
    InputState s;
    s.alpha = std::sqrt(alpha2);
    s.beta = std::sqrt(1.0 - alpha2);
    s.delta = std::polar(std::sqrt(1.0 - eps2), Delta);
    s.epsilon = std::sqrt(eps2);
    s.Delta = Delta;
    return s;
}

InputState InputState::basis(int electronic, int vibrational) {
    if ((electronic != 0 && electronic != 1) || (vibrational != 0 && vibrational != 1)) {
        throw ParameterError("basis input bits must be 0 or 1");
    }
    InputState s;
    s.alpha = electronic == 0 ? 1.0 : 0.0;
    s.beta = electronic == 0 ? 0.0 : 1.0;
    s.delta = vibrational == 0 ? 1.0 : 0.0;
    s.epsilon = vibrational == 0 ? 0.0 : 1.0;
    return s;
}

void InputState::validate() const {
    const double ne = std::norm(alpha) + std::norm(beta);
    const double nv = std::norm(delta) + std::norm(epsilon);
    if (std::abs(ne - 1.0) > 1e-12) throw ParameterError("|alpha|^2 + |beta|^2 != 1");
    if (std::abs(nv - 1.0) > 1e-12) throw ParameterError("|delta|^2 + |epsilon|^2 != 1");
    if (!std::isfinite(Delta)) throw ParameterError("Delta must be finite");
    if (std::abs(delta) > 1e-12 && std::abs(epsilon) > 1e-12) {
        const double d = std::remainder(std::arg(delta) - std::arg(epsilon) - Delta, 2.0 * kPi);
        if (std::abs(d) > 1e-9) throw ParameterError("Delta inconsistent with arg(delta) - arg(epsilon)");
    }
}

StateVector input_vector(const InputState& input, const CompositeSpace& space) {
    input.validate();
    Vector v = Vector::Zero(space.dim());
    v(space.index(Level::g, 0)) = input.alpha * input.delta;
    v(space.index(Level::g, 1)) = input.alpha * input.epsilon;
    v(space.index(Level::e, 0)) = input.beta * input.delta;
    v(space.index(Level::e, 1)) = input.beta * input.epsilon;
    return StateVector(v);
}

// ---------------------------------------------------------------- ideal gate

OperatorMatrix rotation(RotationSign sign, const CompositeSpace& space) {
    const int ne = space.electronic().dim();
    Matrix r = Matrix::Identity(ne, ne);
    const double s = 1.0 / std::sqrt(2.0);
    if (sign == RotationSign::Plus) {
        r(0, 0) = s; r(0, 1) = s;
        r(1, 0) = -s; r(1, 1) = s;
    } else {
        r(0, 0) = s; r(0, 1) = -s;
        r(1, 0) = s; r(1, 1) = s;
    }
    return OperatorMatrix(space.lift_electronic(r),
                          sign == RotationSign::Plus ? "U_R+" : "U_R-");
}

Matrix gate_generator(const GateSpec& spec, const CompositeSpace& space) {
    spec.validate();
    if (spec.needs_aux() && !space.electronic().has_aux()) {
        throw SpaceError("NIST gate needs the auxiliary level");
    }
    const auto ops = ladder_operators(space.vibrational());
    if (spec.variant == GateVariant::MutualPhase) {
        const Matrix n = number_operator(space.vibrational()).matrix();
        return spec.kappa * space.electronic_projector(Level::e, Level::e) *
               space.lift_vibrational(n);
    }
    const Matrix up = space.electronic_projector(Level::e, Level::aux) *
                      space.lift_vibrational(ops.a_dagger.matrix());
    return spec.coupling() * (up + up.adjoint());
}

namespace {

// exp(-i H t) for Hermitian H.
Matrix unitary_exp(const Eigen::SelfAdjointEigenSolver<Matrix>& es, double t) {
    const Eigen::VectorXd& e = es.eigenvalues();
    Vector ph(e.size());
    for (Eigen::Index k = 0; k < e.size(); ++k) ph(k) = std::polar(1.0, -e(k) * t);
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

OperatorMatrix controlled_phase_ideal(const GateSpec& spec, const CompositeSpace& space) {
    const Matrix H = gate_generator(spec, space);
    if (spec.variant == GateVariant::MutualPhase) {
        // Diagonal generator: exponentiate entrywise, no eigensolver round-off.
        Matrix U = Matrix::Zero(H.rows(), H.cols());
        for (Eigen::Index k = 0; k < H.rows(); ++k) {
            const int n = static_cast<int>(k % space.vibrational().dim());
            const bool excited = k / space.vibrational().dim() == space.electronic().index(Level::e);
            U(k, k) = excited ? ((n % 2 == 0) ? 1.0 : -1.0) : 1.0;
        }
        return OperatorMatrix(U, "U_P");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    return OperatorMatrix(unitary_exp(es, spec.T), "U_P");
}

OperatorMatrix cnot_ideal(const GateSpec& spec, const CompositeSpace& space) {
    const Matrix U = rotation(RotationSign::Minus, space).matrix() *
                     controlled_phase_ideal(spec, space).matrix() *
                     rotation(RotationSign::Plus, space).matrix();
    return OperatorMatrix(U, "CNOT");
}

StateVector ideal_output(const InputState& input, const GateSpec& spec,
                         const CompositeSpace& space) {
    return StateVector::normalized(cnot_ideal(spec, space).matrix() *
                                   input_vector(input, space).amplitudes());
}

// ---------------------------------------------------------------- noise term

OperatorMatrix noise_hamiltonian(double t, double xi, const GateSpec& spec,
                                 const TrapParams& params, const CompositeSpace& space) {
    if (!(t >= 0.0 && t <= spec.T * (1.0 + 1e-12))) throw ParameterError("noise_hamiltonian: t outside [0, T]");
    const double lam = gate_lambda(params);
    const auto ops = ladder_operators(space.vibrational());
    const Matrix a = space.lift_vibrational(ops.a.matrix());
    const cplx ph = std::polar(1.0, -spec.omega * t);
    Matrix lab = a * ph;
    lab += lab.adjoint().eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gate_generator(spec, space));
    const Matrix U = unitary_exp(es, -t);  // exp(+i H_G t)
    Matrix h = (-params.hbar * lam * xi) * (U * lab * U.adjoint());
    h = 0.5 * (h + h.adjoint()).eval();
    return OperatorMatrix(h, "H_noise", true);
}

OperatorMatrix noise_hamiltonian_mutual(double t, double xi, const GateSpec& spec,
                                        const TrapParams& params, const CompositeSpace& space) {
    if (spec.variant != GateVariant::MutualPhase) {
        throw ParameterError("noise_hamiltonian_mutual: MutualPhase only");
    }
    const double lam = gate_lambda(params);
    const int nc = space.vibrational().dim();
    Matrix h = Matrix::Zero(space.dim(), space.dim());
    for (Level lv : {Level::g, Level::e}) {
        const double w = spec.omega + (lv == Level::e ? spec.kappa : 0.0);
        const cplx coef = -params.hbar * lam * xi * std::polar(1.0, -w * t);
        for (int n = 1; n < nc; ++n) {
            const int r = space.index(lv, n - 1), c = space.index(lv, n);
            h(r, c) = coef * std::sqrt(static_cast<double>(n));
            h(c, r) = std::conj(h(r, c));
        }
    }
    return OperatorMatrix(h, "H_noise", true);
}

// ---------------------------------------------------------------- trajectories

namespace {

using SparseC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

SparseC to_sparse(const Matrix& m) {
    std::vector<Eigen::Triplet<cplx>> trip;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (std::abs(m(i, j)) > 1e-14) trip.emplace_back(int(i), int(j), m(i, j));
        }
    }
    SparseC s(m.rows(), m.cols());
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

// Strang-split propagator over the gate, shared read-only between workers.
class GateStepper {
public:
    GateStepper(const GateSpec& spec, const TrapParams& params, const CompositeSpace& space,
                int steps)
        : levels_(space.electronic().dim()), cutoff_(space.vibrational().dim()), steps_(steps) {
        if (steps < 1) throw ParameterError("gate steps must be >= 1");
        h_ = spec.T / steps;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gate_generator(spec, space));
        half_ = to_sparse(unitary_exp(es, 0.5 * h_));
        full_ = to_sparse(unitary_exp(es, h_));
        sq_.resize(cutoff_ + 1);
        for (int n = 0; n <= cutoff_; ++n) sq_[n] = std::sqrt(static_cast<double>(n));
        amp_ = gate_lambda(params) * std::sqrt(params.gamma);
    }

    double h() const { return h_; }
    int steps() const { return steps_; }

    // cols <- U(T) cols for one realization.
    void evolve(Matrix& cols, const NoiseRealization& noise) const {
        if (static_cast<int>(noise.carrier_integrals.size()) != steps_ ||
            std::abs(noise.dt - h_) > 1e-12 * h_) {
            throw ParameterError("gate noise grid does not match the gate step");
        }
        Matrix tmp(cols.rows(), cols.cols());
        tmp.noalias() = half_ * cols;
        cols.swap(tmp);
        for (int k = 0; k < steps_; ++k) {
            if (amp_ != 0.0) displace(cols, kI * amp_ * noise.carrier_integrals[k], tmp);
            tmp.noalias() = (k + 1 == steps_ ? half_ : full_) * cols;
            cols.swap(tmp);
        }
    }

    double top_population(const Matrix& cols) const {
        double top = 0.0;
        for (Eigen::Index c = 0; c < cols.cols(); ++c) {
            double p = 0.0;
            for (int l = 0; l < levels_; ++l) {
                p += std::norm(cols(l * cutoff_ + cutoff_ - 1, c)) +
                     std::norm(cols(l * cutoff_ + cutoff_ - 2, c));
            }
            top = std::max(top, p);
        }
        return top;
    }

private:
    // cols <- exp(beta a^dag - beta^* a) cols, Taylor series on the vectors.
    void displace(Matrix& cols, cplx beta, Matrix& scratch) const {
        Matrix term = cols;
        const cplx bc = std::conj(beta);
        for (int k = 1; k < 60; ++k) {
            const double inv = 1.0 / k;
            double biggest = 0.0;
            for (Eigen::Index c = 0; c < cols.cols(); ++c) {
                for (int l = 0; l < levels_; ++l) {
                    const int o = l * cutoff_;
                    for (int n = 0; n < cutoff_; ++n) {
                        cplx v{0.0, 0.0};
                        if (n > 0) v += beta * (sq_[n] * term(o + n - 1, c));
                        if (n + 1 < cutoff_) v -= bc * (sq_[n + 1] * term(o + n + 1, c));
                        v *= inv;
                        scratch(o + n, c) = v;
                        biggest = std::max(biggest, std::abs(v.real()) + std::abs(v.imag()));
                    }
                }
            }
            term.swap(scratch);
            cols += term;
            if (biggest < 1e-18) break;
        }
    }

    int levels_;
    int cutoff_;
    int steps_;
    double h_ = 0.0;
    double amp_ = 0.0;
    SparseC half_, full_;
    std::vector<double> sq_;
};

int thread_count(int requested) {
    return requested > 0 ? requested : 0;
}

}  // namespace

NoiseRealization sample_gate_noise(const GateSpec& spec, std::uint64_t seed, std::uint64_t stream,
                                   int steps) {
    spec.validate();
    return sample_wiener_with_carrier(seed, spec.T / steps, steps, spec.omega, stream);
}

GateTrajectoryResult evolve_gate_trajectory(const InputState& input, const GateSpec& spec,
                                            const NoiseRealization& noise,
                                            const TrapParams& params,
                                            const CompositeSpace& space,
                                            const GateTrajectoryOptions& options) {
    params.validate();
    if (std::abs(params.omega - spec.omega) > 1e-12 * spec.omega) {
        throw ParameterError("trap and gate frequencies differ");
    }
    if (std::abs(noise.carrier - spec.omega) > 1e-12 * spec.omega) {
        throw ParameterError("noise carrier must equal the trap frequency");
    }
    const GateStepper stepper(spec, params, space, options.steps);
    Matrix cols = rotation(RotationSign::Plus, space).matrix() * input_vector(input, space).amplitudes();
    stepper.evolve(cols, noise);
    const double top = stepper.top_population(cols);
    Vector out = rotation(RotationSign::Minus, space).matrix() * cols.col(0);
    const double norm_err = std::abs(out.norm() - 1.0);
    if (norm_err > 1e-8) {
        throw InvariantError("evolve_gate_trajectory: norm drift " + std::to_string(norm_err));
    }
    GateTrajectoryResult r{StateVector::normalized(out), top, top > options.truncation_threshold,
                           norm_err};
    return r;
}

// ---------------------------------------------------------------- nu statistics

namespace {

CorrelationEstimate summarize(const std::vector<cplx>& xs) {
    RunningStats re, im;
    for (const cplx& z : xs) {
        re.add(z.real());
        im.add(z.imag());
    }
    return {cplx(re.mean(), im.mean()), re.stderr_of_mean(), im.stderr_of_mean()};
}

}  // namespace

NuStatistics nu_statistics(const GateSpec& spec, const TrapParams& params, long n_samples,
                           std::uint64_t seed, int fine_steps, int n_threads) {
    if (spec.variant != GateVariant::MutualPhase) throw ParameterError("nu_statistics: MutualPhase only");
    if (n_samples < 2) throw ParameterError("nu_statistics: need >= 2 samples");
    if (fine_steps < 1) throw ParameterError("nu_statistics: fine_steps must be >= 1");
    const double lam = gate_lambda(params);
    const double amp = lam * std::sqrt(params.gamma);
    const double h = spec.T / fine_steps;
    std::vector<cplx> pg(fine_steps), pe(fine_steps);
    for (int k = 0; k < fine_steps; ++k) {
        const double tm = (k + 0.5) * h;
        pg[k] = std::polar(1.0, -spec.omega * tm);
        pe[k] = std::polar(1.0, -(spec.omega + spec.kappa) * tm);
    }
    std::vector<cplx> ng(n_samples), ne(n_samples);
    const double sd = std::sqrt(h);
    const int nt = thread_count(n_threads);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt != 1)
    for (long i = 0; i < n_samples; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        cplx g{0.0, 0.0}, e{0.0, 0.0};
        for (int k = 0; k < fine_steps; ++k) {
            const double dw = sd * rng.normal();
            g += pg[k] * dw;
            e += pe[k] * dw;
        }
        ng[i] = amp * g;
        ne[i] = amp * e;
    }
    std::vector<cplx> buf(n_samples);
    NuStatistics out;
    out.n_samples = n_samples;
    for (long i = 0; i < n_samples; ++i) buf[i] = ng[i] * ng[i];
    out.gg = summarize(buf);
    for (long i = 0; i < n_samples; ++i) buf[i] = std::conj(ng[i]) * ng[i];
    out.gs_g = summarize(buf);
    for (long i = 0; i < n_samples; ++i) buf[i] = std::conj(ne[i]) * ne[i];
    out.es_e = summarize(buf);
    for (long i = 0; i < n_samples; ++i) buf[i] = std::conj(ng[i]) * ne[i];
    out.gs_e = summarize(buf);
    for (long i = 0; i < n_samples; ++i) buf[i] = ng[i] * std::conj(ne[i]);
    out.g_es = summarize(buf);
    return out;
}

cplx oscillatory_integral(double W, double T) {
    const double x = 0.5 * W * T;
    double sinc;
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    } else {
        sinc = std::sin(x) / x;
    }
    return T * sinc * std::polar(1.0, x);
}

NuStatistics nu_correlations_exact(const GateSpec& spec, const TrapParams& params) {
    if (spec.variant != GateVariant::MutualPhase) throw ParameterError("nu_correlations_exact: MutualPhase only");
    const double lam = gate_lambda(params);
    const double c = lam * lam * params.gamma;
    NuStatistics out;
    out.gg.mean = c * oscillatory_integral(-2.0 * spec.omega, spec.T);
    out.gs_g.mean = c * spec.T;
    out.es_e.mean = c * spec.T;
    out.gs_e.mean = c * oscillatory_integral(-spec.kappa, spec.T);
    out.g_es.mean = c * oscillatory_integral(spec.kappa, spec.T);
    return out;
}

// ---------------------------------------------------------------- Dyson

DysonResult dyson_averaged_state(const InputState& input, const GateSpec& spec,
                                 const TrapParams& params, const CompositeSpace& space) {
    const Matrix H = gate_generator(spec, space);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const Matrix& V = es.eigenvectors();
    const Eigen::VectorXd& E = es.eigenvalues();
    const int d = space.dim();
    const double w = spec.omega;
    const double T = spec.T;

    const auto ops = ladder_operators(space.vibrational());
    // s = +1 carries a^dag e^{i w t}, s = -1 carries a e^{-i w t}.
    const Matrix Mp = V.adjoint() * space.lift_vibrational(ops.a_dagger.matrix()) * V;
    const Matrix Mm = V.adjoint() * space.lift_vibrational(ops.a.matrix()) * V;

    const Vector psi1 = rotation(RotationSign::Plus, space).matrix() * input_vector(input, space).amplitudes();
    const Vector c = V.adjoint() * psi1;
    const Matrix rho = c * c.adjoint();

    auto freq_matrix = [&](int sigma) {
        Matrix I(d, d);
        for (int j = 0; j < d; ++j) {
            for (int l = 0; l < d; ++l) I(j, l) = oscillatory_integral(sigma * w + E(j) - E(l), T);
        }
        return I;
    };
    // int B^2 dt
    const Matrix B2 = (Mp * Mp).cwiseProduct(freq_matrix(2)) +
                      (Mp * Mm + Mm * Mp).cwiseProduct(freq_matrix(0)) +
                      (Mm * Mm).cwiseProduct(freq_matrix(-2));

    // int B rho B dt with rho = c c^dag: sum over the support of c.
    struct Piece {
        Vector u;           // M^s_{jk} c_k
        Eigen::VectorXd f;  // s w + E_j - E_k
    };
    std::vector<Piece> pieces;
    for (int k = 0; k < d; ++k) {
        if (std::abs(c(k)) < 1e-15) continue;
        for (int s : {1, -1}) {
            const Matrix& M = s > 0 ? Mp : Mm;
            Piece p{M.col(k) * c(k), Eigen::VectorXd(d)};
            for (int j = 0; j < d; ++j) p.f(j) = s * w + E(j) - E(k);
            pieces.push_back(std::move(p));
        }
    }
    Matrix Q = Matrix::Zero(d, d);
    for (const Piece& p : pieces) {
        for (const Piece& q : pieces) {
            for (int m = 0; m < d; ++m) {
                const cplx qm = std::conj(q.u(m));
                if (qm == cplx(0.0, 0.0)) continue;
                for (int j = 0; j < d; ++j) {
                    if (p.u(j) == cplx(0.0, 0.0)) continue;
                    Q(j, m) += p.u(j) * qm * oscillatory_integral(p.f(j) - q.f(m), T);
                }
            }
        }
    }

    const double lam = gate_lambda(params);
    const double c2 = 0.5 * lam * lam * params.gamma;
    const Matrix rho1_eig = rho - c2 * (B2 * rho + rho * B2 - 2.0 * Q);

    DysonResult r;
    r.rho1 = V * rho1_eig * V.adjoint();
    const Matrix UP = controlled_phase_ideal(spec, space).matrix();
    const Matrix UR = rotation(RotationSign::Minus, space).matrix();
    r.rho_out = UR * UP * r.rho1 * UP.adjoint() * UR.adjoint();
    r.fidelity = (c.adjoint() * rho1_eig * c)(0, 0).real();
    r.diagnostics = diagnose(r.rho1);
    return r;
}

// ---------------------------------------------------------------- analytic

const char* to_string(FormulaReading reading) {
    return reading == FormulaReading::B ? "b" : "a";
}

FormulaReading parse_formula_reading(const std::string& text) {
    if (text == "a" || text == "A") return FormulaReading::A;
    if (text == "b" || text == "B") return FormulaReading::B;
    throw ParameterError("formula reading must be 'a' or 'b', got '" + text + "'");
}

double fidelity_analytic_mutual(double Gamma_kappa, const InputState& input, double omega,
                                double kappa, FormulaReading reading) {
    if (!(Gamma_kappa >= 0.0)) throw ParameterError("Gamma_kappa must be >= 0");
    if (!(omega > 0.0) || !(kappa > 0.0)) throw ParameterError("omega, kappa must be positive");
    input.validate();
    const double e2 = std::norm(input.epsilon);
    const double bm2 = std::norm(input.beta - input.alpha);
    const double bp2 = std::norm(input.alpha + input.beta);
    const double x = omega * kPi / kappa;
    const double D2 = 2.0 * input.Delta;
    const double sc = std::sin(x) * std::cos(x + D2);

    const double t1 = bm2 * bm2 * (1.0 + kappa / (kPi * (omega + kappa)) * sc);
    const double t3 = bm2 * bp2 * 4.0 * kappa / (kPi * (2.0 * omega + kappa)) * std::cos(x) *
                      std::sin(x + D2);
    const double inner = 1.0 + kappa / (kPi * omega) * sc;
    const double bracket = reading == FormulaReading::A ? t1 + bp2 * bp2 * inner - t3
                                                        : t1 + bp2 * bp2 * (inner - t3);
    return 1.0 - 2.0 * Gamma_kappa * (1.0 + 2.0 * e2) + Gamma_kappa * (1.0 - e2) * e2 * bracket;
}

double fidelity_analytic_nist(double Gamma_a, const InputState& input, double omega,
                              double Omega_eta) {
    if (!(Gamma_a >= 0.0)) throw ParameterError("Gamma_a must be >= 0");
    if (!(omega > 0.0) || !(Omega_eta > 0.0)) throw ParameterError("omega, Omega eta must be positive");
    input.validate();
    const double tol = 1e-12 * std::max(omega, Omega_eta);
    if (std::abs(Omega_eta - 2.0 * omega) < tol || std::abs(Omega_eta - 4.0 * omega) < tol) {
        throw ValidityError("NIST fidelity: Omega eta on a resonance (2 w or 4 w)");
    }
    const double e2 = std::norm(input.epsilon);
    const double bm2 = std::norm(input.beta - input.alpha);
    const double bp2 = std::norm(input.alpha + input.beta);
    const double x = 4.0 * kPi * omega / Omega_eta;
    const double sc = std::sin(x) * std::cos(x + 2.0 * input.Delta);
    const double oe = Omega_eta;
    const double g = Gamma_a * e2 * (1.0 - e2);

    double f = 1.0 - 2.0 * Gamma_a * (1.0 + e2) - Gamma_a * e2 * bp2;
    f += g * bm2 * bm2 * sc *
         (oe / (8.0 * kPi * omega) - oe / (16.0 * kPi * (oe - 2.0 * omega)) +
          oe / (16.0 * kPi * (oe + 2.0 * omega)));
    f += g * bp2 * bp2 * (1.0 + oe / (2.0 * kPi * omega) * sc);
    f += g * bp2 * bm2 * sc * (oe / (kPi * (oe - 4.0 * omega)) + oe / (kPi * (oe + 4.0 * omega)));
    return f;
}

double fidelity_analytic(double Gamma_gate, const InputState& input, const GateSpec& spec,
                         FormulaReading reading) {
    spec.validate();
    if (spec.variant == GateVariant::MutualPhase) {
        return fidelity_analytic_mutual(Gamma_gate, input, spec.omega, spec.kappa, reading);
    }
    return fidelity_analytic_nist(Gamma_gate, input, spec.omega, spec.Omega_eta());
}

// ---------------------------------------------------------------- Monte Carlo

namespace {

void check_mc(long n_traj, const TrapParams& params, const GateSpec& spec) {
    if (n_traj < 100) throw ParameterError("gate Monte Carlo needs n_traj >= 100");
    params.validate();
    spec.validate();
    if (std::abs(params.omega - spec.omega) > 1e-12 * spec.omega) {
        throw ParameterError("trap and gate frequencies differ");
    }
}

// Columns of U(T) on the four logical inputs after U_R^+.
Matrix logical_columns(const CompositeSpace& space) {
    Matrix c = Matrix::Zero(space.dim(), 4);
    c(space.index(Level::g, 0), 0) = 1.0;
    c(space.index(Level::g, 1), 1) = 1.0;
    c(space.index(Level::e, 0), 2) = 1.0;
    c(space.index(Level::e, 1), 3) = 1.0;
    return c;
}

}  // namespace

std::vector<FidelityResult> fidelity_mc_batch(const std::vector<InputState>& inputs,
                                              const GateSpec& spec, const TrapParams& params,
                                              long n_traj, std::uint64_t master_seed,
                                              const GateMcOptions& options) {
    check_mc(n_traj, params, spec);
    const CompositeSpace space = gate_space(spec, options.cutoff);
    const GateStepper stepper(spec, params, space, options.steps);
    const Matrix basis = logical_columns(space);
    const Matrix UP = controlled_phase_ideal(spec, space).matrix();
    const Matrix URp = rotation(RotationSign::Plus, space).matrix();

    const int ni = static_cast<int>(inputs.size());
    // Coefficients of Psi_1 on the logical columns, and the ideal Psi_2 = U_P Psi_1.
    Matrix coef(4, ni), target(space.dim(), ni);
    for (int i = 0; i < ni; ++i) {
        const Vector psi1 = URp * input_vector(inputs[i], space).amplitudes();
        coef.col(i) = basis.adjoint() * psi1;
        target.col(i) = UP * psi1;
    }

    std::vector<double> fid(static_cast<std::size_t>(n_traj) * ni, 0.0);
    std::vector<char> failed(n_traj, 0), flagged(n_traj, 0);
    const int nt = thread_count(options.n_threads);
#pragma omp parallel for schedule(dynamic, 8) num_threads(nt) if (nt != 1)
    for (long t = 0; t < n_traj; ++t) {
        try {
            const NoiseRealization noise =
                sample_gate_noise(spec, master_seed, static_cast<std::uint64_t>(t), options.steps);
            Matrix cols = basis;
            stepper.evolve(cols, noise);
            flagged[t] = stepper.top_population(cols) > 1e-6;
            const Matrix out = cols * coef;
            for (int i = 0; i < ni; ++i) {
                const double nrm = out.col(i).norm();
                if (std::abs(nrm - 1.0) > 1e-8) throw InvariantError("norm drift");
                fid[t * ni + i] = std::norm(target.col(i).dot(out.col(i)));
            }
        } catch (const std::exception&) {
            failed[t] = 1;
        }
    }

    std::vector<FidelityResult> res(ni);
    for (int i = 0; i < ni; ++i) {
        RunningStats st;
        long nf = 0, nflag = 0;
        for (long t = 0; t < n_traj; ++t) {
            if (failed[t]) {
                ++nf;
                continue;
            }
            nflag += flagged[t];
            st.add(fid[t * ni + i]);
        }
        FidelityResult& r = res[i];
        r.analytic = fidelity_analytic(gate_noise_parameter(params, spec), inputs[i], spec,
                                       options.reading);
        r.mc_estimate = st.count() ? st.mean() : std::numeric_limits<double>::quiet_NaN();
        r.mc_stderr = st.stderr_of_mean();
        r.n_traj = n_traj;
        r.n_failures = nf;
        r.n_truncation_flags = nflag;
    }
    return res;
}

FidelityResult fidelity_mc(const InputState& input, const GateSpec& spec,
                           const TrapParams& params, long n_traj, std::uint64_t master_seed,
                           const GateMcOptions& options) {
    return fidelity_mc_batch({input}, spec, params, n_traj, master_seed, options).front();
}

GateEnsembleOutput mc_averaged_output(const InputState& input, const GateSpec& spec,
                                      const TrapParams& params, long n_traj,
                                      std::uint64_t master_seed, const GateMcOptions& options) {
    check_mc(n_traj, params, spec);
    const CompositeSpace space = gate_space(spec, options.cutoff);
    const GateStepper stepper(spec, params, space, options.steps);
    const Vector psi1 = rotation(RotationSign::Plus, space).matrix() * input_vector(input, space).amplitudes();
    const Matrix URm = rotation(RotationSign::Minus, space).matrix();
    const int d = space.dim();

    Matrix outs(d, n_traj);
    std::vector<char> failed(n_traj, 0);
    const int nt = thread_count(options.n_threads);
#pragma omp parallel for schedule(dynamic, 8) num_threads(nt) if (nt != 1)
    for (long t = 0; t < n_traj; ++t) {
        try {
            const NoiseRealization noise =
                sample_gate_noise(spec, master_seed, static_cast<std::uint64_t>(t), options.steps);
            Matrix col = psi1;
            stepper.evolve(col, noise);
            outs.col(t) = URm * col;
            if (std::abs(outs.col(t).norm() - 1.0) > 1e-8) throw InvariantError("norm drift");
        } catch (const std::exception&) {
            failed[t] = 1;
        }
    }

    GateEnsembleOutput r;
    r.n_traj = n_traj;
    Matrix sum = Matrix::Zero(d, d);
    Eigen::MatrixXd sre = Eigen::MatrixXd::Zero(d, d), sim = Eigen::MatrixXd::Zero(d, d);
    long n = 0;
    for (long t = 0; t < n_traj; ++t) {
        if (failed[t]) {
            ++r.n_failures;
            continue;
        }
        const Matrix p = outs.col(t) * outs.col(t).adjoint();
        sum += p;
        sre += p.real().cwiseAbs2();
        sim += p.imag().cwiseAbs2();
        ++n;
    }
    if (n < 2) throw InvariantError("mc_averaged_output: fewer than two successful trajectories");
    r.mean = sum / double(n);
    const Eigen::MatrixXd vre = ((sre / double(n)) - r.mean.real().cwiseAbs2()).cwiseMax(0.0) *
                                (double(n) / (n - 1));
    const Eigen::MatrixXd vim = ((sim / double(n)) - r.mean.imag().cwiseAbs2()).cwiseMax(0.0) *
                                (double(n) / (n - 1));
    r.stderr_ = Matrix(d, d);
    r.stderr_.real() = (vre / double(n)).cwiseSqrt();
    r.stderr_.imag() = (vim / double(n)).cwiseSqrt();
    return r;
}

// ---------------------------------------------------------------- estimate

namespace {

std::string fmt_line(const char* label, double v, const char* unit) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-42s %.6e %s", label, v, unit);
    return buf;
}

}  // namespace

GammaEstimate estimate_gamma_a_from_heating(double heating_rate, double omega, double m,
                                            double Omega_eta, double hbar) {
    if (!(heating_rate >= 0.0) || !std::isfinite(heating_rate)) {
        throw ParameterError("heating rate must be >= 0");
    }
    if (!(omega > 0.0) || !(m > 0.0) || !(Omega_eta > 0.0) || !(hbar > 0.0)) {
        throw ParameterError("omega, m, Omega eta, hbar must be positive");
    }
    GammaEstimate g;
    g.heating_rate = heating_rate;
    g.t_star = heating_rate > 0.0 ? 1.0 / heating_rate : std::numeric_limits<double>::infinity();
    g.gamma = 2.0 * hbar * m * omega * heating_rate;
    g.lambda2 = 1.0 / (2.0 * hbar * m * omega);
    g.gate_time = 4.0 * kPi / Omega_eta;
    g.Gamma_a = 4.0 * kPi * g.gamma / (hbar * m * omega * Omega_eta);
    g.chain = {
        fmt_line("heating rate dn/dt", heating_rate, "1/s"),
        fmt_line("t* = 1 / (dn/dt)", g.t_star, "s"),
        fmt_line("mass m", m, "kg"),
        fmt_line("trap frequency w", omega, "rad/s"),
        fmt_line("gamma = 2 hbar m w dn/dt", g.gamma, "N^2 s"),
        fmt_line("lambda^2 = 1 / (2 hbar m w)", g.lambda2, "1/(J s)"),
        fmt_line("gate time T = 4 pi / (Omega eta)", g.gate_time, "s"),
        fmt_line("Gamma_a = 2 lambda^2 gamma T = 2 (dn/dt) T", g.Gamma_a, "(dimensionless)"),
    };
    return g;
}

double heating_rate_from_gamma_a(double Gamma_a, double omega, double m, double Omega_eta,
                                 double hbar) {
    if (!(Gamma_a >= 0.0)) throw ParameterError("Gamma_a must be >= 0");
    if (!(omega > 0.0) || !(m > 0.0) || !(Omega_eta > 0.0) || !(hbar > 0.0)) {
        throw ParameterError("omega, m, Omega eta, hbar must be positive");
    }
    const double gamma = Gamma_a * hbar * m * omega * Omega_eta / (4.0 * kPi);
    return gamma / (2.0 * hbar * m * omega);
}

}  // namespace iontrap
