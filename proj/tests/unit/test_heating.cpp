#include <doctest.h>

#include <cmath>

#include "iontrap/heating.hpp"
#include "iontrap/stats.hpp"

using namespace iontrap;

namespace {

Vector coherent(int dim, cplx alpha) {
    Vector v(dim);
    cplx c = 1.0;
    for (int n = 0; n < dim; ++n) {
        if (n > 0) c *= alpha / std::sqrt(static_cast<double>(n));
        v(n) = c;
    }
    return v * std::exp(-0.5 * std::norm(alpha));
}

IntegrationOptions opts(double t_final, double dt = 0.01, int every = 5) {
    IntegrationOptions o;
    o.t_final = t_final;
    o.dt = dt;
    o.record_every = every;
    return o;
}

double fitted_slope(const HeatingResult& r) {
    const std::size_t n = r.valid_records();
    REQUIRE(n >= 3);
    return fit_line(std::span(r.times.data(), n), std::span(r.mean_energy.data(), n)).slope;
}

}  // namespace

TEST_SUITE("heating") {

TEST_CASE("averaged master energy follows the linear law from vacuum") {
    const TrapParams p = TrapParams::natural(2.0);
    const FockSpace space(40);
    const HeatingResult r =
        integrate_master(DensityMatrix::basis(40, 0), AveragedMaster(p, space), space, p, opts(1.0));
    CHECK_FALSE(r.truncation_breached());
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        const double line = 0.5 + r.times[k];  // gamma t / 2m + hbar w / 2
        CHECK(std::abs(r.mean_energy[k] / line - 1.0) < 1e-6);
        CHECK(std::abs(r.nbar[k] - r.times[k]) < 1e-6);
    }
    CHECK(r.max_trace_error < 1e-12);
    CHECK(r.max_hermiticity_error < 1e-12);
    CHECK(r.min_eigenvalue > -1e-10);
}

TEST_CASE("slope does not depend on the initial state") {
    const TrapParams p = TrapParams::natural(0.6);
    const int dim = 40;
    const FockSpace space(dim);
    const AveragedMaster rhs(p, space);
    const double expected = p.gamma / (2.0 * p.m);

    const DensityMatrix fock2 = DensityMatrix::basis(dim, 2);
    const DensityMatrix coh = DensityMatrix::pure(StateVector::normalized(coherent(dim, {1.0, 0.5})));
    Eigen::VectorXd thermal(dim);
    for (int n = 0; n < dim; ++n) thermal(n) = std::pow(0.3, n) * 0.7;
    thermal /= thermal.sum();
    const DensityMatrix th(thermal.cast<cplx>().asDiagonal().toDenseMatrix());

    for (const DensityMatrix* rho : {&fock2, &coh, &th}) {
        const HeatingResult r = integrate_master(*rho, rhs, space, p, opts(2.0));
        const std::size_t n = r.valid_records();
        const LinearFit f = fit_line(std::span(r.times.data(), n), std::span(r.mean_energy.data(), n));
        CHECK(std::abs(f.slope / expected - 1.0) < 1e-6);
        CHECK(f.max_abs_residual < 1e-6 * r.mean_energy.back());
    }
}

TEST_CASE("rotating the initial state by free evolution leaves the slope unchanged") {
    const TrapParams p = TrapParams::natural(0.5);
    const int dim = 40;
    const FockSpace space(dim);
    const AveragedMaster rhs(p, space);
    // squeezed-looking superposition with a definite phase-space orientation
    Vector v = coherent(dim, {0.8, 0.0});
    v(2) += 0.4;
    const StateVector psi = StateVector::normalized(v);
    const DensityMatrix rho0 = DensityMatrix::pure(psi);
    const double base = fitted_slope(integrate_master(rho0, rhs, space, p, opts(2.0)));
    for (double angle : {0.3, 1.1, 2.5}) {
        Vector rot(dim);
        for (int n = 0; n < dim; ++n) rot(n) = psi.amplitudes()(n) * std::polar(1.0, -angle * n);
        const DensityMatrix r0 = DensityMatrix::pure(StateVector::normalized(rot));
        const double s = fitted_slope(integrate_master(r0, rhs, space, p, opts(2.0)));
        CHECK(std::abs(s - base) < 1e-8);
    }
}

TEST_CASE("time-averaged master gives the same heating rate") {
    const TrapParams p = TrapParams::natural(2.0);
    const FockSpace space(40);
    const TimeAveragedMaster rhs(p, space);
    CHECK(rhs.rate() == doctest::Approx(1.0));
    const HeatingResult r =
        integrate_master(DensityMatrix::basis(40, 0), rhs, space, p, opts(1.0));
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        CHECK(std::abs(r.nbar[k] - r.times[k]) < 1e-6);
    }
}

TEST_CASE("moment rates agree with the master equation generator") {
    TrapParams p;
    p.m = 1.7;
    p.omega = 0.9;
    p.hbar = 1.3;
    p.gamma = 0.4;
    const int dim = 30;
    const FockSpace space(dim);
    const Quadratures q = quadrature_operators(space, p.m, p.omega, p.hbar);
    Vector v = coherent(dim, {0.7, -0.4});
    v(1) += 0.3;
    const DensityMatrix rho = DensityMatrix::pure(StateVector::normalized(v));
    const Matrix x = q.x.matrix(), pm = q.p.matrix();
    const Matrix x2 = x * x, p2 = pm * pm, xp = x * pm + pm * x;

    PositionMoments m0;
    m0.x2 = expectation(rho.matrix(), x2).real();
    m0.p2 = expectation(rho.matrix(), p2).real();
    m0.xp_sym = expectation(rho.matrix(), xp).real();
    const PositionMoments rates = position_moment_rates(m0, p);

    const Matrix drho = averaged_master_rhs(rho, p, space);
    CHECK(std::abs(expectation(drho, x2).real() - rates.x2) < 1e-9);
    CHECK(std::abs(expectation(drho, p2).real() - rates.p2) < 1e-9);
    CHECK(std::abs(expectation(drho, xp).real() - rates.xp_sym) < 1e-9);
}

TEST_CASE("generators are trace preserving and fix the maximally mixed state") {
    const TrapParams p = TrapParams::natural(1.3);
    const FockSpace space(12);
    const Matrix mixed = Matrix::Identity(12, 12) / 12.0;
    CHECK(AveragedMaster(p, space)(mixed).cwiseAbs().maxCoeff() < 1e-14);
    Vector v = coherent(12, {0.5, 0.2});
    const DensityMatrix rho = DensityMatrix::pure(StateVector::normalized(v));
    CHECK(std::abs(averaged_master_rhs(rho, p, space).trace()) < 1e-14);
    CHECK(std::abs(time_averaged_master_rhs(rho, p, space).trace()) < 1e-14);
}

TEST_CASE("noise-free evolution is the free rotation") {
    const TrapParams p = TrapParams::natural(0.0);
    const int dim = 10;
    const FockSpace space(dim);
    Vector v = coherent(dim, {0.6, 0.0});
    const DensityMatrix rho0 = DensityMatrix::pure(StateVector::normalized(v));
    IntegrationOptions o = opts(1.0, 0.005, 200);
    o.keep_states = true;
    const HeatingResult r = integrate_master(rho0, AveragedMaster(p, space), space, p, o);
    Matrix U = Matrix::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) U(n, n) = std::polar(1.0, -1.0 * n);
    const Matrix expect = U * rho0.matrix() * U.adjoint();
    CHECK(max_abs_diff(r.final_state, expect) < 1e-10);
}

TEST_CASE("integration options are validated") {
    const TrapParams p = TrapParams::natural(1.0);
    const FockSpace space(8);
    const AveragedMaster rhs(p, space);
    const DensityMatrix rho = DensityMatrix::basis(8, 0);
    CHECK_THROWS_AS(integrate_master(rho, rhs, space, p, opts(1.0, 0.1)), ParameterError);
    CHECK_THROWS_AS(integrate_master(rho, rhs, space, p, opts(-1.0)), ParameterError);
    CHECK_THROWS_AS(integrate_master(DensityMatrix::basis(6, 0), rhs, space, p, opts(1.0)),
                    SpaceError);
    CHECK_THROWS_AS(mean_energy_linear(-1.0, p, 0.0), ParameterError);
}

TEST_CASE("truncation breach is flagged, not fatal") {
    const TrapParams p = TrapParams::natural(2.0);
    const FockSpace space(8);
    const HeatingResult r = integrate_master(DensityMatrix::basis(8, 0), AveragedMaster(p, space),
                                             space, p, opts(2.0));
    REQUIRE(r.truncation_breached());
    CHECK(r.valid_records() < r.times.size());
    CHECK(r.times[r.valid_records()] >= *r.truncation_breach_time);
}

}  // TEST_SUITE
