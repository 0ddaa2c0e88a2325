#include "iontrap/hilbert.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace iontrap {

FockSpace::FockSpace(int cutoff) : cutoff_(cutoff) {
    if (cutoff < 2) {
        throw SpaceError("Fock cutoff must be >= 2, got " + std::to_string(cutoff));
    }
}

std::string to_string(Level level) {
    switch (level) {
        case Level::g: return "g";
        case Level::e: return "e";
        case Level::aux: return "aux";
    }
    return "?";
}

int ElectronicSpace::index(Level level) const {
    if (level == Level::aux && !has_aux_) {
        throw SpaceError("electronic space has no aux level");
    }
    return static_cast<int>(level);
}

OperatorMatrix::OperatorMatrix(Matrix entries, std::string label, bool hermitian)
    : m_(std::move(entries)), label_(std::move(label)), hermitian_(hermitian) {
    if (m_.rows() != m_.cols()) {
        throw InvariantError("operator '" + label_ + "' is not square");
    }
    if (!m_.allFinite()) {
        throw InvariantError("operator '" + label_ + "' has non-finite entries");
    }
    if (hermitian_ && m_.size() > 0) {
        const double err = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
        if (err >= 1e-12) {
            std::ostringstream os;
            os << "operator '" << label_ << "' labeled Hermitian but max|M - M^dag| = " << err;
            throw InvariantError(os.str());
        }
    }
}

OperatorMatrix OperatorMatrix::adjoint() const {
    return OperatorMatrix(m_.adjoint(), label_ + "^dag", hermitian_);
}

StateVector::StateVector(Vector amplitudes) : v_(std::move(amplitudes)) {
    const double n = v_.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) >= kNormTol) {
        std::ostringstream os;
        os << "state vector norm " << n << " deviates from 1";
        throw InvariantError(os.str());
    }
}

StateVector StateVector::normalized(Vector amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ParameterError("cannot normalize a zero or non-finite vector");
    }
    amplitudes /= n;
    return StateVector(std::move(amplitudes));
}

std::string DensityDiagnostics::describe() const {
    std::ostringstream os;
    os << "trace_error=" << trace_error << " hermiticity_error=" << hermiticity_error
       << " min_eigenvalue=" << min_eigenvalue;
    return os.str();
}

DensityDiagnostics diagnose(const Matrix& rho) {
    DensityDiagnostics d;
    d.trace_error = std::abs(rho.trace() - cplx(1.0, 0.0));
    d.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

DensityMatrix::DensityMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
        throw InvariantError("density matrix must be square and non-empty");
    }
    if (!m_.allFinite()) {
        throw InvariantError("density matrix has non-finite entries");
    }
    const DensityDiagnostics d = diagnose(m_);
    if (!d.ok()) {
        throw InvariantError("invalid density matrix: " + d.describe());
    }
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
    const Vector& v = psi.amplitudes();
    return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::basis(int dim, int n) {
    if (n < 0 || n >= dim) {
        throw SpaceError("basis index out of range");
    }
    Matrix m = Matrix::Zero(dim, dim);
    m(n, n) = 1.0;
    return DensityMatrix(std::move(m));
}

double DensityMatrix::purity() const {
    return (m_ * m_).trace().real();
}

LadderOperators ladder_operators(const FockSpace& space) {
    const int n = space.dim();
    Matrix a = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        a(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Matrix ad = a.adjoint();
    return {OperatorMatrix(std::move(a), "a"), OperatorMatrix(std::move(ad), "a^dag")};
}

OperatorMatrix number_operator(const FockSpace& space) {
    const int n = space.dim();
    Matrix num = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) num(k, k) = static_cast<double>(k);
    return OperatorMatrix(std::move(num), "a^dag a", true);
}

Quadratures quadrature_operators(const FockSpace& space, double m, double omega, double hbar) {
    if (!(m > 0.0) || !(omega > 0.0) || !(hbar > 0.0)) {
        throw ParameterError("quadrature_operators: m, omega and hbar must be positive");
    }
    const auto [a_op, ad_op] = ladder_operators(space);
    const Matrix& a = a_op.matrix();
    const Matrix& ad = ad_op.matrix();
    const double x0 = std::sqrt(hbar / (2.0 * m * omega));
    const double p0 = std::sqrt(hbar * m * omega / 2.0);
    Matrix x = x0 * (a + ad);
    Matrix p = kI * p0 * (ad - a);
    Matrix X = 0.5 * (a + ad);
    Matrix P = 0.5 * kI * (ad - a);
    return {OperatorMatrix(std::move(x), "x", true), OperatorMatrix(std::move(p), "p", true),
            OperatorMatrix(std::move(X), "X", true), OperatorMatrix(std::move(P), "P", true)};
}

Matrix dimensionless_position_squared(const FockSpace& space) {
    // Build in a space padded by one level so that a a^dag is exact on the
    // kept block, then cut back.
    const FockSpace padded(space.cutoff() + 1);
    const auto ops = ladder_operators(padded);
    const Matrix q = ops.a.matrix() + ops.a_dagger.matrix();
    const Matrix q2 = 0.25 * (q * q);
    return q2.topLeftCorner(space.dim(), space.dim());
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b) {
    return OperatorMatrix(kron(a.matrix(), b.matrix()), a.label() + " (x) " + b.label(),
                          a.hermitian() && b.hermitian());
}

int CompositeSpace::index(Level level, int n) const {
    if (n < 0 || n >= vib_.dim()) {
        throw SpaceError("Fock index out of range");
    }
    return el_.index(level) * vib_.dim() + n;
}

Vector CompositeSpace::basis(Level level, int n) const {
    Vector v = Vector::Zero(dim());
    v(index(level, n)) = 1.0;
    return v;
}

Matrix CompositeSpace::lift_electronic(const Matrix& op) const {
    return kron(op, Matrix::Identity(vib_.dim(), vib_.dim()));
}

Matrix CompositeSpace::lift_vibrational(const Matrix& op) const {
    return kron(Matrix::Identity(el_.dim(), el_.dim()), op);
}

Matrix CompositeSpace::electronic_projector(Level a, Level b) const {
    Matrix p = Matrix::Zero(el_.dim(), el_.dim());
    p(el_.index(a), el_.index(b)) = 1.0;
    return lift_electronic(p);
}

cplx expectation(const Matrix& rho, const Matrix& op) {
    if (rho.rows() != op.rows() || rho.cols() != op.cols()) {
        throw SpaceError("expectation: dimension mismatch");
    }
    // tr(rho op) = sum_ij rho_ij op_ji
    return (rho.array() * op.transpose().array()).sum();
}

cplx expectation(const DensityMatrix& rho, const OperatorMatrix& op) {
    return expectation(rho.matrix(), op.matrix());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace iontrap
