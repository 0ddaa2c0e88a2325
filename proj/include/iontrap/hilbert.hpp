#pragma once

#include <string>
#include <vector>

#include "iontrap/core.hpp"

namespace iontrap {

/// Truncated harmonic-oscillator space spanned by |0>..|cutoff-1>.
class FockSpace {
public:
    explicit FockSpace(int cutoff);

    int cutoff() const { return cutoff_; }
    int dim() const { return cutoff_; }

private:
    int cutoff_;
};

enum class Level { g = 0, e = 1, aux = 2 };

std::string to_string(Level level);

/// Electronic levels {g, e} or {g, e, aux}.
class ElectronicSpace {
public:
    static ElectronicSpace qubit() { return ElectronicSpace(false); }
    static ElectronicSpace with_aux() { return ElectronicSpace(true); }

    int dim() const { return has_aux_ ? 3 : 2; }
    bool has_aux() const { return has_aux_; }
    /// Basis index of a level; SpaceError if aux is requested but absent.
    int index(Level level) const;

private:
    explicit ElectronicSpace(bool has_aux) : has_aux_(has_aux) {}
    bool has_aux_;
};

/// Dense square complex operator with a descriptive label.
class OperatorMatrix {
public:
    OperatorMatrix() = default;
    /// Throws InvariantError if the matrix is not square or has non-finite
    /// entries, or if `hermitian` is set and max|M - M^dag| >= 1e-12.
    OperatorMatrix(Matrix entries, std::string label, bool hermitian = false);

    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    const std::string& label() const { return label_; }
    bool hermitian() const { return hermitian_; }

    OperatorMatrix adjoint() const;

private:
    Matrix m_;
    std::string label_;
    bool hermitian_ = false;
};

/// Normalized pure state.
class StateVector {
public:
    /// Throws InvariantError unless | ||v|| - 1 | < 1e-10.
    explicit StateVector(Vector amplitudes);
    /// Normalizes first; throws ParameterError on a zero vector.
    static StateVector normalized(Vector amplitudes);

    const Vector& amplitudes() const { return v_; }
    int dim() const { return static_cast<int>(v_.size()); }

private:
    Vector v_;
};

struct DensityDiagnostics {
    double trace_error = 0.0;        // |tr(rho) - 1|
    double hermiticity_error = 0.0;  // max |rho - rho^dag|
    double min_eigenvalue = 0.0;

    bool ok() const {
        return trace_error <= kTraceTol && hermiticity_error <= kHermitianTol &&
               min_eigenvalue >= -kPositivityTol;
    }
    std::string describe() const;
};

DensityDiagnostics diagnose(const Matrix& rho);

/// Hermitian, unit-trace, positive semidefinite matrix (within the fixed
/// tolerances in core.hpp).
class DensityMatrix {
public:
    /// Validates; throws InvariantError with the diagnostics on failure.
    explicit DensityMatrix(Matrix entries);
    static DensityMatrix pure(const StateVector& psi);
    /// Fock-basis projector |n><n| of dimension `dim`.
    static DensityMatrix basis(int dim, int n);

    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    double purity() const;

private:
    Matrix m_;
};

struct LadderOperators {
    OperatorMatrix a;
    OperatorMatrix a_dagger;
};

LadderOperators ladder_operators(const FockSpace& space);

/// Diagonal number operator a^dag a.
OperatorMatrix number_operator(const FockSpace& space);

struct Quadratures {
    OperatorMatrix x;  // sqrt(hbar/2 m w) (a + a^dag)
    OperatorMatrix p;  // i sqrt(hbar m w/2) (a^dag - a)
    OperatorMatrix X;  // (a + a^dag)/2, [X, P] = i/2
    OperatorMatrix P;  // i (a^dag - a)/2
};

Quadratures quadrature_operators(const FockSpace& space, double m, double omega,
                                 double hbar = kHbarSI);

/// (a + a^dag)^2 / 4 with exact matrix elements everywhere, including the
/// top Fock level where the product of truncated X matrices is wrong.
Matrix dimensionless_position_squared(const FockSpace& space);

/// Kronecker product; with the global electronic-first ordering pass the
/// electronic factor as `a`.
OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b);
Matrix kron(const Matrix& a, const Matrix& b);

/// Electronic (x) vibrational product space.
class CompositeSpace {
public:
    CompositeSpace(ElectronicSpace electronic, FockSpace vibrational)
        : el_(electronic), vib_(vibrational) {}

    const ElectronicSpace& electronic() const { return el_; }
    const FockSpace& vibrational() const { return vib_; }
    int dim() const { return el_.dim() * vib_.dim(); }
    int index(Level level, int n) const;

    Vector basis(Level level, int n) const;
    /// op (x) I_vib
    Matrix lift_electronic(const Matrix& op) const;
    /// I_el (x) op
    Matrix lift_vibrational(const Matrix& op) const;
    /// |a><b| (x) I_vib
    Matrix electronic_projector(Level a, Level b) const;

private:
    ElectronicSpace el_;
    FockSpace vib_;
};

/// tr(rho op). For Hermitian op the imaginary part is a rounding diagnostic.
cplx expectation(const DensityMatrix& rho, const OperatorMatrix& op);
cplx expectation(const Matrix& rho, const Matrix& op);

/// max_ij |a_ij - b_ij|
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace iontrap
