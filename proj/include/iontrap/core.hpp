#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace iontrap {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Reduced Planck constant, J s (CODATA 2018, exact).
inline constexpr double kHbarSI = 1.054571817e-34;
/// Elementary charge, C.
inline constexpr double kElementaryCharge = 1.602176634e-19;
/// Atomic mass unit, kg.
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;
/// Mass of a 9Be+ ion (neutral atomic mass 9.0121831 u minus one electron).
inline constexpr double kBerylliumIonMass = 9.0121831 * kAtomicMassUnit - 9.1093837015e-31;

// Fixed validation tolerances.
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kPositivityTol = 1e-8;
inline constexpr double kNormTol = 1e-10;

/// Bad numeric input (nonpositive mass, negative time, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or incompatible Hilbert space.
class SpaceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A state or operator left its admissible set during a computation.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation outside the region where a closed form is valid.
class ValidityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace iontrap
