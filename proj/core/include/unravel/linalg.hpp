#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "unravel/tolerances.hpp"

namespace unravel {

using Complex = std::complex<double>;

// Every model in this library lives in a 2- or 4-dimensional Hilbert space.
inline constexpr std::size_t kMaxDim = 4;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::size_t dim);
  StateVector(std::initializer_list<Complex> amplitudes);

  static StateVector basis(std::size_t dim, std::size_t index);

  std::size_t dim() const { return dim_; }
  Complex& operator[](std::size_t i) { return amp_[i]; }
  const Complex& operator[](std::size_t i) const { return amp_[i]; }
  std::span<const Complex> amplitudes() const { return {amp_.data(), dim_}; }

  double norm2() const;
  bool is_normalized(double tol = kTol.normalization) const;
  // Throws std::domain_error for a zero or non-finite vector.
  StateVector normalized() const;
  bool is_finite() const;

  StateVector& operator+=(const StateVector& other);
  StateVector& operator-=(const StateVector& other);
  StateVector& operator*=(Complex s);

 private:
  std::array<Complex, kMaxDim> amp_{};
  std::size_t dim_ = 0;
};

StateVector operator+(StateVector a, const StateVector& b);
StateVector operator-(StateVector a, const StateVector& b);
StateVector operator*(Complex s, StateVector v);

// <a|b>
Complex inner(const StateVector& a, const StateVector& b);
StateVector kron(const StateVector& a, const StateVector& b);

// Dense square complex matrix, row-major, dim <= kMaxDim.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t dim);
  Matrix(std::size_t dim, std::initializer_list<Complex> row_major);

  static Matrix identity(std::size_t dim);
  static Matrix outer(const StateVector& ket, const StateVector& bra);  // |ket><bra|
  static Matrix diagonal(std::span<const Complex> entries);

  std::size_t dim() const { return dim_; }
  Complex& operator()(std::size_t i, std::size_t j) { return a_[i * kMaxDim + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return a_[i * kMaxDim + j]; }

  Matrix adjoint() const;
  Complex trace() const;
  double max_abs() const;
  bool is_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(Complex s);

 private:
  std::array<Complex, kMaxDim * kMaxDim> a_{};
  std::size_t dim_ = 0;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Complex s, Matrix m);
Matrix operator*(const Matrix& a, const Matrix& b);
StateVector operator*(const Matrix& m, const StateVector& v);

Matrix commutator(const Matrix& a, const Matrix& b);
Matrix anticommutator(const Matrix& a, const Matrix& b);
Matrix kron(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

class HermitianOperator {
 public:
  HermitianOperator() = default;

  // Rejects matrices that are not Hermitian to kTol.operator_hermiticity
  // (relative to the largest entry); stores the exactly symmetrized part.
  static HermitianOperator from_matrix(const Matrix& m);
  static HermitianOperator identity(std::size_t dim);

  const Matrix& matrix() const { return m_; }
  std::size_t dim() const { return m_.dim(); }
  // Largest |eigenvalue|.
  double spectral_radius() const;

 private:
  explicit HermitianOperator(Matrix m) : m_(m) {}
  Matrix m_;
};

HermitianOperator operator*(double s, const HermitianOperator& op);
HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b);
HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b);
// Integer power (n >= 0).
HermitianOperator power(const HermitianOperator& op, int n);

class DensityMatrix {
 public:
  DensityMatrix() = default;

  // Validates Hermiticity, unit trace and positivity; throws
  // std::invalid_argument otherwise.
  static DensityMatrix from_matrix(const Matrix& m);
  static DensityMatrix pure(const StateVector& psi);
  static DensityMatrix maximally_mixed(std::size_t dim);

  const Matrix& matrix() const { return m_; }
  std::size_t dim() const { return m_.dim(); }
  const Complex& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

 private:
  explicit DensityMatrix(Matrix m) : m_(m) {}
  Matrix m_;
};

struct Eigensystem {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns are eigenvectors
};

Eigensystem eigh(const Matrix& hermitian);
std::vector<double> eigenvalues(const Matrix& hermitian);

enum class Axis { x, y, z };
HermitianOperator pauli(Axis axis);

// <psi|O|psi>; the state must be normalized.
double expectation(const StateVector& psi, const HermitianOperator& op);
// Tr[O rho].
double expectation(const DensityMatrix& rho, const HermitianOperator& op);

// (1/2)<{Oi, Oj}> - <Oi><Oj>
double conditional_covariance(const StateVector& psi, const HermitianOperator& op_i,
                              const HermitianOperator& op_j);

DensityMatrix density_from_ensemble(std::span<const StateVector> states,
                                    std::span<const double> weights);

enum class Subsystem { first, second };
// Reduced state of a 2x2 bipartite density matrix.
DensityMatrix partial_trace(const DensityMatrix& joint, Subsystem keep);

namespace detail {
// Unchecked Rayleigh quotient <psi|M|psi>/<psi|psi>; used by the integrators.
Complex rayleigh(const StateVector& psi, const Matrix& m);
}  // namespace detail

}  // namespace unravel
