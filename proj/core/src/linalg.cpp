#include "unravel/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace unravel {

namespace {

void check_dim(std::size_t dim) {
  if (dim == 0 || dim > kMaxDim) {
    throw DimensionError("dimension must be in [1, " + std::to_string(kMaxDim) + "], got " +
                         std::to_string(dim));
  }
}

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch " + std::to_string(a) +
                         " vs " + std::to_string(b));
  }
}

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

Matrix hermitian_part(const Matrix& m) {
  Matrix h(m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i) {
    h(i, i) = m(i, i).real();
    for (std::size_t j = i + 1; j < m.dim(); ++j) {
      Complex v = 0.5 * (m(i, j) + std::conj(m(j, i)));
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
  }
  return h;
}

double antihermitian_norm(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = i; j < m.dim(); ++j)
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

}  // namespace

// ---- StateVector ----

StateVector::StateVector(std::size_t dim) : dim_(dim) { check_dim(dim); }

StateVector::StateVector(std::initializer_list<Complex> amplitudes) : dim_(amplitudes.size()) {
  check_dim(dim_);
  std::copy(amplitudes.begin(), amplitudes.end(), amp_.begin());
}

StateVector StateVector::basis(std::size_t dim, std::size_t index) {
  StateVector v(dim);
  if (index >= dim) throw std::out_of_range("basis index out of range");
  v[index] = 1.0;
  return v;
}

double StateVector::norm2() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) s += std::norm(amp_[i]);
  return s;
}

bool StateVector::is_normalized(double tol) const { return std::abs(norm2() - 1.0) <= tol; }

bool StateVector::is_finite() const {
  for (std::size_t i = 0; i < dim_; ++i)
    if (!finite(amp_[i])) return false;
  return true;
}

StateVector StateVector::normalized() const {
  double n2 = norm2();
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw std::domain_error("cannot normalize zero or non-finite state");
  StateVector out = *this;
  out *= 1.0 / std::sqrt(n2);
  return out;
}

StateVector& StateVector::operator+=(const StateVector& other) {
  check_same(dim_, other.dim_, "StateVector +");
  for (std::size_t i = 0; i < dim_; ++i) amp_[i] += other.amp_[i];
  return *this;
}

StateVector& StateVector::operator-=(const StateVector& other) {
  check_same(dim_, other.dim_, "StateVector -");
  for (std::size_t i = 0; i < dim_; ++i) amp_[i] -= other.amp_[i];
  return *this;
}

StateVector& StateVector::operator*=(Complex s) {
  for (std::size_t i = 0; i < dim_; ++i) amp_[i] *= s;
  return *this;
}

StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
StateVector operator*(Complex s, StateVector v) { return v *= s; }

Complex inner(const StateVector& a, const StateVector& b) {
  check_same(a.dim(), b.dim(), "inner");
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

StateVector kron(const StateVector& a, const StateVector& b) {
  StateVector out(a.dim() * b.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < b.dim(); ++j) out[i * b.dim() + j] = a[i] * b[j];
  return out;
}

// ---- Matrix ----

Matrix::Matrix(std::size_t dim) : dim_(dim) { check_dim(dim); }

Matrix::Matrix(std::size_t dim, std::initializer_list<Complex> row_major) : dim_(dim) {
  check_dim(dim);
  if (row_major.size() != dim * dim) throw DimensionError("Matrix: wrong number of entries");
  std::size_t k = 0;
  for (Complex v : row_major) {
    (*this)(k / dim, k % dim) = v;
    ++k;
  }
}

Matrix Matrix::identity(std::size_t dim) {
  Matrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::outer(const StateVector& ket, const StateVector& bra) {
  check_same(ket.dim(), bra.dim(), "outer");
  Matrix m(ket.dim());
  for (std::size_t i = 0; i < ket.dim(); ++i)
    for (std::size_t j = 0; j < ket.dim(); ++j) m(i, j) = ket[i] * std::conj(bra[j]);
  return m;
}

Matrix Matrix::diagonal(std::span<const Complex> entries) {
  Matrix m(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
  return m;
}

Matrix Matrix::adjoint() const {
  Matrix m(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = std::conj((*this)(j, i));
  return m;
}

Complex Matrix::trace() const {
  Complex s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) s += (*this)(i, i);
  return s;
}

double Matrix::max_abs() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) s = std::max(s, std::abs((*this)(i, j)));
  return s;
}

bool Matrix::is_finite() const {
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j)
      if (!finite((*this)(i, j))) return false;
  return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  check_same(dim_, other.dim_, "Matrix +");
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) (*this)(i, j) += other(i, j);
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  check_same(dim_, other.dim_, "Matrix -");
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) (*this)(i, j) -= other(i, j);
  return *this;
}

Matrix& Matrix::operator*=(Complex s) {
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) (*this)(i, j) *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Complex s, Matrix m) { return m *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  check_same(a.dim(), b.dim(), "Matrix *");
  const std::size_t n = a.dim();
  Matrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      Complex aik = a(i, k);
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

StateVector operator*(const Matrix& m, const StateVector& v) {
  check_same(m.dim(), v.dim(), "Matrix * StateVector");
  StateVector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    Complex s = 0.0;
    for (std::size_t j = 0; j < v.dim(); ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }
Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

Matrix kron(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.dim() * b.dim();
  Matrix m(n);
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j)
      for (std::size_t k = 0; k < b.dim(); ++k)
        for (std::size_t l = 0; l < b.dim(); ++l)
          m(i * b.dim() + k, j * b.dim() + l) = a(i, j) * b(k, l);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).max_abs(); }

// ---- HermitianOperator ----

HermitianOperator HermitianOperator::from_matrix(const Matrix& m) {
  if (!m.is_finite()) throw std::invalid_argument("operator has non-finite entries");
  double scale = std::max(m.max_abs(), 1.0);
  double dev = antihermitian_norm(m);
  if (dev > kTol.operator_hermiticity * scale) {
    throw std::invalid_argument("operator is not Hermitian (max |A - A^dagger| = " +
                                std::to_string(dev) + ")");
  }
  return HermitianOperator(hermitian_part(m));
}

HermitianOperator HermitianOperator::identity(std::size_t dim) {
  return HermitianOperator(Matrix::identity(dim));
}

double HermitianOperator::spectral_radius() const {
  auto ev = eigenvalues(m_);
  return std::max(std::abs(ev.front()), std::abs(ev.back()));
}

HermitianOperator operator*(double s, const HermitianOperator& op) {
  return HermitianOperator::from_matrix(Complex(s) * op.matrix());
}

HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator::from_matrix(a.matrix() + b.matrix());
}

HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator::from_matrix(kron(a.matrix(), b.matrix()));
}

HermitianOperator power(const HermitianOperator& op, int n) {
  if (n < 0) throw std::invalid_argument("power: negative exponent");
  Matrix r = Matrix::identity(op.dim());
  for (int i = 0; i < n; ++i) r = r * op.matrix();
  // Products of a Hermitian matrix with itself commute, so the symmetrized
  // part differs from r only at rounding level.
  return HermitianOperator::from_matrix(hermitian_part(r));
}

// ---- DensityMatrix ----

DensityMatrix DensityMatrix::from_matrix(const Matrix& m) {
  if (!m.is_finite()) throw std::invalid_argument("density matrix has non-finite entries");
  double dev = antihermitian_norm(m);
  if (dev > kTol.density_hermiticity)
    throw std::invalid_argument("density matrix is not Hermitian (deviation " + std::to_string(dev) + ")");
  Complex tr = m.trace();
  if (std::abs(tr - 1.0) > kTol.density_trace)
    throw std::invalid_argument("density matrix trace is " + std::to_string(tr.real()) + ", expected 1");
  Matrix h = hermitian_part(m);
  double min_ev = eigenvalues(h).front();
  if (min_ev < kTol.density_min_eigenvalue)
    throw std::invalid_argument("density matrix has negative eigenvalue " + std::to_string(min_ev));
  return DensityMatrix(h);
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  if (!psi.is_normalized()) throw std::invalid_argument("pure: state is not normalized");
  return DensityMatrix(hermitian_part(Matrix::outer(psi, psi)));
}

DensityMatrix DensityMatrix::maximally_mixed(std::size_t dim) {
  Matrix m = Matrix::identity(dim);
  m *= 1.0 / static_cast<double>(dim);
  return DensityMatrix(m);
}

// ---- spectra ----

Eigensystem eigh(const Matrix& hermitian) {
  const std::size_t n = hermitian.dim();
  Eigen::MatrixXcd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hermitian(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigh: decomposition failed");
  Eigensystem out;
  out.values.resize(n);
  out.vectors = Matrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j)
      out.vectors(j, i) = solver.eigenvectors()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  }
  return out;
}

std::vector<double> eigenvalues(const Matrix& hermitian) {
  const std::size_t n = hermitian.dim();
  Eigen::MatrixXcd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hermitian(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalues: decomposition failed");
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
  return ev;
}

HermitianOperator pauli(Axis axis) {
  const Complex i(0.0, 1.0);
  switch (axis) {
    case Axis::x:
      return HermitianOperator::from_matrix(Matrix(2, {0.0, 1.0, 1.0, 0.0}));
    case Axis::y:
      return HermitianOperator::from_matrix(Matrix(2, {0.0, -i, i, 0.0}));
    case Axis::z:
      return HermitianOperator::from_matrix(Matrix(2, {1.0, 0.0, 0.0, -1.0}));
  }
  throw std::invalid_argument("pauli: bad axis");
}

// ---- expectations ----

namespace detail {
Complex rayleigh(const StateVector& psi, const Matrix& m) {
  const std::size_t n = psi.dim();
  Complex num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Complex row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += m(i, j) * psi[j];
    num += std::conj(psi[i]) * row;
    den += std::norm(psi[i]);
  }
  return num / den;
}
}  // namespace detail

double expectation(const StateVector& psi, const HermitianOperator& op) {
  check_same(psi.dim(), op.dim(), "expectation");
  if (!psi.is_normalized(kTol.stored_normalization))
    throw std::invalid_argument("expectation: state is not normalized");
  Complex v = detail::rayleigh(psi, op.matrix());
  double scale = std::max(op.matrix().max_abs(), 1.0);
  if (std::abs(v.imag()) > kTol.expectation_imag * scale * static_cast<double>(psi.dim()))
    throw std::logic_error("expectation: imaginary residue above tolerance");
  return v.real();
}

double expectation(const DensityMatrix& rho, const HermitianOperator& op) {
  check_same(rho.dim(), op.dim(), "expectation");
  return (op.matrix() * rho.matrix()).trace().real();
}

double conditional_covariance(const StateVector& psi, const HermitianOperator& op_i,
                              const HermitianOperator& op_j) {
  check_same(op_i.dim(), op_j.dim(), "conditional_covariance");
  double sym = 0.5 * detail::rayleigh(psi, anticommutator(op_i.matrix(), op_j.matrix())).real();
  return sym - expectation(psi, op_i) * expectation(psi, op_j);
}

DensityMatrix density_from_ensemble(std::span<const StateVector> states,
                                    std::span<const double> weights) {
  if (states.empty()) throw std::invalid_argument("density_from_ensemble: empty ensemble");
  if (states.size() != weights.size())
    throw std::invalid_argument("density_from_ensemble: states and weights differ in length");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("density_from_ensemble: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > kTol.weight_sum)
    throw std::invalid_argument("density_from_ensemble: weights sum to " + std::to_string(wsum));
  const std::size_t n = states.front().dim();
  Matrix rho(n);
  for (std::size_t k = 0; k < states.size(); ++k) {
    check_same(states[k].dim(), n, "density_from_ensemble");
    if (!states[k].is_normalized(kTol.stored_normalization))
      throw std::invalid_argument("density_from_ensemble: state is not normalized");
    rho += Complex(weights[k]) * Matrix::outer(states[k], states[k]);
  }
  return DensityMatrix::from_matrix(hermitian_part(rho));
}

DensityMatrix partial_trace(const DensityMatrix& joint, Subsystem keep) {
  if (joint.dim() != 4) throw DimensionError("partial_trace expects a two-qubit state");
  Matrix r(2);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t k = 0; k < 2; ++k) {
        if (keep == Subsystem::first)
          r(a, b) += joint(a * 2 + k, b * 2 + k);
        else
          r(a, b) += joint(k * 2 + a, k * 2 + b);
      }
  return DensityMatrix::from_matrix(r);
}

}  // namespace unravel
