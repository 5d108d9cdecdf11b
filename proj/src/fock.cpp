#include "iongate/fock.hpp"

#include <cmath>

namespace iongate {

OperatorSet make_operators(const HilbertConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim_fock;
  OperatorSet ops;
  ops.cfg = cfg;
  ops.a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) ops.a(n - 1, n) = std::sqrt(static_cast<double>(n));
  ops.a_dag = ops.a.adjoint();
  ops.n_op = ops.a_dag * ops.a;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ops.x_quad = (ops.a + ops.a_dag) * inv_sqrt2;
  ops.p_quad = (ops.a - ops.a_dag) * (Complex(0, -1) * inv_sqrt2);
  ops.osc_id = Matrix::Identity(d, d);
  // Qubit basis ordering |g⟩ = e0, |e⟩ = e1.
  ops.sigma_y << 0.0, Complex(0, -1), Complex(0, 1), 0.0;
  ops.sigma_plus << 0.0, 0.0, 1.0, 0.0;
  ops.qubit_id = Eigen::Matrix2cd::Identity();
  return ops;
}

JointState JointState::pure(Vector psi, HilbertConfig cfg, bool has_qubit) {
  cfg.validate();
  const int expect = has_qubit ? 2 * cfg.dim_fock : cfg.dim_fock;
  if (psi.size() != expect)
    throw std::invalid_argument("JointState::pure: dimension mismatch");
  JointState s;
  s.kind_ = StateKind::PureVector;
  s.has_qubit_ = has_qubit;
  s.cfg_ = cfg;
  s.vec_ = std::move(psi);
  if (s.norm_defect() > 1e-10)
    throw std::invalid_argument("JointState::pure: vector not unit norm");
  return s;
}

JointState JointState::density(Matrix rho, HilbertConfig cfg, bool has_qubit) {
  cfg.validate();
  const int expect = has_qubit ? 2 * cfg.dim_fock : cfg.dim_fock;
  if (rho.rows() != expect || rho.cols() != expect)
    throw std::invalid_argument("JointState::density: dimension mismatch");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("JointState::density: matrix not Hermitian");
  JointState s;
  s.kind_ = StateKind::DensityMatrix;
  s.has_qubit_ = has_qubit;
  s.cfg_ = cfg;
  s.rho_ = std::move(rho);
  if (s.norm_defect() > 1e-10)
    throw std::invalid_argument("JointState::density: trace deviates from 1");
  return s;
}

const Vector& JointState::vec() const {
  if (kind_ != StateKind::PureVector)
    throw std::logic_error("JointState: not a pure vector");
  return vec_;
}

const Matrix& JointState::rho() const {
  if (kind_ != StateKind::DensityMatrix)
    throw std::logic_error("JointState: not a density matrix");
  return rho_;
}

Matrix JointState::to_density() const {
  if (kind_ == StateKind::DensityMatrix) return rho_;
  return vec_ * vec_.adjoint();
}

JointState JointState::tensor_qubit(const Eigen::Vector2cd& qubit) const {
  if (has_qubit_) throw std::logic_error("JointState: already has a qubit factor");
  const int d = cfg_.dim_fock;
  if (kind_ == StateKind::PureVector) {
    Vector out(2 * d);
    out.segment(0, d) = qubit(0) * vec_;
    out.segment(d, d) = qubit(1) * vec_;
    return JointState::pure(std::move(out), cfg_, true);
  }
  Eigen::Matrix2cd q = qubit * qubit.adjoint();
  Matrix out(2 * d, 2 * d);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block(i * d, j * d, d, d) = q(i, j) * rho_;
  return JointState::density(std::move(out), cfg_, true);
}

Matrix JointState::motional_density() const {
  if (!has_qubit_) return to_density();
  const int d = cfg_.dim_fock;
  if (kind_ == StateKind::PureVector) {
    Matrix out = Matrix::Zero(d, d);
    for (int q = 0; q < 2; ++q) {
      const auto seg = vec_.segment(q * d, d);
      out.noalias() += seg * seg.adjoint();
    }
    return out;
  }
  return rho_.block(0, 0, d, d) + rho_.block(d, d, d, d);
}

Eigen::Matrix2cd JointState::qubit_density() const {
  if (!has_qubit_) throw std::logic_error("JointState: no qubit factor");
  const int d = cfg_.dim_fock;
  Eigen::Matrix2cd out;
  if (kind_ == StateKind::PureVector) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Complex v = 0.0;
        for (int n = 0; n < d; ++n) v += vec_(i * d + n) * std::conj(vec_(j * d + n));
        out(i, j) = v;
      }
    return out;
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out(i, j) = rho_.block(i * d, j * d, d, d).trace();
  return out;
}

double JointState::buffer_population() const {
  const int d = cfg_.dim_fock;
  const int lo = cfg_.interior();
  double pop = 0.0;
  if (kind_ == StateKind::PureVector) {
    const int blocks = has_qubit_ ? 2 : 1;
    for (int q = 0; q < blocks; ++q)
      pop += vec_.segment(q * d + lo, d - lo).squaredNorm();
  } else {
    const int blocks = has_qubit_ ? 2 : 1;
    for (int q = 0; q < blocks; ++q)
      for (int n = lo; n < d; ++n) pop += std::real(rho_(q * d + n, q * d + n));
  }
  return pop;
}

void JointState::check_leakage(const std::string& where) const {
  const double pop = buffer_population();
  if (pop > cfg_.leakage_tol) throw LeakageError(where, pop, cfg_.leakage_tol);
}

double JointState::norm_defect() const {
  if (kind_ == StateKind::PureVector) return std::abs(vec_.norm() - 1.0);
  return std::abs(std::real(rho_.trace()) - 1.0) + std::abs(std::imag(rho_.trace()));
}

JointState vacuum_state(const HilbertConfig& cfg) { return fock_state(0, cfg); }

JointState fock_state(int n, const HilbertConfig& cfg) {
  cfg.validate();
  if (n < 0 || n >= cfg.dim_fock)
    throw std::invalid_argument("fock_state: level outside truncation");
  Vector psi = Vector::Zero(cfg.dim_fock);
  psi(n) = 1.0;
  return JointState::pure(std::move(psi), cfg, false);
}

JointState coherent_state(Complex alpha, const HilbertConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim_fock;
  Vector psi(d);
  // amplitude recursion c_{n+1} = c_n α/√(n+1) with c_0 = e^{−|α|²/2}
  Complex c = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < d; ++n) {
    psi(n) = c;
    c *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  const double nrm = psi.norm();
  psi /= nrm;
  JointState s = JointState::pure(std::move(psi), cfg, false);
  s.check_leakage("coherent_state(alpha=" + std::to_string(std::abs(alpha)) + ")");
  return s;
}

JointState thermal_state(double nbar, const HilbertConfig& cfg) {
  cfg.validate();
  if (nbar < 0) throw std::invalid_argument("thermal_state: nbar must be >= 0");
  const int d = cfg.dim_fock;
  Matrix rho = Matrix::Zero(d, d);
  if (nbar == 0.0) {
    rho(0, 0) = 1.0;
  } else {
    const double q = nbar / (1.0 + nbar);
    double p = 1.0 / (1.0 + nbar);
    double tot = 0.0;
    for (int n = 0; n < d; ++n) {
      rho(n, n) = p;
      tot += p;
      p *= q;
    }
    rho /= tot;  // renormalize after truncation
  }
  return JointState::density(std::move(rho), cfg, false);
}

Eigen::Vector2cd qubit_plus_y() {
  Eigen::Vector2cd v;
  v << 1.0 / std::sqrt(2.0), Complex(0, 1) / std::sqrt(2.0);
  return v;
}

Eigen::Vector2cd qubit_minus_y() {
  Eigen::Vector2cd v;
  v << 1.0 / std::sqrt(2.0), Complex(0, -1) / std::sqrt(2.0);
  return v;
}

HermitianGenerator::HermitianGenerator(const Matrix& h, double hermiticity_tol) {
  if (h.rows() != h.cols())
    throw std::invalid_argument("HermitianGenerator: matrix not square");
  const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (defect > hermiticity_tol)
    throw std::invalid_argument("HermitianGenerator: matrix not Hermitian (defect " +
                                std::to_string(defect) + ")");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (h + h.adjoint()));
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("HermitianGenerator: eigendecomposition failed");
  eigvecs_ = solver.eigenvectors();
  eigvals_ = solver.eigenvalues();
}

Matrix HermitianGenerator::unitary(double t, double sign) const {
  const int d = dim();
  if (t == 0.0) return Matrix::Identity(d, d);
  Vector phases(d);
  for (int i = 0; i < d; ++i) phases(i) = std::exp(kI * (sign * t * eigvals_(i)));
  return eigvecs_ * phases.asDiagonal() * eigvecs_.adjoint();
}

Vector HermitianGenerator::apply(double t, const Vector& psi, double sign) const {
  if (t == 0.0) return psi;
  Vector w = eigvecs_.adjoint() * psi;
  for (int i = 0; i < dim(); ++i) w(i) *= std::exp(kI * (sign * t * eigvals_(i)));
  return eigvecs_ * w;
}

Matrix evolve_unitary(const Matrix& h, double t, double sign) {
  if (sign != 1.0 && sign != -1.0)
    throw std::invalid_argument("evolve_unitary: sign must be +1 or -1");
  if (t == 0.0) return Matrix::Identity(h.rows(), h.cols());
  return HermitianGenerator(h).unitary(t, sign);
}

Matrix displacement(Complex beta, const HilbertConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(beta.real()) || !std::isfinite(beta.imag()))
    throw std::invalid_argument("displacement: beta must be finite");
  const int d = cfg.dim_fock;
  if (beta == Complex(0, 0)) return Matrix::Identity(d, d);
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  // β a† − β* a = i H with H Hermitian
  Matrix h = Complex(0, -1) * (beta * a.adjoint() - std::conj(beta) * a);
  return HermitianGenerator(h).unitary(1.0);
}

Matrix squeezing(double r, const HilbertConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(r)) throw std::invalid_argument("squeezing: r must be finite");
  const int d = cfg.dim_fock;
  if (r == 0.0) return Matrix::Identity(d, d);
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  Matrix a2 = a * a;
  Matrix h = Complex(0, -0.5) * (a2 - a2.adjoint());
  return HermitianGenerator(h).unitary(r);
}

Matrix rotation(double theta, const HilbertConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(theta)) throw std::invalid_argument("rotation: theta must be finite");
  const int d = cfg.dim_fock;
  Matrix u = Matrix::Zero(d, d);
  for (int n = 0; n < d; ++n) u(n, n) = std::exp(kI * (theta * n));
  return u;
}

}  // namespace iongate
