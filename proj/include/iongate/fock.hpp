#pragma once

#include <optional>

#include "iongate/types.hpp"

namespace iongate {

/// Immutable bundle of the ladder/quadrature matrices for one truncation
/// dimension plus the 2x2 qubit operators. Safe to share across threads.
struct OperatorSet {
  HilbertConfig cfg;
  Matrix a;       // annihilation
  Matrix a_dag;   // creation
  Matrix n_op;    // a† a
  Matrix x_quad;  // (a + a†)/√2
  Matrix p_quad;  // (a − a†)/(i√2)
  Matrix osc_id;
  Eigen::Matrix2cd sigma_y;
  Eigen::Matrix2cd sigma_plus;
  Eigen::Matrix2cd qubit_id;
};

OperatorSet make_operators(const HilbertConfig& cfg);

enum class StateKind { PureVector, DensityMatrix };

/// Oscillator or qubit⊗oscillator state. Pure states are stored as vectors,
/// mixed ones as density matrices; value semantics throughout.
class JointState {
 public:
  static JointState pure(Vector psi, HilbertConfig cfg, bool has_qubit);
  static JointState density(Matrix rho, HilbertConfig cfg, bool has_qubit);

  StateKind kind() const { return kind_; }
  bool has_qubit() const { return has_qubit_; }
  const HilbertConfig& hilbert() const { return cfg_; }
  int dim() const { return has_qubit_ ? 2 * cfg_.dim_fock : cfg_.dim_fock; }

  const Vector& vec() const;
  const Matrix& rho() const;

  /// Density form regardless of kind (pure states promoted).
  Matrix to_density() const;

  /// Attach a qubit factor (qubit index is the slow one: idx = q*dim + n).
  JointState tensor_qubit(const Eigen::Vector2cd& qubit) const;

  /// Trace out the qubit (requires has_qubit).
  Matrix motional_density() const;
  /// Trace out the oscillator (requires has_qubit).
  Eigen::Matrix2cd qubit_density() const;

  /// Population residing in the top leakage_buffer Fock levels.
  double buffer_population() const;
  void check_leakage(const std::string& where) const;

  double norm_defect() const;  // |norm−1| or |trace−1|

 private:
  JointState() = default;
  StateKind kind_ = StateKind::PureVector;
  bool has_qubit_ = false;
  HilbertConfig cfg_;
  Vector vec_;
  Matrix rho_;
};

JointState vacuum_state(const HilbertConfig& cfg);
JointState fock_state(int n, const HilbertConfig& cfg);
JointState coherent_state(Complex alpha, const HilbertConfig& cfg);
JointState thermal_state(double nbar, const HilbertConfig& cfg);

/// Qubit kets in the σ_y eigenbasis, |±⟩_y = (|g⟩ ± i|e⟩)/√2.
Eigen::Vector2cd qubit_plus_y();
Eigen::Vector2cd qubit_minus_y();

/// Hermitian generator with a cached eigendecomposition so exp(±i t H) and
/// its action on states cost one diagonal phase plus two dense products.
class HermitianGenerator {
 public:
  HermitianGenerator() = default;
  explicit HermitianGenerator(const Matrix& h, double hermiticity_tol = 1e-9);

  int dim() const { return static_cast<int>(eigvals_.size()); }

  /// exp(sign * i t H); sign must be ±1.
  Matrix unitary(double t, double sign = +1.0) const;
  Vector apply(double t, const Vector& psi, double sign = +1.0) const;

  const RealVector& eigenvalues() const { return eigvals_; }
  const Matrix& eigenvectors() const { return eigvecs_; }

 private:
  Matrix eigvecs_;
  RealVector eigvals_;
};

/// exp(sign·i t H) of a Hermitian H via eigendecomposition. t = 0 returns the
/// exact identity. Non-Hermitian input is rejected.
Matrix evolve_unitary(const Matrix& h, double t, double sign = +1.0);

/// D(β) = exp(β a† − β* a) on the truncated space (unitary on the interior).
Matrix displacement(Complex beta, const HilbertConfig& cfg);
/// S(r) = exp[r (a² − a†²)/2]; squeezes Var(X) by e^{−2r}.
Matrix squeezing(double r, const HilbertConfig& cfg);
/// R(θ) = exp(i θ n̂).
Matrix rotation(double theta, const HilbertConfig& cfg);

}  // namespace iongate
