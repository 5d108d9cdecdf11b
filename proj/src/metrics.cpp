#include "iongate/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace iongate {

namespace {

bool is_pure_vec(const JointState& s) { return s.kind() == StateKind::PureVector; }

Matrix sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  RealVector lam = solver.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-9)
      throw std::invalid_argument("fidelity: matrix not positive semidefinite (eig " +
                                  std::to_string(lam(i)) + ")");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return solver.eigenvectors() * lam.asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace

double fidelity(const Matrix& rho, const Matrix& sigma) {
  if (rho.rows() != sigma.rows())
    throw std::invalid_argument("fidelity: dimension mismatch");
  Matrix sq = sqrt_psd(sigma);
  Matrix m = sq * rho * sq;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.adjoint()));
  double acc = 0.0;
  for (int i = 0; i < solver.eigenvalues().size(); ++i)
    acc += std::sqrt(std::max(solver.eigenvalues()(i), 0.0));
  return std::min(acc * acc, 1.0 + 1e-9);
}

double fidelity(const JointState& a, const JointState& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  if (is_pure_vec(a) && is_pure_vec(b)) {
    const Complex ov = a.vec().adjoint() * b.vec();
    return std::norm(ov);
  }
  if (is_pure_vec(a)) {
    const Complex v = (a.vec().adjoint() * (b.rho() * a.vec()))(0);
    return std::max(0.0, v.real());
  }
  if (is_pure_vec(b)) {
    const Complex v = (b.vec().adjoint() * (a.rho() * b.vec()))(0);
    return std::max(0.0, v.real());
  }
  return fidelity(a.rho(), b.rho());
}

// --- Wigner -----------------------------------------------------------------

namespace {

// Σ_{m,n} D(β)_{mn} A_{mn} with A_{mn} = (−1)^n ρ_{nm}, via the normalized
// associated-Laguerre recurrence along each diagonal of D(β),
//   D_{m+k,m} = e^{−x/2} (β^k/√k!) h_m,  h_{m+1} = [(2m+k+1−x)h_m − √(m(m+k))h_{m−1}]
//                                                   / √((m+1)(m+k+1)),  h_0 = 1.
// Half the Gaussian is folded into the h sequence to keep it in range at
// large |β|.
Complex displaced_parity_sum(const Matrix& rho, Complex beta) {
  const int d = static_cast<int>(rho.rows());
  const double x = std::norm(beta);
  const double quarter = std::exp(-0.25 * x);
  Complex total = 0.0;

  // k = 0 diagonal
  {
    double h_prev = 0.0, h = quarter;
    double sign = 1.0;
    Complex acc = 0.0;
    for (int m = 0; m < d; ++m) {
      acc += h * sign * rho(m, m);
      sign = -sign;
      const double h_next = ((2.0 * m + 1.0 - x) * h - m * h_prev) / (m + 1.0);
      h_prev = h;
      h = h_next;
    }
    total += acc;
  }

  Complex fk_lower = 1.0, fk_upper = 1.0;  // β^k/√k! and (−β*)^k/√k!
  for (int k = 1; k < d; ++k) {
    fk_lower *= beta / std::sqrt(static_cast<double>(k));
    fk_upper *= -std::conj(beta) / std::sqrt(static_cast<double>(k));
    double h_prev = 0.0, h = quarter;
    Complex acc_lo = 0.0, acc_hi = 0.0;
    double sign_col = 1.0;  // (−1)^n for n = column index
    for (int m = 0; m + k < d; ++m) {
      // lower wedge element D_{m+k,m}: pairs with A_{m+k,m} = (−1)^m ρ_{m,m+k}
      acc_lo += h * sign_col * rho(m, m + k);
      // upper wedge element D_{m,m+k}: pairs with A_{m,m+k} = (−1)^{m+k} ρ_{m+k,m}
      const double sign_row = (k % 2 == 0) ? sign_col : -sign_col;
      acc_hi += h * sign_row * rho(m + k, m);
      sign_col = -sign_col;
      const double h_next =
          ((2.0 * m + k + 1.0 - x) * h - std::sqrt(m * (m + k + 0.0)) * h_prev) /
          std::sqrt((m + 1.0) * (m + k + 1.0));
      h_prev = h;
      h = h_next;
    }
    total += fk_lower * acc_lo + fk_upper * acc_hi;
  }
  return total * quarter;
}

WignerGrid compute_grid(const Matrix& rho, double extent, int points) {
  WignerGrid g;
  g.q_axis = RealVector::LinSpaced(points, -extent, extent);
  g.p_axis = RealVector::LinSpaced(points, -extent, extent);
  g.dq = g.q_axis(1) - g.q_axis(0);
  g.dp = g.p_axis(1) - g.p_axis(0);
  g.values.resize(points, points);
  const double inv_pi = 1.0 / M_PI;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  parallel_for(points, [&](int iq) {
    const double q = g.q_axis(iq);
    for (int ip = 0; ip < points; ++ip) {
      const Complex alpha(q * inv_sqrt2, g.p_axis(ip) * inv_sqrt2);
      g.values(iq, ip) = inv_pi * displaced_parity_sum(rho, 2.0 * alpha).real();
    }
  });
  g.normalization_defect = std::abs(g.values.sum() * g.dq * g.dp - 1.0);
  return g;
}

double boundary_max(const WignerGrid& g) {
  const int n = static_cast<int>(g.q_axis.size());
  double m = 0.0;
  for (int i = 0; i < n; ++i) {
    m = std::max(m, std::abs(g.values(i, 0)));
    m = std::max(m, std::abs(g.values(i, n - 1)));
    m = std::max(m, std::abs(g.values(0, i)));
    m = std::max(m, std::abs(g.values(n - 1, i)));
  }
  return m;
}

}  // namespace

WignerGrid wigner(const Matrix& rho_motional, const WignerGridSpec& spec) {
  if (rho_motional.rows() != rho_motional.cols())
    throw std::invalid_argument("wigner: density matrix must be square");
  double extent = spec.extent;
  int points = spec.points;
  WignerGrid g = compute_grid(rho_motional, extent, points);
  if (spec.auto_extend) {
    const double step = 2.0 * spec.extent / (spec.points - 1);
    for (int it = 0; it < spec.max_extensions && boundary_max(g) > spec.boundary_tol; ++it) {
      extent = std::min(extent * 1.5, 20.0);  // recurrence range limit
      points = static_cast<int>(std::lround(2.0 * extent / step)) + 1;
      if (points > 1201) points = 1201;
      g = compute_grid(rho_motional, extent, points);
      if (extent >= 20.0) break;
    }
    if (boundary_max(g) > spec.boundary_tol * 100)
      throw std::runtime_error("wigner: state support exceeds the maximum grid extent");
  }
  if (g.normalization_defect > 0.02)
    throw std::runtime_error("wigner: grid normalization did not converge, defect " +
                             std::to_string(g.normalization_defect));
  return g;
}

WignerGrid wigner(const JointState& state, const WignerGridSpec& spec) {
  return wigner(state.motional_density(), spec);
}

double negativity_volume(const WignerGrid& grid) {
  double acc = 0.0;
  for (int i = 0; i < grid.values.rows(); ++i)
    for (int j = 0; j < grid.values.cols(); ++j) {
      const double w = grid.values(i, j);
      acc += std::abs(w) - w;
    }
  return 0.5 * acc * grid.dq * grid.dp;
}

namespace {

double bilinear(const WignerGrid& g, double q, double p) {
  const int nq = static_cast<int>(g.q_axis.size());
  const int np = static_cast<int>(g.p_axis.size());
  const double fq = (q - g.q_axis(0)) / g.dq;
  const double fp = (p - g.p_axis(0)) / g.dp;
  const int iq = static_cast<int>(std::floor(fq));
  const int ip = static_cast<int>(std::floor(fp));
  if (iq < 0 || ip < 0 || iq + 1 >= nq || ip + 1 >= np)
    throw std::runtime_error("wigner_cut: sample point outside the grid");
  const double uq = fq - iq, up = fp - ip;
  return g.values(iq, ip) * (1 - uq) * (1 - up) + g.values(iq + 1, ip) * uq * (1 - up) +
         g.values(iq, ip + 1) * (1 - uq) * up + g.values(iq + 1, ip + 1) * uq * up;
}

}  // namespace

LineCut wigner_cut(const WignerGrid& grid, const LineCutSpec& cut) {
  LineCut out;
  out.spec = cut;
  const double slope = cut.axis_p0 ? 0.0 : cut.slope;
  const double intercept = cut.axis_p0 ? 0.0 : cut.intercept;
  out.position.resize(cut.samples);
  out.w.resize(cut.samples);
  for (int i = 0; i < cut.samples; ++i) {
    const double q = cut.q_from + (cut.q_to - cut.q_from) * i / (cut.samples - 1.0);
    out.position[i] = q;
    out.w[i] = bilinear(grid, q, slope * q + intercept);
  }
  return out;
}

LineCut wigner_cut(const JointState& state, const LineCutSpec& cut,
                   const WignerGridSpec& grid_spec) {
  WignerGridSpec gs = grid_spec;
  const double slope = cut.axis_p0 ? 0.0 : cut.slope;
  const double intercept = cut.axis_p0 ? 0.0 : cut.intercept;
  double need = std::max(std::abs(cut.q_from), std::abs(cut.q_to));
  need = std::max(need, std::abs(slope * cut.q_from + intercept));
  need = std::max(need, std::abs(slope * cut.q_to + intercept));
  if (gs.extent < need * 1.05) {
    const double step = 2.0 * gs.extent / (gs.points - 1);
    gs.extent = need * 1.05;
    gs.points = static_cast<int>(std::lround(2.0 * gs.extent / step)) + 1;
  }
  return wigner_cut(wigner(state, gs), cut);
}

// --- nonlinear variance ------------------------------------------------------

namespace {

struct VarianceMoments {
  // Var(A + cB) = (b2−b1²)c² + (ab−2·a1·b1)c + (a2−a1²)
  double a1, a2, b1, b2, ab;
  double at(double c) const {
    return (b2 - b1 * b1) * c * c + (ab - 2.0 * a1 * b1) * c + (a2 - a1 * a1);
  }
};

VarianceMoments moments_for(const JointState& state, int j, TargetBasis basis) {
  if (j < 2) throw std::invalid_argument("nonlinear_variance: order must be >= 2");
  const HilbertConfig& cfg = state.hilbert();
  Matrix rho = state.motional_density();
  const double buffer_pop = [&] {
    double pop = 0.0;
    for (int n = cfg.interior(); n < cfg.dim_fock; ++n) pop += std::real(rho(n, n));
    return pop;
  }();
  if (buffer_pop > cfg.leakage_tol)
    throw LeakageError("nonlinear_variance moments", buffer_pop, cfg.leakage_tol);

  OperatorSet ops = make_operators(cfg);
  // basis P: O = X − jξ P^{j−1};  basis X: O = P + jξ X^{j−1}
  const Matrix& a_op = basis == TargetBasis::P ? ops.x_quad : ops.p_quad;
  const Matrix& quad = basis == TargetBasis::P ? ops.p_quad : ops.x_quad;
  Matrix b_op = Matrix::Identity(cfg.dim_fock, cfg.dim_fock);
  for (int p = 0; p < j - 1; ++p) b_op = b_op * quad;

  auto expval = [&](const Matrix& m) { return (rho * m).trace().real(); };
  VarianceMoments mm{};
  mm.a1 = expval(a_op);
  mm.a2 = expval(a_op * a_op);
  mm.b1 = expval(b_op);
  mm.b2 = expval(b_op * b_op);
  mm.ab = expval(a_op * b_op + b_op * a_op);
  return mm;
}

double xi_to_c(int j, TargetBasis basis, double xi) {
  return basis == TargetBasis::P ? -static_cast<double>(j) * xi : static_cast<double>(j) * xi;
}

}  // namespace

double nonlinear_variance(const JointState& state, int j, double xi, TargetBasis basis) {
  return moments_for(state, j, basis).at(xi_to_c(j, basis, xi));
}

VarianceScan minimize_variance(const JointState& state, int j, TargetBasis basis,
                               const VarianceScanOptions& opts) {
  VarianceMoments mm = moments_for(state, j, basis);
  double lo = opts.lo, hi = opts.hi;
  VarianceScan scan;
  scan.j = j;

  auto var_at_xi = [&](double xi) { return mm.at(xi_to_c(j, basis, xi)); };

  int widen = 0;
  while (true) {
    scan.xi_values.clear();
    scan.variances.clear();
    int best = 0;
    for (int i = 0; i < opts.coarse_points; ++i) {
      const double xi = lo + (hi - lo) * i / (opts.coarse_points - 1.0);
      scan.xi_values.push_back(xi);
      scan.variances.push_back(var_at_xi(xi));
      if (scan.variances.back() < scan.variances[best]) best = i;
    }
    if (best > 0 && best < opts.coarse_points - 1) {
      // golden-section refinement inside the bracketing triple
      double a = scan.xi_values[best - 1];
      double b = scan.xi_values[best + 1];
      const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
      double c = b - gr * (b - a);
      double d = a + gr * (b - a);
      double fc = var_at_xi(c), fd = var_at_xi(d);
      while (b - a > opts.tol) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - gr * (b - a);
          fc = var_at_xi(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + gr * (b - a);
          fd = var_at_xi(d);
        }
      }
      scan.xi_min = 0.5 * (a + b);
      scan.v_min = var_at_xi(scan.xi_min);
      scan.zeta_eff = std::abs(scan.xi_min);
      return scan;
    }
    if (++widen > opts.max_widenings)
      throw std::runtime_error("minimize_variance: minimum not bracketed after widening");
    const double span = hi - lo;
    lo -= span;
    hi += span;
  }
}

double qng_threshold(double xi) {
  const double c = std::cbrt(3.0 * xi);
  return 3.0 / std::pow(2.0, 5.0 / 3.0) * c * c;
}

double classical_threshold(Complex alpha) { return 5.0 + 36.0 * alpha.imag() * alpha.imag(); }

RealMatrix density_diff_map(const Matrix& rho_a, const Matrix& rho_b, int n_max_display) {
  if (rho_a.rows() != rho_b.rows())
    throw std::invalid_argument("density_diff_map: dimension mismatch");
  const int n = std::min<int>(n_max_display, static_cast<int>(rho_a.rows()));
  RealMatrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = std::abs(rho_a(i, j) - rho_b(i, j));
  return out;
}

double effective_cubicity_fit(const std::vector<std::pair<double, double>>& samples,
                              double eta, double zeta3) {
  if (samples.size() < 3)
    throw std::invalid_argument("effective_cubicity_fit: need at least 3 samples");
  if (zeta3 == 0.0) throw std::invalid_argument("effective_cubicity_fit: zeta3 must be nonzero");
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [alpha_abs, xi_min] : samples) {
    const double x = zeta3 * eta * eta * alpha_abs * alpha_abs;
    const double y = xi_min - zeta3;
    sxx += x * x;
    sxy += x * y;
  }
  if (sxx < 1e-30)
    throw std::invalid_argument("effective_cubicity_fit: degenerate design (all |alpha| ~ 0)");
  return sxy / sxx;
}

}  // namespace iongate
