#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace iongate {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Truncated Fock space with a reserved top band used only to detect
/// population escaping the trusted interior.
struct HilbertConfig {
  int dim_fock = 120;
  int leakage_buffer = 20;
  double leakage_tol = 1e-6;

  int interior() const { return dim_fock - leakage_buffer; }

  void validate() const {
    if (dim_fock < 16)
      throw std::invalid_argument("HilbertConfig: dim_fock must be >= 16, got " +
                                  std::to_string(dim_fock));
    if (leakage_buffer < 1 || leakage_buffer >= dim_fock / 2)
      throw std::invalid_argument("HilbertConfig: leakage_buffer must be in [1, dim_fock/2)");
    if (!(leakage_tol > 0.0))
      throw std::invalid_argument("HilbertConfig: leakage_tol must be positive");
  }

  bool operator==(const HilbertConfig& o) const {
    return dim_fock == o.dim_fock && leakage_buffer == o.leakage_buffer &&
           leakage_tol == o.leakage_tol;
  }
};

/// Population leaked into the truncation buffer beyond tolerance.
class LeakageError : public std::runtime_error {
 public:
  LeakageError(const std::string& where, double population, double tol)
      : std::runtime_error("truncation leakage in " + where + ": buffer population " +
                           std::to_string(population) + " exceeds tolerance " +
                           std::to_string(tol)),
        population_(population) {}
  double population() const { return population_; }

 private:
  double population_;
};

}  // namespace iongate
