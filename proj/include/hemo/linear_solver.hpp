#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Sparse>

namespace hemo {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct LinearSolverConfig {
  enum class Kind { Direct, Iterative };
  Kind kind = Kind::Direct;
  double tolerance = 1e-10;   ///< relative residual target of the iterative path
  int max_iterations = 2000;  ///< outer iterations of the iterative path
  int restart = 60;
  int inner_iterations = 20;  ///< BiCGSTAB sweeps used as preconditioner
};

class LinearSolveError : public std::runtime_error {
 public:
  LinearSolveError(const std::string& what, int iterations)
      : std::runtime_error(what), iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

struct LinearSolveResult {
  Eigen::VectorXd x;
  int iterations = 0;              ///< 1 for the direct path
  double relative_residual = 0.0;
};

/// Solves A x = b. The direct path uses a sparse LU factorization and
/// throws LinearSolveError on a singular matrix; the iterative path runs
/// restarted flexible GMRES preconditioned by a few Jacobi-preconditioned
/// BiCGSTAB iterations and throws when the tolerance is not met.
LinearSolveResult solve_linear(const SparseMatrix& a, const Eigen::VectorXd& b,
                               const LinearSolverConfig& config = {});

}  // namespace hemo
