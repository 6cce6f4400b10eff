#include "hemo/linear_solver.hpp"

#include <cmath>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/UmfPackSupport>

namespace hemo {

namespace {

LinearSolveResult solve_direct(const SparseMatrix& a, const Eigen::VectorXd& b) {
  // Entries zeroed by boundary-condition elimination stay in the pattern;
  // dropping them before factorization greatly reduces fill.
  SparseMatrix pruned = a;
  pruned.prune(0.0);
  Eigen::UmfPackLU<SparseMatrix> lu;
  lu.compute(pruned);
  if (lu.info() != Eigen::Success) {
    throw LinearSolveError("sparse LU factorization failed (singular matrix?)", 0);
  }
  LinearSolveResult r;
  r.x = lu.solve(b);
  if (lu.info() != Eigen::Success || !r.x.allFinite()) {
    throw LinearSolveError("sparse LU solve failed", 1);
  }
  r.iterations = 1;
  const double bn = b.norm();
  r.relative_residual = bn > 0 ? (a * r.x - b).norm() / bn : (a * r.x).norm();
  return r;
}

LinearSolveResult solve_fgmres(const SparseMatrix& a, const Eigen::VectorXd& b,
                               const LinearSolverConfig& cfg) {
  using Eigen::VectorXd;
  const Eigen::Index n = b.size();
  LinearSolveResult res;
  res.x = VectorXd::Zero(n);
  const double bn = b.norm();
  if (bn == 0.0) return res;

  Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> inner;
  inner.setMaxIterations(cfg.inner_iterations);
  inner.setTolerance(1e-3);
  inner.compute(a);
  auto precondition = [&](const VectorXd& v) {
    VectorXd z = inner.solve(v);
    if (!z.allFinite()) z = v;
    return z;
  };

  const int m = cfg.restart;
  std::vector<VectorXd> V(m + 1), Z(m);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  VectorXd cs(m), sn(m), g(m + 1);
  int total = 0;
  VectorXd r = b;
  double beta = r.norm();
  while (total < cfg.max_iterations) {
    V[0] = r / beta;
    g.setZero();
    g[0] = beta;
    int k = 0;
    while (k < m && total < cfg.max_iterations) {
      Z[k] = precondition(V[k]);
      VectorXd w = a * Z[k];
      for (int i = 0; i <= k; ++i) {
        H(i, k) = w.dot(V[i]);
        w -= H(i, k) * V[i];
      }
      const double h_next = w.norm();
      H(k + 1, k) = h_next;
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double d = std::hypot(H(k, k), H(k + 1, k));
      if (d == 0.0) throw LinearSolveError("FGMRES breakdown", total);
      cs[k] = H(k, k) / d;
      sn[k] = H(k + 1, k) / d;
      H(k, k) = d;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++k;
      ++total;
      if (std::abs(g[k]) <= cfg.tolerance * bn || h_next == 0.0) break;
      V[k] = w / h_next;
    }
    const Eigen::MatrixXd Hk = H.topLeftCorner(k, k);
    const VectorXd y = Hk.triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) res.x += y[i] * Z[i];
    r = b - a * res.x;
    beta = r.norm();
    res.iterations = total;
    res.relative_residual = beta / bn;
    if (res.relative_residual <= cfg.tolerance) return res;
  }
  throw LinearSolveError("FGMRES did not converge: relative residual " +
                             std::to_string(res.relative_residual) + " after " +
                             std::to_string(total) + " iterations",
                         total);
}

}  // namespace

LinearSolveResult solve_linear(const SparseMatrix& a, const Eigen::VectorXd& b,
                               const LinearSolverConfig& config) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw std::invalid_argument("solve_linear: dimension mismatch");
  }
  if (config.kind == LinearSolverConfig::Kind::Direct) return solve_direct(a, b);
  return solve_fgmres(a, b, config);
}

}  // namespace hemo
