#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "mde/covariance.hpp"
#include "mde/errors.hpp"
#include "mde/laurent.hpp"

namespace mde {

struct SolverConfig {
  double tolerance = 1e-12;   // max-norm of iterate difference
  int max_iterations = 100000;
  double damping = 0.5;       // in (0, 1]

  void validate() const {
    if (tolerance <= 0) throw validation_error("solver: tolerance must be positive");
    if (damping <= 0 || damping > 1)
      throw validation_error("solver: damping must lie in (0, 1]");
    if (max_iterations < 1)
      throw validation_error("solver: max_iterations must be positive");
  }
};

struct MdeSolution {
  complex_t z;
  MatrixXcd M;
  int iterations_used = 0;
  double residual = 0;      // ||M^{-1} + z I + S(M)||_max
  double im_min_eig = 0;    // smallest eigenvalue of (M - M*) / 2i
  bool condition_warning = false;
};

namespace detail {

inline double smallest_imag_eigenvalue(const MatrixXcd& M) {
  const MatrixXcd imag_part = (M - M.adjoint()) / complex_t(0, 2);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(imag_part,
                                              Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Damped fixed-point iteration M <- (1-a) M + a (-(z I + S(M))^{-1}),
/// started from -I/z. The iteration scheme is this solver's choice; the
/// equation only pins down the fixed point. Singular updates trigger
/// damping halving, up to 10 rejections.
inline MdeSolution solve_mde(const CovarianceOperator& S, complex_t z,
                             const SolverConfig& cfg = {},
                             const MatrixXcd* start = nullptr) {
  cfg.validate();
  if (z.imag() <= 0)
    throw validation_error("solve_mde: z must lie in the upper half plane");
  const int N = S.dim();
  const MatrixXcd eye = MatrixXcd::Identity(N, N);
  MatrixXcd M = start ? *start : MatrixXcd(-eye / z);
  double alpha = cfg.damping;
  int rejections = 0;
  MdeSolution sol;
  sol.z = z;

  std::vector<double> residual_history;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const MatrixXcd update = z * eye + S.apply(M);
    Eigen::PartialPivLU<MatrixXcd> lu(update);
    const MatrixXcd inv = lu.inverse();
    const double inv_norm = inv.cwiseAbs().maxCoeff();
    if (!std::isfinite(inv_norm) || inv_norm > 1e15) {
      if (++rejections > 10)
        throw numerical_error("solve_mde: singular update matrix after 10 rejections");
      alpha *= 0.5;
      continue;
    }
    const MatrixXcd next = (1.0 - alpha) * M - alpha * inv;
    const double diff = (next - M).cwiseAbs().maxCoeff();
    M = next;
    if (diff < cfg.tolerance) {
      sol.M = M;
      sol.iterations_used = it;
      sol.residual = mde_residual(S, M, z);
      sol.im_min_eig = detail::smallest_imag_eigenvalue(M);
      Eigen::JacobiSVD<MatrixXcd> svd(M);
      const double cond = svd.singularValues()(0) /
                          svd.singularValues()(svd.singularValues().size() - 1);
      sol.condition_warning = cond > 1e12;
      return sol;
    }
    if (it % 100 == 0) residual_history.push_back(diff);
  }
  std::string diag = "solve_mde: no convergence in " +
                     std::to_string(cfg.max_iterations) + " iterations; recent steps:";
  const std::size_t tail = residual_history.size() > 5 ? residual_history.size() - 5 : 0;
  for (std::size_t i = tail; i < residual_history.size(); ++i)
    diag += " " + std::to_string(residual_history[i]);
  throw numerical_error(diag);
}

/// Vector Dyson equation -m_x^{-1} = z + [S m]_x for a nonnegative variance
/// matrix, solved by the same damped iteration.
inline Eigen::VectorXcd vector_dyson_solve(const MatrixXd& variances, complex_t z,
                                           const SolverConfig& cfg = {}) {
  cfg.validate();
  if (z.imag() <= 0)
    throw validation_error("vector_dyson_solve: z must lie in the upper half plane");
  if (variances.rows() != variances.cols() || variances.minCoeff() < 0)
    throw validation_error("vector_dyson_solve: variance matrix must be square and entrywise nonnegative");
  const int N = static_cast<int>(variances.rows());
  const MatrixXcd V = variances.cast<complex_t>();
  Eigen::VectorXcd m = Eigen::VectorXcd::Constant(N, -1.0 / z);
  double alpha = cfg.damping;
  int rejections = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXcd denom = Eigen::VectorXcd::Constant(N, z) + V * m;
    if (denom.cwiseAbs().minCoeff() < 1e-15) {
      if (++rejections > 10)
        throw numerical_error("vector_dyson_solve: vanishing denominator after 10 rejections");
      alpha *= 0.5;
      continue;
    }
    const Eigen::VectorXcd next = (1.0 - alpha) * m - alpha * denom.cwiseInverse();
    const double diff = (next - m).cwiseAbs().maxCoeff();
    m = next;
    if (diff < cfg.tolerance) return m;
  }
  throw numerical_error("vector_dyson_solve: no convergence in " +
                        std::to_string(cfg.max_iterations) + " iterations");
}

/// Pointwise Stieltjes-property report for a family of solutions:
/// Im <M(z)> > 0 and |<M(z)>| <= 1 / Im z at every z.
struct StieltjesCheckEntry {
  complex_t z;
  complex_t trace_avg;
  bool positive_imag = false;
  bool bounded = false;
};

struct StieltjesReport {
  std::vector<StieltjesCheckEntry> entries;
  int violations = 0;
};

inline StieltjesReport stieltjes_checks(
    const std::vector<std::pair<complex_t, MatrixXcd>>& solutions) {
  StieltjesReport rep;
  for (const auto& [z, M] : solutions) {
    if (z.imag() <= 0)
      throw validation_error("stieltjes_checks: z must lie in the upper half plane");
    StieltjesCheckEntry e;
    e.z = z;
    e.trace_avg = M.trace() / static_cast<double>(M.rows());
    e.positive_imag = e.trace_avg.imag() > 0;
    e.bounded = std::abs(e.trace_avg) <= 1.0 / z.imag() + 1e-12;
    if (!e.positive_imag || !e.bounded) ++rep.violations;
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace mde
