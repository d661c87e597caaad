#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mde/covariance.hpp"
#include "mde/errors.hpp"
#include "mde/frame.hpp"
#include "mde/ordered_tree.hpp"

namespace mde {

using complex_t = std::complex<double>;

inline constexpr int kMaxCoefficientOrder = 12;

/// Memoization cache for val, keyed by canonical tree encoding. One cache
/// may be shared across trees; all subtree values end up in it.
using ValCache = std::map<std::string, MatrixXd>;

/// val(T_0) = I; val(G1 + G2) = val(G1) S(val(G2)) along the unique
/// last-child split. Production route for tree values.
inline const MatrixXd& val_recursive(const OrderedTree& g,
                                     const CovarianceOperator& S,
                                     ValCache& cache) {
  const std::string key = g.encode();
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  MatrixXd value;
  if (g.edge_count() == 0) {
    value = MatrixXd::Identity(S.dim(), S.dim());
  } else {
    auto [g1, g2] = g.decompose();
    const MatrixXd inner = S.apply(val_recursive(g2, S, cache));
    value = val_recursive(g1, S, cache) * inner;
  }
  return cache.emplace(key, std::move(value)).first->second;
}

inline MatrixXd val_recursive(const OrderedTree& g, const CovarianceOperator& S) {
  ValCache cache;
  return val_recursive(g, S, cache);
}

/// Literal sum over all labellings with fixed ends a, b of the product of
/// S-entries along tree edges. Exponential cost; oracle only.
inline double val_bruteforce(const OrderedTree& g, const CovarianceOperator& S,
                             int a, int b) {
  const int k = g.edge_count();
  const int N = S.dim();
  if (a < 0 || a >= N || b < 0 || b >= N)
    throw validation_error("val_bruteforce: index out of range");
  if (k == 0) return a == b ? 1.0 : 0.0;
  if (std::pow(double(N), 2 * k - 1) > 1e7)
    throw resource_limit_error("val_bruteforce: N^(2k-1) exceeds guard");

  const Frame f = build_frame(g);
  std::vector<EdgeFrameVertices> factors;
  for (int i = 0; i < f.edge_count(); ++i)
    if (f.edge_descends[i])
      factors.push_back(edge_frame_vertices(g, f, f.edge_child[i]));

  const int nv = f.vertex_count();  // 2k+1; vertices 0 and nv-1 are fixed
  std::vector<int> label(nv, 0);
  label[0] = a;
  label[nv - 1] = b;
  double total = 0;
  // Odometer over the 2k-1 free frame vertices.
  for (;;) {
    double prod = 1;
    for (const auto& p : factors)
      prod *= S.entry(label[p.before_descent], label[p.first_of_child],
                      label[p.last_of_child], label[p.after_ascent]);
    total += prod;
    int pos = 1;
    while (pos < nv - 1 && label[pos] == N - 1) label[pos++] = 0;
    if (pos == nv - 1) break;
    ++label[pos];
  }
  return total;
}

/// Sum of val over all trees with k edges, in canonical enumeration order.
/// Test oracle for the coefficient recursion.
inline MatrixXd tree_sum_coefficient(int k, const CovarianceOperator& S,
                                     ValCache& cache) {
  MatrixXd sum = MatrixXd::Zero(S.dim(), S.dim());
  for (const OrderedTree& g : enumerate_trees(k)) sum += val_recursive(g, S, cache);
  return sum;
}

/// C_0..C_K by the quadratic recursion C_k = sum_m C_{k-1-m} S(C_m).
inline std::vector<MatrixXd> coefficient_sequence(const CovarianceOperator& S,
                                                  int K) {
  if (K < 0) throw validation_error("coefficient_sequence: K must be nonnegative");
  if (K > kMaxCoefficientOrder)
    throw resource_limit_error("coefficient_sequence: K exceeds guard " +
                               std::to_string(kMaxCoefficientOrder));
  std::vector<MatrixXd> C;
  C.push_back(MatrixXd::Identity(S.dim(), S.dim()));
  std::vector<MatrixXd> SC;  // S(C_m), cached across k
  for (int k = 1; k <= K; ++k) {
    SC.push_back(S.apply(C[k - 1]));
    MatrixXd next = MatrixXd::Zero(S.dim(), S.dim());
    for (int m = 0; m < k; ++m) next += C[k - 1 - m] * SC[m];
    C.push_back(std::move(next));
  }
  return C;
}

/// Constants controlling the convergence radius and the decay certificates.
struct DecayConstants {
  double l = 0;
  double eps = 0;
  double c_l_eps = 0;   // l e^{1/l} 2(1+eps)/eps
  double c = 0;         // N ||S||_l
  double radius = 0;    // 8 c_l_eps^2 c; series converges for |z|^2 above it
};

inline DecayConstants decay_constants(double l, double eps,
                                      const CovarianceOperator& S) {
  if (l <= 0 || eps <= 0)
    throw validation_error("decay_constants: l and eps must be positive");
  DecayConstants d;
  d.l = l;
  d.eps = eps;
  d.c_l_eps = l * std::exp(1.0 / l) * 2.0 * (1.0 + eps) / eps;
  const double op_norm = S.operator_l_norm(l);
  if (!std::isfinite(op_norm))
    throw numerical_error("decay_constants: operator l-norm is not finite");
  d.c = S.dim() * op_norm;
  d.radius = 8.0 * d.c_l_eps * d.c_l_eps * d.c;
  return d;
}

struct NormCertificate {
  double measured = 0;  // ||C_k||_{(1+eps)l}
  double bound = 0;     // N^k 8^k c(l,eps)^{2k} ||S||_l^k
};

/// Coefficient matrices C_0..C_K with their decay certificates, computed
/// for one operator and one (l, eps) pair.
struct LaurentCoefficients {
  std::uint64_t fingerprint = 0;
  int N = 0;
  int K_max = 0;
  DecayConstants constants;
  std::vector<MatrixXd> coeffs;
  std::vector<NormCertificate> certificates;
};

inline LaurentCoefficients compute_coefficients(const CovarianceOperator& S,
                                                int K, double l, double eps) {
  LaurentCoefficients lc;
  lc.fingerprint = S.fingerprint();
  lc.N = S.dim();
  lc.K_max = K;
  lc.constants = decay_constants(l, eps, S);
  lc.coeffs = coefficient_sequence(S, K);
  const double per_order = lc.constants.radius;  // bound_k = radius^k
  double bound = 1;
  for (int k = 0; k <= K; ++k) {
    NormCertificate cert;
    cert.measured = matrix_l_norm(lc.coeffs[k], (1.0 + eps) * l);
    cert.bound = bound;
    lc.certificates.push_back(cert);
    bound *= per_order;
  }
  return lc;
}

/// Truncated Laurent evaluation M(z) = -sum_{k<=K} C_k z^{-2k-1} with a
/// bound on the dropped tail.
struct LaurentEvaluation {
  MatrixXcd M;
  double tail_bound = std::numeric_limits<double>::infinity();
  bool tail_certified = false;   // true when the geometric certificate applies
  bool divergence_warning = false;
};

/// Tail policy: inside the certified radius (|z|^2 > radius) the tail is the
/// geometric sum of the certificate bounds. Below the radius the
/// certificates diverge, so the tail is extrapolated from the measured
/// coefficient norms with a 1.5x growth-ratio margin; that estimate is
/// reported uncertified.
inline LaurentEvaluation laurent_M(const LaurentCoefficients& lc, complex_t z,
                                   int K) {
  if (z.imag() <= 0)
    throw validation_error("laurent_M: z must lie in the upper half plane");
  if (K < 0 || K > lc.K_max)
    throw validation_error("laurent_M: K out of range for these coefficients");
  LaurentEvaluation ev;
  const double az2 = std::norm(z);
  const complex_t inv_z2 = 1.0 / (z * z);
  complex_t scale = -1.0 / z;
  ev.M = MatrixXcd::Zero(lc.N, lc.N);
  double prev_term = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= K; ++k) {
    ev.M += scale * lc.coeffs[k];
    const double term = lc.certificates[k].measured * std::abs(scale);
    if (k > 0 && term >= prev_term && term > 0) ev.divergence_warning = true;
    prev_term = term;
    scale *= inv_z2;
  }

  const double radius = lc.constants.radius;
  if (az2 > radius) {
    const double q = radius / az2;
    double head = 1;
    for (int k = 0; k <= K; ++k) head *= q;  // q^{K+1}
    ev.tail_bound = head / ((1.0 - q) * std::abs(z));
    ev.tail_certified = true;
  } else if (K >= 1) {
    double ratio = 0;
    for (int k = std::max(1, K - 3); k <= K; ++k)
      if (lc.certificates[k - 1].measured > 0)
        ratio = std::max(ratio, lc.certificates[k].measured /
                                    lc.certificates[k - 1].measured);
    const double beta = 1.5 * ratio;
    if (beta < az2 && lc.certificates[K].measured > 0) {
      const double q = beta / az2;
      ev.tail_bound = lc.certificates[K].measured * q / (1.0 - q) *
                      std::pow(az2, -(2.0 * K + 1.0) / 2.0);
    } else {
      ev.divergence_warning = true;
    }
  }
  return ev;
}

/// Residual of a candidate solution: ||M^{-1} + z I + S(M)||_max.
inline double mde_residual(const CovarianceOperator& S, const MatrixXcd& M,
                           complex_t z) {
  const MatrixXcd lhs = M.inverse() +
                        z * MatrixXcd::Identity(S.dim(), S.dim()) + S.apply(M);
  return lhs.cwiseAbs().maxCoeff();
}

/// Exact chain sums by dynamic programming over the index line.
/// path_sum(l, q, a, b) = sum over x_1..x_{q-1} of
/// e^{-(|a-x_1|+...+|x_{q-1}-b|)/l}; q = 0 gives the Kronecker delta.
inline double path_sum(double l, int q, int a, int b, int N) {
  if (l <= 0) throw validation_error("path_sum: l must be positive");
  if (q < 0 || a < 0 || a >= N || b < 0 || b >= N)
    throw validation_error("path_sum: bad arguments");
  if (q == 0) return a == b ? 1.0 : 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(N);
  v[b] = 1.0;
  for (int step = 0; step < q; ++step) {
    Eigen::VectorXd next(N);
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int y = 0; y < N; ++y) acc += std::exp(-std::abs(x - y) / l) * v[y];
      next[x] = acc;
    }
    v = std::move(next);
  }
  return v[a];
}

/// cyc_sum(l, k) = sum over x_1..x_k of e^{-(|x_1-x_2|+...+|x_k-x_1|)/l}
/// = Tr K^k for the kernel K_xy = e^{-|x-y|/l}.
inline double cyc_sum(double l, int k, int N) {
  if (l <= 0) throw validation_error("cyc_sum: l must be positive");
  if (k < 1) throw validation_error("cyc_sum: k must be positive");
  MatrixXd K(N, N);
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) K(x, y) = std::exp(-std::abs(x - y) / l);
  MatrixXd P = K;
  for (int i = 1; i < k; ++i) P = P * K;
  return P.trace();
}

/// Total label displacement of a summation graph under a labelling of the
/// frame vertices: sum over graph edges of |label(p) - label(q)|.
inline int summation_weight(const SummationGraph& sg,
                            const std::vector<int>& labels) {
  int s = 0;
  for (const auto& [p, q] : sg.edges) s += std::abs(labels[p] - labels[q]);
  return s;
}

/// Off-diagonal decay report for one matrix: the (1+eps)l-norm, the
/// per-distance max-entry profile, and a log-linear slope fit against the
/// reference -1/((1+eps)l).
struct DecayReport {
  double norm = 0;
  std::vector<double> profile;  // profile[d] = max_{|x-y|=d} |M_xy|
  double fitted_slope = 0;
  double reference_slope = 0;
  bool slope_defined = false;
};

template <typename Derived>
DecayReport verify_offdiagonal_decay(const Eigen::MatrixBase<Derived>& M,
                                     double l, double eps) {
  DecayReport rep;
  const int N = static_cast<int>(M.rows());
  rep.norm = matrix_l_norm(M, (1.0 + eps) * l);
  rep.reference_slope = -1.0 / ((1.0 + eps) * l);
  rep.profile.assign(N, 0.0);
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y)
      rep.profile[std::abs(x - y)] =
          std::max(rep.profile[std::abs(x - y)], std::abs(M(x, y)));
  // Least-squares slope of log(profile) over distances with nonzero entries.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int d = 0; d < N; ++d) {
    if (rep.profile[d] <= 0) continue;
    const double x = d, y = std::log(rep.profile[d]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n >= 2 && sxx * n - sx * sx > 0) {
    rep.fitted_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.slope_defined = true;
  }
  return rep;
}

namespace detail {

inline void write_matrix_file(const std::filesystem::path& p, const MatrixXd& M) {
  std::ofstream os(p);
  if (!os) throw validation_error("cannot open " + p.string() + " for writing");
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      os << format_double(M(r, c)) << (c + 1 == M.cols() ? '\n' : ' ');
  }
}

inline MatrixXd read_matrix_file(const std::filesystem::path& p, int rows, int cols) {
  std::ifstream is(p);
  if (!is) throw validation_error("cannot open " + p.string());
  MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!(is >> M(r, c))) throw parse_error("truncated matrix file " + p.string());
  return M;
}

}  // namespace detail

/// Coefficient directory layout: manifest.txt + one matrix file per order.
inline void write_coefficients(const std::filesystem::path& dir,
                               const LaurentCoefficients& lc) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "manifest.txt");
  if (!os) throw validation_error("cannot write coefficient manifest");
  char fp[32];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(lc.fingerprint));
  os << "laurent-coefficients v1\n";
  os << "fingerprint " << fp << "\n";
  os << "N " << lc.N << "\n";
  os << "K_max " << lc.K_max << "\n";
  os << "l " << detail::format_double(lc.constants.l) << "\n";
  os << "eps " << detail::format_double(lc.constants.eps) << "\n";
  os << "c_l_eps " << detail::format_double(lc.constants.c_l_eps) << "\n";
  os << "c " << detail::format_double(lc.constants.c) << "\n";
  os << "radius " << detail::format_double(lc.constants.radius) << "\n";
  os << "certificates\n";
  for (int k = 0; k <= lc.K_max; ++k)
    os << k << " " << detail::format_double(lc.certificates[k].measured) << " "
       << detail::format_double(lc.certificates[k].bound) << "\n";
  for (int k = 0; k <= lc.K_max; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "C_%02d.txt", k);
    detail::write_matrix_file(dir / name, lc.coeffs[k]);
  }
}

inline LaurentCoefficients read_coefficients(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.txt");
  if (!is) throw validation_error("cannot open coefficient manifest in " + dir.string());
  LaurentCoefficients lc;
  std::string word, line;
  if (!std::getline(is, line) || line != "laurent-coefficients v1")
    throw parse_error("coefficient manifest: bad header");
  std::string fp_hex;
  is >> word >> fp_hex >> word >> lc.N >> word >> lc.K_max;
  is >> word >> lc.constants.l >> word >> lc.constants.eps;
  is >> word >> lc.constants.c_l_eps >> word >> lc.constants.c;
  is >> word >> lc.constants.radius;
  is >> word;  // "certificates"
  if (!is || word != "certificates")
    throw parse_error("coefficient manifest: malformed");
  lc.fingerprint = std::stoull(fp_hex, nullptr, 16);
  lc.certificates.resize(lc.K_max + 1);
  for (int k = 0; k <= lc.K_max; ++k) {
    int kk;
    if (!(is >> kk >> lc.certificates[k].measured >> lc.certificates[k].bound) ||
        kk != k)
      throw parse_error("coefficient manifest: bad certificate row");
  }
  for (int k = 0; k <= lc.K_max; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "C_%02d.txt", k);
    lc.coeffs.push_back(detail::read_matrix_file(dir / name, lc.N, lc.N));
  }
  return lc;
}

}  // namespace mde
