#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "mde/errors.hpp"

namespace mde {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

/// Symmetrized distance between index pairs (x,y) and (z,t):
/// min(|x-z|+|y-t|, |x-t|+|y-z|). Indices are 0-based throughout.
inline int rho(int x, int y, int z, int t) {
  return std::min(std::abs(x - z) + std::abs(y - t),
                  std::abs(x - t) + std::abs(y - z));
}

/// l-norm of a matrix: max over entries of e^{|x-y|/l} |R_xy|.
template <typename Derived>
double matrix_l_norm(const Eigen::MatrixBase<Derived>& R, double l) {
  if (l <= 0) throw validation_error("matrix_l_norm: l must be positive");
  double best = 0;
  for (Eigen::Index x = 0; x < R.rows(); ++x)
    for (Eigen::Index y = 0; y < R.cols(); ++y)
      best = std::max(best, std::exp(std::abs(double(x - y)) / l) *
                                std::abs(R(x, y)));
  return best;
}

/// Exponential-decay kernel A_ij = kappa e^{-|i-j|/kernel_scale}, with kappa
/// chosen so that max_x (A^2)_xx = amplitude. Boundary rows carry smaller
/// variance; that edge effect is accepted.
inline MatrixXd decay_kernel(int N, double kernel_scale, double amplitude) {
  if (N < 1) throw validation_error("decay_kernel: N must be positive");
  if (kernel_scale <= 0 || amplitude <= 0)
    throw validation_error("decay_kernel: kernel_scale and amplitude must be positive");
  MatrixXd A(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      A(i, j) = std::exp(-std::abs(i - j) / kernel_scale);
  const double max_diag = (A * A).diagonal().maxCoeff();
  A *= std::sqrt(amplitude / max_diag);
  return A;
}

/// Covariance super-operator S acting on N x N matrices, with scalar
/// entries S_{xy,zt}. Shipped kinds:
///   wigner    S(R) = (Tr R / N) I
///   filtered  exact covariance of W = A G A (see sampler), stored via the
///             kernel B = A^2: S_{xy,zt} = (B_xz B_yt + B_xt B_yz)/N
///   dense     explicit N^4 table
/// Immutable after construction; apply is pure.
class CovarianceOperator {
 public:
  enum class Kind { wigner, filtered, dense };

  static CovarianceOperator wigner(int N) {
    if (N < 1) throw validation_error("wigner: N must be positive");
    CovarianceOperator op;
    op.kind_ = Kind::wigner;
    op.dim_ = N;
    return op;
  }

  static CovarianceOperator filtered_gaussian(int N, double kernel_scale,
                                              double amplitude) {
    CovarianceOperator op;
    op.kind_ = Kind::filtered;
    op.dim_ = N;
    op.kernel_scale_ = kernel_scale;
    op.amplitude_ = amplitude;
    op.kernel_ = decay_kernel(N, kernel_scale, amplitude);
    op.squared_kernel_ = op.kernel_ * op.kernel_;
    return op;
  }

  static CovarianceOperator dense(int N, std::vector<double> entries) {
    if (entries.size() != static_cast<std::size_t>(N) * N * N * N)
      throw validation_error("dense: entry table size must be N^4");
    CovarianceOperator op;
    op.kind_ = Kind::dense;
    op.dim_ = N;
    op.table_ = std::move(entries);
    return op;
  }

  /// Diagonal embedding of a variance matrix V: S_{xy,zt} = d_{xt} d_{yz} V_xy,
  /// so the MDE reduces to the vector Dyson equation.
  static CovarianceOperator diagonal_variance(const MatrixXd& V) {
    const int N = static_cast<int>(V.rows());
    std::vector<double> tab(static_cast<std::size_t>(N) * N * N * N, 0.0);
    for (int x = 0; x < N; ++x)
      for (int y = 0; y < N; ++y)
        tab[index(N, x, y, y, x)] = V(x, y);
    return dense(N, std::move(tab));
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double kernel_scale() const { return kernel_scale_; }
  double amplitude() const { return amplitude_; }
  const MatrixXd& kernel() const { return kernel_; }

  double entry(int x, int y, int z, int t) const {
    check_index(x);
    check_index(y);
    check_index(z);
    check_index(t);
    switch (kind_) {
      case Kind::wigner:
        return (x == t && y == z) ? 1.0 / dim_ : 0.0;
      case Kind::filtered:
        return (squared_kernel_(x, z) * squared_kernel_(y, t) +
                squared_kernel_(x, t) * squared_kernel_(y, z)) /
               dim_;
      case Kind::dense:
        return table_[index(dim_, x, y, z, t)];
    }
    return 0.0;  // unreachable
  }

  /// [S(R)]_xt = sum_{y,z} S_{xy,zt} R_yz.
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> apply(
      const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& R) const {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (R.rows() != dim_ || R.cols() != dim_)
      throw validation_error("apply: matrix dimension mismatch");
    switch (kind_) {
      case Kind::wigner: {
        Mat out = Mat::Identity(dim_, dim_);
        out *= R.trace() / static_cast<double>(dim_);
        return out;
      }
      case Kind::filtered: {
        const Scalar weighted =
            (squared_kernel_.template cast<Scalar>().array() * R.array()).sum();
        Mat out = squared_kernel_.template cast<Scalar>() * R.transpose() *
                      squared_kernel_.template cast<Scalar>() +
                  weighted * squared_kernel_.template cast<Scalar>();
        out /= static_cast<double>(dim_);
        return out;
      }
      case Kind::dense: {
        Mat out = Mat::Zero(dim_, dim_);
        for (int x = 0; x < dim_; ++x)
          for (int t = 0; t < dim_; ++t) {
            Scalar acc{};
            for (int y = 0; y < dim_; ++y)
              for (int z = 0; z < dim_; ++z)
                acc += table_[index(dim_, x, y, z, t)] * R(y, z);
            out(x, t) = acc;
          }
        return out;
      }
    }
    return Mat::Zero(dim_, dim_);  // unreachable
  }

  /// l-norm of the operator: max e^{rho/l} |S_{xy,zt}|. Exact for the dense
  /// and wigner kinds and for filtered operators up to N = 64; beyond that,
  /// a certified upper bound from the kernel's l-norm.
  double operator_l_norm(double l) const {
    if (l <= 0) throw validation_error("operator_l_norm: l must be positive");
    switch (kind_) {
      case Kind::wigner:
        return 1.0 / dim_;  // nonzero entries sit at rho = 0
      case Kind::filtered:
        if (dim_ > 64) {
          const double m = matrix_l_norm(squared_kernel_, l);
          return 2.0 * m * m / dim_;
        }
        [[fallthrough]];
      case Kind::dense: {
        double best = 0;
        for (int x = 0; x < dim_; ++x)
          for (int y = 0; y < dim_; ++y)
            for (int z = 0; z < dim_; ++z)
              for (int t = 0; t < dim_; ++t)
                best = std::max(best, std::exp(rho(x, y, z, t) / l) *
                                          std::abs(entry(x, y, z, t)));
        return best;
      }
    }
    return 0.0;  // unreachable
  }

  /// Certified upper bound on the l-norm, independent of the dense scan.
  double operator_l_norm_bound(double l) const {
    if (kind_ != Kind::filtered)
      return operator_l_norm(l);
    const double m = matrix_l_norm(squared_kernel_, l);
    return 2.0 * m * m / dim_;
  }

  /// Dense-table copy of this operator (test oracle; N kept small there).
  CovarianceOperator densified() const {
    std::vector<double> tab(static_cast<std::size_t>(dim_) * dim_ * dim_ * dim_);
    for (int x = 0; x < dim_; ++x)
      for (int y = 0; y < dim_; ++y)
        for (int z = 0; z < dim_; ++z)
          for (int t = 0; t < dim_; ++t)
            tab[index(dim_, x, y, z, t)] = entry(x, y, z, t);
    return dense(dim_, std::move(tab));
  }

  std::string serialize() const;
  static CovarianceOperator deserialize(const std::string& text);
  std::uint64_t fingerprint() const;

 private:
  static std::size_t index(int N, int x, int y, int z, int t) {
    return ((static_cast<std::size_t>(x) * N + y) * N + z) * N + t;
  }
  void check_index(int i) const {
    if (i < 0 || i >= dim_) throw validation_error("entry: index out of range");
  }

  Kind kind_ = Kind::wigner;
  int dim_ = 1;
  double kernel_scale_ = 0;
  double amplitude_ = 0;
  MatrixXd kernel_;
  MatrixXd squared_kernel_;
  std::vector<double> table_;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

inline std::string CovarianceOperator::serialize() const {
  std::ostringstream os;
  os << "covop v1\n";
  switch (kind_) {
    case Kind::wigner:
      os << "kind wigner\nN " << dim_ << "\n";
      break;
    case Kind::filtered:
      os << "kind filtered\nN " << dim_ << "\nkernel_scale "
         << detail::format_double(kernel_scale_) << "\namplitude "
         << detail::format_double(amplitude_) << "\n";
      break;
    case Kind::dense: {
      os << "kind dense\nN " << dim_ << "\nentries\n";
      // Row-major (x,y,z,t); N^2 values per line.
      std::size_t per_line = static_cast<std::size_t>(dim_) * dim_;
      for (std::size_t i = 0; i < table_.size(); ++i) {
        os << detail::format_double(table_[i]);
        os << (((i + 1) % per_line == 0) ? '\n' : ' ');
      }
      break;
    }
  }
  return os.str();
}

inline CovarianceOperator CovarianceOperator::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string word, kind_name;
  if (!(is >> word) || word != "covop" || !(is >> word) || word != "v1")
    throw parse_error("covop: missing header");
  if (!(is >> word) || word != "kind" || !(is >> kind_name))
    throw parse_error("covop: missing kind");
  int N = 0;
  if (!(is >> word) || word != "N" || !(is >> N) || N < 1)
    throw parse_error("covop: missing or invalid dimension");
  if (kind_name == "wigner") return wigner(N);
  if (kind_name == "filtered") {
    double scale = 0, amp = 0;
    if (!(is >> word) || word != "kernel_scale" || !(is >> scale) ||
        !(is >> word) || word != "amplitude" || !(is >> amp))
      throw parse_error("covop: missing filtered parameters");
    return filtered_gaussian(N, scale, amp);
  }
  if (kind_name == "dense") {
    if (!(is >> word) || word != "entries")
      throw parse_error("covop: missing entries section");
    std::vector<double> tab(static_cast<std::size_t>(N) * N * N * N);
    for (auto& v : tab)
      if (!(is >> v)) throw parse_error("covop: truncated entry table");
    return dense(N, std::move(tab));
  }
  throw parse_error("covop: unknown kind '" + kind_name + "'");
}

inline std::uint64_t CovarianceOperator::fingerprint() const {
  return detail::fnv1a(serialize());
}

}  // namespace mde
