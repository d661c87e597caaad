#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "mde/covariance.hpp"
#include "mde/errors.hpp"

namespace mde {

struct EnsembleConfig {
  int N = 0;
  double kernel_scale = 1.0;  // l' of the decay kernel
  double amplitude = 1.0;     // a, the maximal entry variance scale
  std::uint64_t base_seed = 0;

  void validate() const {
    if (N < 2) throw validation_error("ensemble: N must be at least 2");
    if (kernel_scale <= 0 || amplitude <= 0)
      throw validation_error("ensemble: kernel_scale and amplitude must be positive");
  }

  CovarianceOperator covariance() const {
    return CovarianceOperator::filtered_gaussian(N, kernel_scale, amplitude);
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Standard normals from mt19937_64 via explicit Box-Muller; bit-identical
/// across platforms, unlike std::normal_distribution.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_()) + 1.0) / 18446744073709551616.0;
    const double u2 = static_cast<double>(engine_()) / 18446744073709551616.0;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586477 * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace detail

inline std::uint64_t sample_seed(std::uint64_t base_seed, int sample_index) {
  return detail::splitmix64(base_seed ^ detail::splitmix64(sample_index));
}

/// One draw of the symmetric GOE-normalized Gaussian matrix G:
/// E g_ab g_cd = d_ac d_bd + d_ad d_bc (off-diagonal variance 1, diagonal 2).
inline MatrixXd sample_goe(int N, std::uint64_t seed) {
  detail::GaussianStream gauss(seed);
  MatrixXd G(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      const double g = gauss.next();
      if (i == j) {
        G(i, i) = std::sqrt(2.0) * g;
      } else {
        G(i, j) = g;
        G(j, i) = g;
      }
    }
  return G;
}

/// W = A G A with the decay kernel A; its exact covariance is the filtered
/// operator of the same parameters. Deterministic in (cfg, seed).
inline MatrixXd sample_W(const EnsembleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const MatrixXd A = decay_kernel(cfg.N, cfg.kernel_scale, cfg.amplitude);
  return A * sample_goe(cfg.N, seed) * A;
}

/// Spectrum of H = W / sqrt(N), ascending.
inline Eigen::VectorXd eigenvalues(const MatrixXd& W) {
  if (W.rows() != W.cols()) throw validation_error("eigenvalues: matrix not square");
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + W.cwiseAbs().maxCoeff()))
    throw validation_error("eigenvalues: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W / std::sqrt(double(W.rows())),
                                             Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw numerical_error("eigenvalues: eigensolver failed");
  return es.eigenvalues();
}

/// Per-sample moments (1/N) sum lambda_i^k for k = 0..k_max.
inline std::vector<double> empirical_moments(const Eigen::VectorXd& eigs, int k_max) {
  std::vector<double> m(k_max + 1, 0.0);
  m[0] = 1.0;
  const int N = static_cast<int>(eigs.size());
  for (int i = 0; i < N; ++i) {
    double p = 1;
    for (int k = 1; k <= k_max; ++k) {
      p *= eigs[i];
      m[k] += p;
    }
  }
  for (int k = 1; k <= k_max; ++k) m[k] /= N;
  return m;
}

inline complex_t empirical_stieltjes(const Eigen::VectorXd& eigs, complex_t z) {
  if (z.imag() <= 0)
    throw validation_error("empirical_stieltjes: z must lie in the upper half plane");
  complex_t s = 0;
  for (int i = 0; i < eigs.size(); ++i) s += 1.0 / (eigs[i] - z);
  return s / static_cast<double>(eigs.size());
}

struct BatchStatistic {
  double mean = 0;
  double std_error = std::numeric_limits<double>::quiet_NaN();  // NaN when n < 2
  int n = 0;
};

inline BatchStatistic batch_statistic(const std::vector<double>& values) {
  BatchStatistic s;
  s.n = static_cast<int>(values.size());
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= s.n;
  if (s.n >= 2) {
    double var = 0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(var / (s.n - 1) / s.n);
  }
  return s;
}

struct SampleBatch {
  EnsembleConfig config;
  int n_samples = 0;
  int n_dropped = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Eigen::VectorXd> eigenvalue_sets;  // one sorted spectrum per sample
  std::vector<BatchStatistic> moments;           // index k, k = 0..k_max
};

/// Draws n_samples spectra with per-sample derived seeds. Sampling is
/// parallel over the sample index; the fold over samples is sequential by
/// index, so results do not depend on the thread count. Samples whose
/// eigensolve fails are dropped; more than 1% drops abort the batch.
inline SampleBatch sample_batch(const EnsembleConfig& cfg, int n_samples, int k_max,
                                int threads = 1) {
  cfg.validate();
  if (n_samples < 1) throw validation_error("sample_batch: need at least one sample");
  if (threads < 1) threads = 1;
  SampleBatch batch;
  batch.config = cfg;
  batch.seeds.resize(n_samples);
  for (int i = 0; i < n_samples; ++i)
    batch.seeds[i] = sample_seed(cfg.base_seed, i);

  const MatrixXd A = decay_kernel(cfg.N, cfg.kernel_scale, cfg.amplitude);
  std::vector<Eigen::VectorXd> spectra(n_samples);
  std::vector<char> ok(n_samples, 0);
  auto worker = [&](int first, int last) {
    for (int i = first; i < last; ++i) {
      try {
        const MatrixXd W = A * sample_goe(cfg.N, batch.seeds[i]) * A;
        spectra[i] = eigenvalues(W);
        ok[i] = 1;
      } catch (const numerical_error&) {
        ok[i] = 0;
      }
    }
  };
  if (threads == 1) {
    worker(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_samples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int first = t * chunk;
      const int last = std::min(n_samples, first + chunk);
      if (first < last) pool.emplace_back(worker, first, last);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<std::vector<double>> per_k(k_max + 1);
  for (int i = 0; i < n_samples; ++i) {
    if (!ok[i]) {
      ++batch.n_dropped;
      continue;
    }
    batch.eigenvalue_sets.push_back(spectra[i]);
    const auto m = empirical_moments(spectra[i], k_max);
    for (int k = 0; k <= k_max; ++k) per_k[k].push_back(m[k]);
  }
  batch.n_samples = static_cast<int>(batch.eigenvalue_sets.size());
  if (batch.n_dropped > n_samples / 100)
    throw numerical_error("sample_batch: more than 1% of samples dropped");
  for (int k = 0; k <= k_max; ++k) batch.moments.push_back(batch_statistic(per_k[k]));
  return batch;
}

inline BatchStatistic batch_stieltjes(const SampleBatch& batch, complex_t z,
                                      bool imaginary_part) {
  std::vector<double> vals;
  vals.reserve(batch.eigenvalue_sets.size());
  for (const auto& eigs : batch.eigenvalue_sets) {
    const complex_t s = empirical_stieltjes(eigs, z);
    vals.push_back(imaginary_part ? s.imag() : s.real());
  }
  return batch_statistic(vals);
}

}  // namespace mde
