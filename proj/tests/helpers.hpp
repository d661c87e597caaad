#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mde/covariance.hpp"
#include "mde/laurent.hpp"

namespace mde::testing {

inline double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng()) / 18446744073709551616.0) - 1.0;
}

/// Random dense operator satisfying the self-adjointness-consistency
/// symmetries of a real-symmetric ensemble: entry(x,y,z,t) = entry(t,z,y,x)
/// and invariance under the joint within-pair swap.
inline CovarianceOperator random_consistent_operator(int N, std::uint64_t seed,
                                                     double scale) {
  std::mt19937_64 rng(seed);
  std::vector<double> raw(static_cast<std::size_t>(N) * N * N * N);
  for (auto& v : raw) v = scale * uniform_pm1(rng);
  auto at = [&](int x, int y, int z, int t) -> double& {
    return raw[((static_cast<std::size_t>(x) * N + y) * N + z) * N + t];
  };
  std::vector<double> sym(raw.size());
  auto sat = [&](int x, int y, int z, int t) -> double& {
    return sym[((static_cast<std::size_t>(x) * N + y) * N + z) * N + t];
  };
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y)
      for (int z = 0; z < N; ++z)
        for (int t = 0; t < N; ++t)
          sat(x, y, z, t) = 0.25 * (at(x, y, z, t) + at(t, z, y, x) +
                                    at(y, x, t, z) + at(z, t, x, y));
  return CovarianceOperator::dense(N, std::move(sym));
}

/// Same symmetries plus exponential decay in the symmetrized distance.
inline CovarianceOperator random_decaying_operator(int N, std::uint64_t seed,
                                                   double l, double scale) {
  auto op = random_consistent_operator(N, seed, scale);
  std::vector<double> tab(static_cast<std::size_t>(N) * N * N * N);
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y)
      for (int z = 0; z < N; ++z)
        for (int t = 0; t < N; ++t)
          tab[((static_cast<std::size_t>(x) * N + y) * N + z) * N + t] =
              op.entry(x, y, z, t) * std::exp(-rho(x, y, z, t) / l);
  return CovarianceOperator::dense(N, std::move(tab));
}

inline MatrixXd random_symmetric_matrix(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatrixXd R(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      R(i, j) = uniform_pm1(rng);
      R(j, i) = R(i, j);
    }
  return R;
}

inline MatrixXcd random_hermitian_matrix(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatrixXcd R(N, N);
  for (int i = 0; i < N; ++i) {
    R(i, i) = uniform_pm1(rng);
    for (int j = i + 1; j < N; ++j) {
      R(i, j) = complex_t(uniform_pm1(rng), uniform_pm1(rng));
      R(j, i) = std::conj(R(i, j));
    }
  }
  return R;
}

}  // namespace mde::testing
