#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "mde/laurent.hpp"

using namespace mde;

TEST_CASE("tree values: base cases") {
  const auto S = mde::testing::random_consistent_operator(4, 1, 0.5);
  CHECK((val_recursive(OrderedTree(), S) - MatrixXd::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  // One edge: val_ab = sum_x S_{ax,xb} = [S(I)]_ab.
  const MatrixXd one_edge = val_recursive(OrderedTree::decode("10"), S);
  const MatrixXd expect = S.apply(MatrixXd(MatrixXd::Identity(4, 4)));
  CHECK((one_edge - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("recursive value equals the labelling sum on small trees") {
  for (std::uint64_t seed : {2ull, 3ull}) {
    const auto S = mde::testing::random_consistent_operator(3, seed, 0.8);
    for (int k = 0; k <= 2; ++k) {
      for (const auto& g : enumerate_trees(k)) {
        const MatrixXd rec = val_recursive(g, S);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            CHECK(val_bruteforce(g, S, a, b) ==
                  doctest::Approx(rec(a, b)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("value cache is shared across trees") {
  const auto S = mde::testing::random_consistent_operator(3, 5, 0.5);
  ValCache cache;
  for (const auto& g : enumerate_trees(3)) val_recursive(g, S, cache);
  // All subtrees of T_3 with fewer edges appear as keys too.
  CHECK(cache.count(""));
  CHECK(cache.count("10"));
  CHECK(cache.count("1010"));
  CHECK(cache.count("1100"));
}

TEST_CASE("coefficient recursion equals the tree sum") {
  const auto S = mde::testing::random_consistent_operator(5, 8, 0.4);
  const auto C = coefficient_sequence(S, 4);
  ValCache cache;
  for (int k = 0; k <= 4; ++k) {
    const MatrixXd direct = tree_sum_coefficient(k, S, cache);
    CHECK((C[k] - direct).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("trace-averaging operator gives Catalan multiples of the identity") {
  const auto S = CovarianceOperator::wigner(6);
  const auto C = coefficient_sequence(S, 8);
  for (int k = 0; k <= 8; ++k) {
    const MatrixXd expect = double(catalan(k)) * MatrixXd::Identity(6, 6);
    CHECK((C[k] - expect).cwiseAbs().maxCoeff() < 1e-12 * double(catalan(k)));
  }
}

TEST_CASE("guards and validation") {
  const auto S = CovarianceOperator::wigner(3);
  CHECK_THROWS_AS(coefficient_sequence(S, 13), resource_limit_error);
  CHECK_THROWS_AS(coefficient_sequence(S, -1), validation_error);
  const auto big = CovarianceOperator::wigner(40);
  const auto g = OrderedTree::decode("11101000");
  CHECK_THROWS_AS(val_bruteforce(g, big, 0, 0), resource_limit_error);
  CHECK_THROWS_AS(val_bruteforce(g, S, 3, 0), validation_error);
}

TEST_CASE("decay constants") {
  const auto S = CovarianceOperator::wigner(4);
  const auto d = decay_constants(2.0, 1.0, S);
  CHECK(d.c_l_eps == doctest::Approx(2.0 * std::exp(0.5) * 4.0));
  CHECK(d.c == doctest::Approx(1.0));  // N * (1/N)
  CHECK(d.radius == doctest::Approx(8.0 * d.c_l_eps * d.c_l_eps));
  CHECK_THROWS_AS(decay_constants(0.0, 1.0, S), validation_error);
  CHECK_THROWS_AS(decay_constants(1.0, 0.0, S), validation_error);
}

TEST_CASE("series evaluation on the trace-averaging operator") {
  const auto S = CovarianceOperator::wigner(4);
  const auto lc = compute_coefficients(S, 12, 1.0, 1.0);
  // Far out on the imaginary axis the truncation agrees with the semicircle
  // transform m(z) = (-z + sqrt(z^2 - 4)) / 2 to the certified tail.
  for (double im : {40.0, 60.0}) {
    const complex_t z(0, im);
    const auto ev = laurent_M(lc, z, 12);
    CHECK(ev.tail_certified);
    CHECK_FALSE(ev.divergence_warning);
    const complex_t root = std::sqrt(z * z - 4.0);
    const complex_t m_ref = (-z + (root.imag() > 0 ? root : -root)) / 2.0;
    const complex_t got = ev.M.trace() / 4.0;
    CHECK(std::abs(got - m_ref) <= ev.tail_bound + 1e-12);
    CHECK(mde_residual(S, ev.M, z) < 1e-8);
  }
  CHECK_THROWS_AS(laurent_M(lc, complex_t(0, -1), 12), validation_error);
  CHECK_THROWS_AS(laurent_M(lc, complex_t(0, 2), 13), validation_error);
}

TEST_CASE("uncertified tail is flagged below the radius") {
  const auto S = CovarianceOperator::wigner(4);
  const auto lc = compute_coefficients(S, 8, 1.0, 1.0);
  const double below = std::sqrt(lc.constants.radius) * 0.5;
  const auto ev = laurent_M(lc, complex_t(0, below), 8);
  CHECK_FALSE(ev.tail_certified);
}

TEST_CASE("chain sums match direct summation") {
  const int N = 5;
  const double l = 1.7;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      CHECK(path_sum(l, 0, a, b, N) == (a == b ? 1.0 : 0.0));
      CHECK(path_sum(l, 1, a, b, N) ==
            doctest::Approx(std::exp(-std::abs(a - b) / l)));
      double direct2 = 0;
      for (int x = 0; x < N; ++x)
        direct2 += std::exp(-(std::abs(a - x) + std::abs(x - b)) / l);
      CHECK(path_sum(l, 2, a, b, N) == doctest::Approx(direct2));
      double direct3 = 0;
      for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y)
          direct3 += std::exp(
              -(std::abs(a - x) + std::abs(x - y) + std::abs(y - b)) / l);
      CHECK(path_sum(l, 3, a, b, N) == doctest::Approx(direct3));
    }
  double cyc2 = 0;
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) cyc2 += std::exp(-2.0 * std::abs(x - y) / l);
  CHECK(cyc_sum(l, 2, N) == doctest::Approx(cyc2));
  CHECK(cyc_sum(l, 1, N) == doctest::Approx(double(N)));
  CHECK_THROWS_AS(path_sum(-1.0, 1, 0, 0, N), validation_error);
  CHECK_THROWS_AS(cyc_sum(1.0, 0, N), validation_error);
}

TEST_CASE("summation weight") {
  SummationGraph sg;
  sg.vertex_count = 3;
  sg.edges = {{0, 1}, {1, 2}, {2, 2}};
  CHECK(summation_weight(sg, {4, 1, 7}) == 3 + 6 + 0);
}

TEST_CASE("decay report on an exponential profile") {
  const int N = 24;
  const double l = 2.0;
  MatrixXd M(N, N);
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) M(x, y) = std::exp(-std::abs(x - y) / l);
  const auto rep = verify_offdiagonal_decay(M, l, 1.0);
  CHECK(rep.slope_defined);
  CHECK(rep.fitted_slope == doctest::Approx(-1.0 / l).epsilon(1e-9));
  CHECK(rep.reference_slope == doctest::Approx(-1.0 / (2.0 * l)));
  CHECK(rep.norm == doctest::Approx(1.0));  // the e^{d/(2l)} weight never beats e^{-d/l}
  CHECK(rep.profile[0] == 1.0);
  CHECK(rep.profile[3] == doctest::Approx(std::exp(-3.0 / l)));
}

TEST_CASE("coefficient directory round trip") {
  namespace fs = std::filesystem;
  const auto S = CovarianceOperator::filtered_gaussian(6, 1.5, 1.0);
  const auto lc = compute_coefficients(S, 4, 3.0, 1.0);
  const fs::path dir = fs::temp_directory_path() / "mde-coeff-roundtrip";
  fs::remove_all(dir);
  write_coefficients(dir, lc);
  const auto back = read_coefficients(dir);
  CHECK(back.fingerprint == lc.fingerprint);
  CHECK(back.N == lc.N);
  CHECK(back.K_max == lc.K_max);
  CHECK(back.constants.radius == lc.constants.radius);
  for (int k = 0; k <= 4; ++k) {
    CHECK((back.coeffs[k] - lc.coeffs[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.certificates[k].measured == lc.certificates[k].measured);
    CHECK(back.certificates[k].bound == lc.certificates[k].bound);
  }
  fs::remove_all(dir);
  CHECK_THROWS_AS(read_coefficients(dir), validation_error);
}
