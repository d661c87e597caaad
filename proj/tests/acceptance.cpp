// Acceptance gate: nine end-to-end checks, one pass/fail line each.
// Exit status is the number of failed checks.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mde/covariance.hpp"
#include "mde/fixed_point.hpp"
#include "mde/laurent.hpp"
#include "mde/ordered_tree.hpp"
#include "mde/sampler.hpp"
#include "mde/study.hpp"

namespace fs = std::filesystem;
using namespace mde;
using clock_type = std::chrono::steady_clock;

namespace {

struct Checker {
  bool ok = true;
  std::string first_failure;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      first_failure = what;
    }
    ok = ok && cond;
  }
};

// --- 1. combinatorics: counts, bijection, summation-graph structure --------

bool criterion_combinatorics(Checker& c) {
  for (int k = 0; k <= 10; ++k)
    c.require(enumerate_trees(k).size() == catalan(k),
              "|T_" + std::to_string(k) + "| != Catalan");
  for (int k = 1; k <= 6; ++k) {
    std::size_t built = 0;
    for (int k1 = 0; k1 < k; ++k1)
      for (const auto& g1 : enumerate_trees(k1))
        for (const auto& g2 : enumerate_trees(k - 1 - k1)) {
          const auto g = OrderedTree::compose(g1, g2);
          const auto [h1, h2] = g.decompose();
          c.require(h1 == g1 && h2 == g2, "decompose does not invert compose");
          ++built;
        }
    c.require(built == catalan(k), "compose image misses T_k");
  }
  for (const auto& g : enumerate_trees(4)) {
    const int k = g.edge_count();
    for (const auto& sg : summation_graphs(g)) {
      try {
        const auto comps = classify_components(sg);
        c.require(comps.path.front() == 0 && comps.path.back() == 2 * k,
                  "path endpoints are not the root copies");
        c.require(static_cast<int>(comps.cycles.size()) <= k, "more than k cycles");
      } catch (const std::exception& e) {
        c.require(false, std::string("classification failed: ") + e.what());
      }
    }
  }
  return c.ok;
}

// --- 2. labelling-sum oracle vs product recursion --------------------------

bool criterion_value_oracle(Checker& c) {
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 2 + trial % 3;  // 2, 3, 4
    const auto S = mde::testing::random_consistent_operator(
        N, 1000 + trial, 0.9);
    for (int k = 0; k <= 3; ++k)
      for (const auto& g : enumerate_trees(k)) {
        const MatrixXd rec = val_recursive(g, S);
        for (int a = 0; a < N; ++a)
          for (int b = 0; b < N; ++b) {
            const double direct = val_bruteforce(g, S, a, b);
            const double tol = 1e-10 * (1.0 + std::abs(direct));
            c.require(std::abs(rec(a, b) - direct) <= tol,
                      "val mismatch on " + g.encode());
          }
      }
  }
  return c.ok;
}

// --- 3. tree sum vs quadratic recursion ------------------------------------

bool criterion_coefficient_consistency(Checker& c) {
  const std::vector<CovarianceOperator> ops = {
      CovarianceOperator::wigner(16),
      CovarianceOperator::filtered_gaussian(16, 2.0, 1.0),
      mde::testing::random_consistent_operator(16, 5, 1.0 / 16.0)};
  for (const auto& S : ops) {
    const auto C = coefficient_sequence(S, 6);
    ValCache cache;
    for (int k = 0; k <= 6; ++k) {
      const MatrixXd direct = tree_sum_coefficient(k, S, cache);
      const double scale = 1.0 + direct.cwiseAbs().maxCoeff();
      c.require((C[k] - direct).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                "coefficient mismatch at order " + std::to_string(k));
    }
  }
  return c.ok;
}

// --- 4. semicircle cross-check ---------------------------------------------

bool criterion_semicircle(Checker& c) {
  const int N = 8;
  const auto S = CovarianceOperator::wigner(N);
  const auto C = coefficient_sequence(S, 6);
  for (int k = 0; k <= 6; ++k) {
    const MatrixXd expect = double(catalan(k)) * MatrixXd::Identity(N, N);
    c.require((C[k] - expect).cwiseAbs().maxCoeff() <= 1e-12 * double(catalan(k)),
              "coefficient is not Catalan * I at order " + std::to_string(k));
  }
  const complex_t target(0, std::sqrt(2.0) - 1.0);
  const auto sol = solve_mde(S, complex_t(0, 2));
  c.require(std::abs(sol.M.trace() / double(N) - target) <= 1e-8,
            "matrix fixed point misses the semicircle value at 2i");
  const MatrixXd flat = MatrixXd::Constant(N, N, 1.0 / N);
  const auto m = vector_dyson_solve(flat, complex_t(0, 2));
  for (int x = 0; x < N; ++x)
    c.require(std::abs(m[x] - target) <= 1e-8,
              "vector fixed point misses the semicircle value at 2i");
  return c.ok;
}

// --- 5. solver agreement on the filtered operator --------------------------

bool criterion_solver_agreement(Checker& c) {
  const auto S = CovarianceOperator::filtered_gaussian(32, 2.0, 1.0);
  const auto lc = compute_coefficients(S, 12, 5.0, 1.0);
  for (double height : {8.0, 10.0, 15.0}) {
    const complex_t z(0, height);
    const auto ev = laurent_M(lc, z, 12);
    c.require(!ev.divergence_warning,
              "series terms fail to decrease at |z| = " + std::to_string(height));
    SolverConfig cfg;
    cfg.tolerance = 1e-14;  // the residual target is 1e-10 in M^{-1} units
    const auto sol = solve_mde(S, z, cfg);
    c.require(sol.residual <= 1e-10, "fixed-point residual above 1e-10");
    const double disc = (ev.M - sol.M).cwiseAbs().maxCoeff();
    c.require(disc <= ev.tail_bound + 1e-8,
              "solver discrepancy " + std::to_string(disc) + " above tail bound " +
                  std::to_string(ev.tail_bound) + " at |z| = " +
                  std::to_string(height));
  }
  return c.ok;
}

// --- 6. decay bounds: chain sums and coefficient certificates --------------

bool criterion_decay_bounds(Checker& c) {
  for (double l : {1.0, 2.0, 4.0}) {
    for (int N : {16, 64, 256}) {
      MatrixXd K(N, N);
      for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y) K(x, y) = std::exp(-std::abs(x - y) / l);
      MatrixXd P = MatrixXd::Identity(N, N);
      for (int k = 0; k <= 8; ++k) {
        P = P * K;  // P = K^{k+1}
        for (double eps : {0.5, 1.0}) {
          const double ce = l * std::exp(1.0 / l) * 2.0 * (1.0 + eps) / eps;
          const double factor = std::pow(ce, k + 1);
          double worst = 0;
          for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
              worst = std::max(
                  worst, P(a, b) * std::exp(std::abs(a - b) / ((1.0 + eps) * l)));
          c.require(worst <= factor,
                    "chain bound fails: l=" + std::to_string(l) +
                        " N=" + std::to_string(N) + " k=" + std::to_string(k));
          if (k >= 1)
            c.require(cyc_sum(l, k, N) <= N * std::pow(ce, k),
                      "cycle bound fails: l=" + std::to_string(l) +
                          " N=" + std::to_string(N) + " k=" + std::to_string(k));
        }
        if (N == 16 && k <= 2) {
          // Cross-check the matrix power against the scalar recursion.
          c.require(std::abs(P(3, 9) - path_sum(l, k + 1, 3, 9, N)) <=
                        1e-10 * (1.0 + P(3, 9)),
                    "matrix power disagrees with the chain recursion");
        }
      }
    }
  }
  const auto S = CovarianceOperator::filtered_gaussian(32, 2.0, 1.0);
  const auto lc = compute_coefficients(S, 6, 5.0, 1.0);
  for (int k = 0; k <= 6; ++k)
    c.require(lc.certificates[k].measured <= lc.certificates[k].bound,
              "coefficient norm exceeds its certificate at order " +
                  std::to_string(k));
  return c.ok;
}

// --- 7/8. Monte Carlo convergence ------------------------------------------

StudyReport run_study() {
  std::vector<EnsembleConfig> ladder{{64, 2.0, 1.0, 20260824},
                                     {128, 2.0, 1.0, 20260824},
                                     {256, 2.0, 1.0, 20260824}};
  return moment_convergence_study(ladder, 7, 400, {complex_t(0, 2)}, 1);
}

bool criterion_moment_convergence(Checker& c, const StudyReport& rep) {
  auto find = [&](int N, int k) -> const MomentGap& {
    for (const auto& g : rep.moment_gaps)
      if (g.N == N && g.k == k) return g;
    throw std::logic_error("missing study row");
  };
  for (int N : {64, 128, 256})
    for (int k : {1, 3, 5, 7}) {
      const auto& g = find(N, k);
      c.require(std::abs(g.empirical_mean) <= 4.0 * g.std_error,
                "odd moment k=" + std::to_string(k) + " at N=" + std::to_string(N) +
                    " beyond 4 standard errors");
    }
  for (int k : {2, 4, 6}) {
    const auto& a = find(64, k);
    const auto& b = find(128, k);
    const auto& d = find(256, k);
    c.require(b.gap <= a.gap + a.std_error + b.std_error,
              "even gap grows from N=64 to 128 at k=" + std::to_string(k));
    c.require(d.gap <= b.gap + b.std_error + d.std_error,
              "even gap grows from N=128 to 256 at k=" + std::to_string(k));
  }
  return c.ok;
}

bool criterion_stieltjes_convergence(Checker& c, const StudyReport& rep) {
  std::vector<StieltjesGap> rows = rep.stieltjes_gaps;
  c.require(rows.size() == 3, "expected one transform row per ladder step");
  if (rows.size() == 3) {
    c.require(rows[1].gap < rows[0].gap, "transform gap grows from N=64 to 128");
    c.require(rows[2].gap < rows[1].gap, "transform gap grows from N=128 to 256");
    const double se = std::hypot(rows[2].std_error_re, rows[2].std_error_im);
    c.require(rows[2].gap <= 5.0 * se + 0.01,
              "transform gap at N=256 above 5 SE + 0.01");
  }
  return c.ok;
}

// --- 9. reproducibility of the command-line surface ------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run_cli(const std::string& args, const fs::path& capture) {
  const std::string cmd = std::string("\"") + MDE_CLI_PATH + "\" " + args + " > " +
                          capture.string() + " 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

bool criterion_reproducibility(Checker& c) {
  const fs::path work = fs::temp_directory_path() / "mde-acceptance-cli";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path op = work / "op.covop";
  c.require(run_cli("makeop --kind filtered --N 16 --kernel-scale 2 --amplitude 1 "
                    "--out " + op.string(), work / "mk.log") == 0,
            "makeop failed");

  const std::string solve_args = "solve --operator " + op.string() +
                                 " --z 0,8 --z 0,12 --method both --K 10 --l 5 "
                                 "--eps 1 --out ";
  c.require(run_cli(solve_args + (work / "s1.csv").string(), work / "s1.log") == 0,
            "solve failed");
  c.require(run_cli(solve_args + (work / "s2.csv").string(), work / "s2.log") == 0,
            "solve rerun failed");
  c.require(slurp(work / "s1.csv") == slurp(work / "s2.csv") &&
                !slurp(work / "s1.csv").empty(),
            "solve reruns are not byte identical");

  const std::string sim_args =
      "simulate --N 16 --N 24 --samples 24 --kmax 4 --kernel-scale 2 "
      "--amplitude 1 --seed 7 --z 0,2 --out ";
  c.require(run_cli("--threads 1 " + sim_args + (work / "r1").string(),
                    work / "r1.log") == 0, "simulate failed");
  c.require(run_cli("--threads 1 " + sim_args + (work / "r2").string(),
                    work / "r2.log") == 0, "simulate rerun failed");
  c.require(run_cli("--threads 4 " + sim_args + (work / "r4").string(),
                    work / "r4.log") == 0, "threaded simulate failed");
  for (const char* name : {"gaps.csv", "stieltjes_gaps.csv", "manifest.txt"}) {
    c.require(slurp(work / "r1" / name) == slurp(work / "r2" / name),
              std::string("simulate reruns differ in ") + name);
    c.require(slurp(work / "r1" / name) == slurp(work / "r4" / name),
              std::string("thread count changes ") + name);
    c.require(!slurp(work / "r1" / name).empty(),
              std::string("empty output file ") + name);
  }
  fs::remove_all(work);
  return c.ok;
}

}  // namespace

int main() {
  struct Entry {
    const char* label;
    double time_limit_s;
    std::function<bool(Checker&)> fn;
  };

  // The Monte Carlo study feeds two criteria; run it once.
  StudyReport study;
  bool study_ok = true;
  std::string study_error;
  const auto study_t0 = clock_type::now();
  try {
    study = run_study();
  } catch (const std::exception& e) {
    study_ok = false;
    study_error = e.what();
  }
  const double study_seconds =
      std::chrono::duration<double>(clock_type::now() - study_t0).count();

  const std::vector<Entry> entries = {
      {"1 combinatorics (counts, bijection, graph structure)", 10.0,
       criterion_combinatorics},
      {"2 tree value oracle equivalence", 60.0, criterion_value_oracle},
      {"3 coefficient recursion vs tree sum", 120.0,
       criterion_coefficient_consistency},
      {"4 semicircle cross-check", 60.0, criterion_semicircle},
      {"5 solver agreement on the filtered operator", 120.0,
       criterion_solver_agreement},
      {"6 chain-sum bounds and norm certificates", 60.0, criterion_decay_bounds},
      {"7 moment convergence across the dimension ladder", 1800.0,
       [&](Checker& c) {
         c.require(study_ok, "study failed: " + study_error);
         return study_ok && criterion_moment_convergence(c, study);
       }},
      {"8 transform convergence at 2i", 1800.0,
       [&](Checker& c) {
         c.require(study_ok, "study failed: " + study_error);
         return study_ok && criterion_stieltjes_convergence(c, study);
       }},
      {"9 reproducibility of the command-line surface", 600.0,
       criterion_reproducibility},
  };

  int failures = 0;
  for (const auto& e : entries) {
    Checker c;
    const auto t0 = clock_type::now();
    try {
      e.fn(c);
    } catch (const std::exception& ex) {
      c.require(false, std::string("exception: ") + ex.what());
    }
    double seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
    if (e.label[0] == '7' || e.label[0] == '8') seconds += study_seconds / 2.0;
    c.require(seconds <= e.time_limit_s, "runtime limit exceeded");
    if (c.ok) {
      std::printf("[PASS] %s (%.1f s)\n", e.label, seconds);
    } else {
      std::printf("[FAIL] %s (%.1f s): %s\n", e.label, seconds,
                  c.first_failure.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
