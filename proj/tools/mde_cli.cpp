// Command-line surface for the Dyson-equation toolkit: tree listings,
// Laurent coefficient computation, dual-method solves, Monte Carlo studies
// and decay profiles, all with reproducible text outputs.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mde/covariance.hpp"
#include "mde/errors.hpp"
#include "mde/fixed_point.hpp"
#include "mde/laurent.hpp"
#include "mde/ordered_tree.hpp"
#include "mde/sampler.hpp"
#include "mde/study.hpp"

namespace fs = std::filesystem;
using mde::complex_t;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitResource = 4;

std::string fmt(double v) { return mde::detail::format_double(v); }

complex_t parse_z(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos)
    throw mde::validation_error("z must be given as re,im");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw mde::validation_error("z must be given as re,im");
  }
}

mde::CovarianceOperator load_operator(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mde::validation_error("cannot open operator file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return mde::CovarianceOperator::deserialize(buf.str());
}

struct ManifestWriter {
  std::ostringstream body;
  void add(const std::string& key, const std::string& value) {
    body << key << " " << value << "\n";
  }
  void write(const fs::path& dir) {
    std::ofstream os(dir / "manifest.txt");
    os << "mde-run v1\n" << body.str();
  }
};

fs::path resolve_out_dir(std::string out, std::uint64_t seed) {
  if (out.empty()) {
    const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    out = "run-" + std::to_string(stamp) + "-" + std::to_string(seed);
  }
  fs::path dir = fs::absolute(out);
  fs::create_directories(dir);
  return dir;
}

void write_solve_csv(std::ostream& os, const mde::CovarianceOperator& S,
                     const std::vector<complex_t>& zs, const std::string& method,
                     int K, double l, double eps, double tolerance,
                     int& numerical_failures) {
  const bool want_laurent = method == "laurent" || method == "both";
  const bool want_fixed = method == "fixedpoint" || method == "both";
  mde::LaurentCoefficients lc;
  if (want_laurent) lc = mde::compute_coefficients(S, K, l, eps);

  os << "z_re,z_im,method,trace_re,trace_im,residual,iterations,tail_bound,"
        "discrepancy,status\n";
  for (complex_t z : zs) {
    mde::MatrixXcd M_laurent, M_fixed;
    bool have_laurent = false, have_fixed = false;
    double tail = 0;
    if (want_laurent) {
      const auto ev = mde::laurent_M(lc, z, K);
      M_laurent = ev.M;
      tail = ev.tail_bound;
      have_laurent = !ev.divergence_warning;
      const complex_t tr = M_laurent.trace() / double(S.dim());
      os << fmt(z.real()) << "," << fmt(z.imag()) << ",laurent," << fmt(tr.real())
         << "," << fmt(tr.imag()) << ","
         << fmt(mde::mde_residual(S, M_laurent, z)) << "," << (K + 1) << ","
         << fmt(tail) << ",," << (have_laurent ? "ok" : "divergence") << "\n";
      if (!have_laurent) ++numerical_failures;
    }
    if (want_fixed) {
      try {
        mde::SolverConfig cfg;
        cfg.tolerance = tolerance;
        const auto sol = mde::solve_mde(S, z, cfg);
        M_fixed = sol.M;
        have_fixed = true;
        const complex_t tr = sol.M.trace() / double(S.dim());
        os << fmt(z.real()) << "," << fmt(z.imag()) << ",fixedpoint,"
           << fmt(tr.real()) << "," << fmt(tr.imag()) << "," << fmt(sol.residual)
           << "," << sol.iterations_used << ",,,ok\n";
      } catch (const mde::numerical_error&) {
        ++numerical_failures;
        os << fmt(z.real()) << "," << fmt(z.imag())
           << ",fixedpoint,,,,,,,no-convergence\n";
      }
    }
    if (method == "both" && have_laurent && have_fixed) {
      const double disc = (M_laurent - M_fixed).cwiseAbs().maxCoeff();
      os << fmt(z.real()) << "," << fmt(z.imag()) << ",discrepancy,,,,,"
         << fmt(tail) << "," << fmt(disc) << ",ok\n";
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Matrix Dyson equation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; flags override file values");
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  app.add_option("--threads", threads, "worker threads (outputs are unaffected)");

  // trees
  auto* cmd_trees = app.add_subcommand("trees", "enumerate ordered rooted trees");
  int trees_k = 0;
  cmd_trees->add_option("--k", trees_k, "number of edges")->required();

  // coeffs
  auto* cmd_coeffs = app.add_subcommand("coeffs", "compute Laurent coefficients");
  std::string coeffs_op, coeffs_out;
  int coeffs_K = 6;
  double coeffs_l = 1.0, coeffs_eps = 1.0;
  cmd_coeffs->add_option("--operator", coeffs_op, ".covop file")->required();
  cmd_coeffs->add_option("--K", coeffs_K, "highest coefficient order");
  cmd_coeffs->add_option("--l", coeffs_l, "decay scale for certificates");
  cmd_coeffs->add_option("--eps", coeffs_eps, "certificate margin");
  cmd_coeffs->add_option("--out", coeffs_out, "output directory")->required();

  // solve
  auto* cmd_solve = app.add_subcommand("solve", "solve the Dyson equation");
  std::string solve_op, solve_out, solve_method = "both";
  std::vector<std::string> solve_z;
  int solve_K = 12;
  double solve_l = 1.0, solve_eps = 1.0, solve_tol = 1e-12;
  cmd_solve->add_option("--operator", solve_op, ".covop file")->required();
  cmd_solve->add_option("--z", solve_z, "evaluation points, each re,im")->required();
  cmd_solve->add_option("--method", solve_method, "laurent | fixedpoint | both")
      ->check(CLI::IsMember({"laurent", "fixedpoint", "both"}));
  cmd_solve->add_option("--K", solve_K, "Laurent truncation order");
  cmd_solve->add_option("--l", solve_l, "decay scale for certificates");
  cmd_solve->add_option("--eps", solve_eps, "certificate margin");
  cmd_solve->add_option("--tolerance", solve_tol, "fixed-point tolerance");
  cmd_solve->add_option("--out", solve_out, "output CSV path")->required();

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo moment study");
  std::vector<int> sim_N;
  int sim_samples = 100, sim_kmax = 6;
  double sim_scale = 2.0, sim_amp = 1.0;
  std::uint64_t sim_seed = 1;
  std::vector<std::string> sim_z{"0,2"};
  std::string sim_out;
  bool sim_dump = false;
  cmd_sim->add_option("--N", sim_N, "dimension ladder")->required();
  cmd_sim->add_option("--samples", sim_samples, "samples per dimension");
  cmd_sim->add_option("--kmax", sim_kmax, "highest moment order");
  cmd_sim->add_option("--kernel-scale", sim_scale, "ensemble kernel scale l'");
  cmd_sim->add_option("--amplitude", sim_amp, "ensemble amplitude a");
  cmd_sim->add_option("--seed", sim_seed, "base seed");
  cmd_sim->add_option("--z", sim_z, "Stieltjes grid points, each re,im");
  cmd_sim->add_flag("--dump-eigenvalues", sim_dump, "write one spectrum file per sample");
  cmd_sim->add_option("--out", sim_out, "output directory");

  // decay
  auto* cmd_decay = app.add_subcommand("decay", "off-diagonal decay profile");
  std::string decay_op, decay_out, decay_z = "0,10";
  int decay_K = 12;
  double decay_l = 1.0, decay_eps = 1.0;
  cmd_decay->add_option("--operator", decay_op, ".covop file")->required();
  cmd_decay->add_option("--z", decay_z, "evaluation point re,im");
  cmd_decay->add_option("--l", decay_l, "decay scale")->required();
  cmd_decay->add_option("--eps", decay_eps, "decay margin");
  cmd_decay->add_option("--K", decay_K, "Laurent truncation order");
  cmd_decay->add_option("--out", decay_out, "output CSV path")->required();

  // compare
  auto* cmd_cmp = app.add_subcommand(
      "compare", "coefficients + dual solve + sampling gap table in one run");
  std::string cmp_op, cmp_out;
  int cmp_K = 6, cmp_samples = 100;
  double cmp_l = 1.0, cmp_eps = 1.0;
  std::uint64_t cmp_seed = 1;
  std::vector<std::string> cmp_z{"0,2"};
  cmd_cmp->add_option("--operator", cmp_op, ".covop file (filtered kind)")->required();
  cmd_cmp->add_option("--K", cmp_K, "highest coefficient order");
  cmd_cmp->add_option("--l", cmp_l, "decay scale")->required();
  cmd_cmp->add_option("--eps", cmp_eps, "decay margin");
  cmd_cmp->add_option("--samples", cmp_samples, "Monte Carlo samples");
  cmd_cmp->add_option("--seed", cmp_seed, "base seed");
  cmd_cmp->add_option("--z", cmp_z, "evaluation points, each re,im");
  cmd_cmp->add_option("--out", cmp_out, "output directory");

  // makeop (helper, not part of the experiment pipeline)
  auto* cmd_mkop = app.add_subcommand("makeop", "write a built-in operator file");
  std::string mkop_kind = "filtered", mkop_out;
  int mkop_N = 32;
  double mkop_scale = 2.0, mkop_amp = 1.0;
  cmd_mkop->add_option("--kind", mkop_kind, "wigner | filtered")
      ->check(CLI::IsMember({"wigner", "filtered"}));
  cmd_mkop->add_option("--N", mkop_N, "dimension")->required();
  cmd_mkop->add_option("--kernel-scale", mkop_scale, "filtered kernel scale l'");
  cmd_mkop->add_option("--amplitude", mkop_amp, "filtered amplitude a");
  cmd_mkop->add_option("--out", mkop_out, ".covop path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (cmd_mkop->parsed()) {
    const auto S = mkop_kind == "wigner"
                       ? mde::CovarianceOperator::wigner(mkop_N)
                       : mde::CovarianceOperator::filtered_gaussian(
                             mkop_N, mkop_scale, mkop_amp);
    std::ofstream os(mkop_out);
    if (!os) throw mde::validation_error("cannot write " + mkop_out);
    os << S.serialize();
    return 0;
  }

  if (cmd_trees->parsed()) {
    const auto trees = mde::enumerate_trees(trees_k);
    std::cout << "count " << trees.size() << "\n";
    for (const auto& t : trees) std::cout << t.encode() << "\n";
    return 0;
  }

  if (cmd_coeffs->parsed()) {
    const auto S = load_operator(coeffs_op);
    const auto lc = mde::compute_coefficients(S, coeffs_K, coeffs_l, coeffs_eps);
    const fs::path dir = fs::absolute(coeffs_out);
    if (fs::exists(dir / "manifest.txt")) {
      const auto existing = mde::read_coefficients(dir);
      if (existing.fingerprint != lc.fingerprint)
        throw mde::validation_error(
            "coeffs: output directory holds coefficients of a different operator");
    }
    fs::create_directories(dir);
    mde::write_coefficients(dir, lc);
    std::cout << "wrote " << (coeffs_K + 1) << " coefficients to " << dir.string()
              << "\n";
    return 0;
  }

  if (cmd_solve->parsed()) {
    const auto S = load_operator(solve_op);
    std::vector<complex_t> zs;
    for (const auto& s : solve_z) {
      const complex_t z = parse_z(s);
      if (z.imag() <= 0)
        throw mde::validation_error("solve: all z must lie in the upper half plane");
      zs.push_back(z);
    }
    std::ostringstream csv;
    int failures = 0;
    write_solve_csv(csv, S, zs, solve_method, solve_K, solve_l, solve_eps,
                    solve_tol, failures);
    std::ofstream os(solve_out);
    if (!os) throw mde::validation_error("cannot write " + solve_out);
    os << csv.str();
    if (failures > 0 && failures >= static_cast<int>(zs.size()))
      throw mde::numerical_error("solve: every evaluation point failed");
    return 0;
  }

  if (cmd_sim->parsed()) {
    std::vector<mde::EnsembleConfig> configs;
    for (int N : sim_N)
      configs.push_back({N, sim_scale, sim_amp, sim_seed});
    std::vector<complex_t> zs;
    for (const auto& s : sim_z) zs.push_back(parse_z(s));
    const fs::path dir = resolve_out_dir(sim_out, sim_seed);
    const auto rep =
        mde::moment_convergence_study(configs, sim_kmax, sim_samples, zs, threads);

    std::ofstream gaps(dir / "gaps.csv");
    gaps << "N,k,empirical_mean,std_error,reference,gap\n";
    for (const auto& g : rep.moment_gaps)
      gaps << g.N << "," << g.k << "," << fmt(g.empirical_mean) << ","
           << fmt(g.std_error) << "," << fmt(g.reference) << "," << fmt(g.gap)
           << "\n";
    std::ofstream sg(dir / "stieltjes_gaps.csv");
    sg << "N,z_re,z_im,emp_re,emp_im,se_re,se_im,ref_re,ref_im,gap\n";
    for (const auto& g : rep.stieltjes_gaps)
      sg << g.N << "," << fmt(g.z.real()) << "," << fmt(g.z.imag()) << ","
         << fmt(g.empirical_mean.real()) << "," << fmt(g.empirical_mean.imag())
         << "," << fmt(g.std_error_re) << "," << fmt(g.std_error_im) << ","
         << fmt(g.reference.real()) << "," << fmt(g.reference.imag()) << ","
         << fmt(g.gap) << "\n";

    if (sim_dump) {
      for (const auto& cfg : configs) {
        const auto batch = mde::sample_batch(cfg, sim_samples, 0, threads);
        for (int i = 0; i < batch.n_samples; ++i) {
          char name[64];
          std::snprintf(name, sizeof(name), "eigs_N%d_%05d.txt", cfg.N, i);
          std::ofstream es(dir / name);
          for (int j = 0; j < batch.eigenvalue_sets[i].size(); ++j)
            es << fmt(batch.eigenvalue_sets[i][j]) << "\n";
        }
      }
    }

    ManifestWriter man;
    {
      std::string ns;
      for (int N : sim_N) ns += (ns.empty() ? "" : " ") + std::to_string(N);
      man.add("command", "simulate");
      man.add("N", ns);
      man.add("samples", std::to_string(sim_samples));
      man.add("kmax", std::to_string(sim_kmax));
      man.add("kernel_scale", fmt(sim_scale));
      man.add("amplitude", fmt(sim_amp));
      man.add("seed", std::to_string(sim_seed));
      std::string zsstr;
      for (const auto& s : sim_z) zsstr += (zsstr.empty() ? "" : " ") + s;
      man.add("z", zsstr);
      man.add("dropped_samples", std::to_string(rep.total_dropped));
    }
    man.write(dir);
    std::cout << "study written to " << dir.string() << "\n";
    return 0;
  }

  if (cmd_decay->parsed()) {
    const auto S = load_operator(decay_op);
    const complex_t z = parse_z(decay_z);
    if (z.imag() <= 0)
      throw mde::validation_error("decay: z must lie in the upper half plane");
    const auto lc = mde::compute_coefficients(S, decay_K, decay_l, decay_eps);
    const auto ev = mde::laurent_M(lc, z, decay_K);
    const auto rep = mde::verify_offdiagonal_decay(ev.M, decay_l, decay_eps);
    std::ofstream os(decay_out);
    if (!os) throw mde::validation_error("cannot write " + decay_out);
    os << "# norm " << fmt(rep.norm) << "\n";
    os << "# fitted_slope " << (rep.slope_defined ? fmt(rep.fitted_slope) : "nan")
       << "\n";
    os << "# reference_slope " << fmt(rep.reference_slope) << "\n";
    os << "distance,max_abs_entry\n";
    for (std::size_t d = 0; d < rep.profile.size(); ++d)
      os << d << "," << fmt(rep.profile[d]) << "\n";
    return 0;
  }

  if (cmd_cmp->parsed()) {
    const auto S = load_operator(cmp_op);
    if (S.kind() != mde::CovarianceOperator::Kind::filtered)
      throw mde::validation_error("compare: sampling requires a filtered operator");
    const fs::path dir = resolve_out_dir(cmp_out, cmp_seed);
    const auto lc = mde::compute_coefficients(S, cmp_K, cmp_l, cmp_eps);
    mde::write_coefficients(dir / "coefficients", lc);

    std::vector<complex_t> zs;
    for (const auto& s : cmp_z) {
      const complex_t z = parse_z(s);
      if (z.imag() <= 0)
        throw mde::validation_error("compare: all z must lie in the upper half plane");
      zs.push_back(z);
    }
    {
      std::ostringstream csv;
      int failures = 0;
      write_solve_csv(csv, S, zs, "both", std::min(cmp_K, mde::kMaxCoefficientOrder),
                      cmp_l, cmp_eps, 1e-12, failures);
      std::ofstream os(dir / "solve.csv");
      os << csv.str();
    }
    {
      std::vector<mde::EnsembleConfig> configs{
          {S.dim(), S.kernel_scale(), S.amplitude(), cmp_seed}};
      const auto rep = mde::moment_convergence_study(configs, 2 * cmp_K, cmp_samples,
                                                     zs, threads);
      std::ofstream gaps(dir / "gaps.csv");
      gaps << "N,k,empirical_mean,std_error,reference,gap\n";
      for (const auto& g : rep.moment_gaps)
        gaps << g.N << "," << g.k << "," << fmt(g.empirical_mean) << ","
             << fmt(g.std_error) << "," << fmt(g.reference) << "," << fmt(g.gap)
             << "\n";
    }
    ManifestWriter man;
    man.add("command", "compare");
    man.add("operator", fs::absolute(cmp_op).string());
    man.add("K", std::to_string(cmp_K));
    man.add("l", fmt(cmp_l));
    man.add("eps", fmt(cmp_eps));
    man.add("samples", std::to_string(cmp_samples));
    man.add("seed", std::to_string(cmp_seed));
    man.write(dir);
    std::cout << "comparison written to " << dir.string() << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mde::resource_limit_error& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return kExitResource;
  } catch (const mde::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const mde::validation_error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
