// Command-line front end: data-set generation, single solves, experiment
// studies, and EOC post-processing.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ddfem/harness.hpp"
#include "ddfem/qsap.hpp"

using namespace ddfem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string f;
  while (std::getline(in, f, sep)) out.push_back(f);
  return out;
}

void write_report_csv(const std::string& path, const SolveReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report file '" + path + "'");
  out << "iteration,objective,gamma,wall_ms\n";
  char buf[160];
  for (std::size_t i = 0; i < rep.objective_history.size(); ++i) {
    const double gamma = i < rep.gamma_history.size() ? rep.gamma_history[i] : 0.0;
    const double wall = i < rep.wall_history.size() ? rep.wall_history[i] : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,%.9e,%.9e,%.9e\n", i + 1, rep.objective_history[i],
                  gamma, wall);
    out << buf;
  }
}

int largest_coarse_subset(int elements) {
  // Largest m with m^elements within the exhaustive-solver guard.
  int m = 1;
  while (std::pow(static_cast<double>(m + 1), elements) <= 1e7 + 0.5) ++m;
  return m;
}

Assignment coarse_exact_initial(const EquilibriumProjector& fine_proj,
                                const LocalDataSet& data, const Problem& prob) {
  const Mesh coarse = build_mesh(2);
  const EquilibriumProjector coarse_proj(coarse, prob.f);
  const int take = std::min(16, largest_coarse_subset(coarse.num_triangles()));
  const std::vector<int> subset = farthest_point_subsample(data, take);
  std::vector<Vec4> pts;
  pts.reserve(subset.size());
  for (int i : subset) pts.push_back(data.point(i));
  const LocalDataSet coarse_data(std::move(pts), {});
  const QsapInstance coarse_inst(coarse_proj, coarse_data);
  const auto [coarse_opt, coarse_obj] = brute_force_solve(coarse_inst);
  std::fprintf(stderr, "coarse exact solve: %zu points, objective %.6e\n", subset.size(),
               coarse_obj);

  const Mesh& fine = fine_proj.mesh();
  Assignment init;
  init.idx.resize(fine.num_triangles());
  for (int t = 0; t < fine.num_triangles(); ++t)
    init.idx[t] = subset[coarse_opt.idx[coarse.locate(fine.centroid(t))]];
  return init;
}

struct StudyOptions {
  ExperimentSpec spec;
  std::string out_path;
};

void apply_config_file(const std::string& path, std::map<std::string, std::string>& kv) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven finite elements for scalar conductivity"};
  app.require_subcommand(1);

  // generate-data ------------------------------------------------------------
  auto* gen = app.add_subcommand("generate-data", "Sample a material data set");
  std::string g_law = "fourier", g_out, g_sampling;
  int g_m = 11025;
  double g_noise = 0.0;
  std::uint64_t g_seed = 0;
  gen->add_option("--law", g_law, "fourier | arctan")->check(CLI::IsMember({"fourier", "arctan"}));
  gen->add_option("--m", g_m, "number of data points")->required();
  gen->add_option("--noise", g_noise, "uniform noise bound on all 4 components");
  gen->add_option("--seed", g_seed, "RNG seed (random sampling)");
  gen->add_option("--out", g_out, "output path")->required();
  gen->add_option("--sampling", g_sampling, "grid | random (default by law)")
      ->check(CLI::IsMember({"grid", "random"}));

  // solve ---------------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "Run one solver on one data set");
  std::string s_alg = "pg", s_data, s_report, s_y0 = "zero", s_init = "ps-multistart",
              s_init_file;
  int s_n = 20, s_K = 20, s_pod_cap = 40, s_snapshot_cap = 200;
  double s_gamma0 = 1.4, s_eps1 = 0.002, s_eps2 = 0.001, s_eps3 = 0.01;
  std::uint64_t s_seed = 0;
  solve->add_option("--algorithm", s_alg, "pg | ps | dr1 | dr2 | local-search")
      ->check(CLI::IsMember({"pg", "ps", "dr1", "dr2", "local-search"}));
  solve->add_option("--mesh-n", s_n, "grid resolution N")->required();
  solve->add_option("--data", s_data, "data set path")->required();
  solve->add_option("--gamma0", s_gamma0, "initial step size (ps)");
  solve->add_option("--seed", s_seed, "seed for random initialization");
  solve->add_option("--report", s_report, "per-iteration CSV output");
  solve->add_option("--y0", s_y0, "zero | random")->check(CLI::IsMember({"zero", "random"}));
  solve->add_option("--init", s_init, "local-search initialization")
      ->check(CLI::IsMember({"ps-multistart", "coarse-exact", "file"}));
  solve->add_option("--init-file", s_init_file, "assignment file for --init file");
  solve->add_option("--K", s_K, "nearest neighbors per element (local-search)");
  solve->add_option("--eps1", s_eps1, "exact-evaluation trigger");
  solve->add_option("--eps2", s_eps2, "basis-update trigger");
  solve->add_option("--eps3", s_eps3, "optimistic verification margin");
  solve->add_option("--pod-cap", s_pod_cap, "reduced basis size cap");
  solve->add_option("--snapshot-cap", s_snapshot_cap, "snapshot window size");

  // study ----------------------------------------------------------------------
  auto* study = app.add_subcommand("study", "Run an experiment grid to CSV");
  std::string st_config, st_law, st_mesh, st_m, st_noise, st_algs, st_sampling, st_out;
  std::string st_seed, st_gamma0;
  study->add_option("--config", st_config, "key=value config file");
  study->add_option("--law", st_law, "fourier | arctan");
  study->add_option("--mesh-n", st_mesh, "comma list of N values");
  study->add_option("--m", st_m, "comma list of data sizes");
  study->add_option("--noise", st_noise, "comma list of noise bounds");
  study->add_option("--algorithms", st_algs, "comma list: pg,ps,dr1,dr2,fem");
  study->add_option("--seed", st_seed, "data-set seed");
  study->add_option("--gamma0", st_gamma0, "initial step size for ps");
  study->add_option("--sampling", st_sampling, "grid | random");
  study->add_option("--out", st_out, "output CSV (default stdout)");

  // eoc ------------------------------------------------------------------------
  auto* eoc = app.add_subcommand("eoc", "Convergence orders from a study CSV");
  std::string e_in, e_out;
  eoc->add_option("--in", e_in, "study CSV")->required();
  eoc->add_option("--out", e_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const LocalDataSet data = make_dataset(g_law, g_m, g_noise, g_seed, g_sampling);
      save_dataset(data, g_out);
      std::printf("wrote %d points (law=%s noise=%g seed=%llu) to %s\n", data.size(),
                  data.meta().law.c_str(), data.meta().noise,
                  static_cast<unsigned long long>(data.meta().seed), g_out.c_str());
      return 0;
    }

    if (*solve) {
      const LocalDataSet data = load_dataset(s_data);
      const Problem prob = problem_by_law(data.meta().law);
      const Mesh mesh = build_mesh(s_n);
      const EquilibriumProjector proj(mesh, prob.f);

      SolveReport rep;
      if (s_alg == "local-search") {
        const QsapInstance inst(proj, data);
        LocalSearchConfig lcfg;
        lcfg.K = s_K;
        lcfg.eps1 = s_eps1;
        lcfg.eps2 = s_eps2;
        lcfg.eps3 = s_eps3;
        lcfg.pod.basis_cap = s_pod_cap;
        lcfg.pod.snapshot_cap = s_snapshot_cap;

        Assignment init;
        std::vector<EquilibriumState> snapshots;
        if (s_init == "ps-multistart") {
          SolverConfig pcfg;
          pcfg.algorithm = Algorithm::PS;
          pcfg.gamma0 = s_gamma0;
          pcfg.init = SolverConfig::Init::RandomBox;
          std::vector<SolveReport> runs;
          for (int k = 0; k < 10; ++k) {
            pcfg.seed = s_seed + k;
            runs.push_back(run_ps(proj, data, pcfg));
          }
          std::size_t best = 0;
          for (std::size_t k = 1; k < runs.size(); ++k)
            if (runs[k].best_objective < runs[best].best_objective) best = k;
          init = runs[best].best_assignment;
          for (std::size_t k = 0; k < runs.size(); ++k)
            if (k != best) snapshots.push_back(runs[k].best_z);
          std::fprintf(stderr, "multistart best objective %.6e\n", runs[best].best_objective);
        } else if (s_init == "coarse-exact") {
          init = coarse_exact_initial(proj, data, prob);
        } else {
          std::ifstream in(s_init_file);
          if (!in) throw std::runtime_error("cannot open --init-file '" + s_init_file + "'");
          int v;
          while (in >> v) init.idx.push_back(v);
          if (static_cast<int>(init.idx.size()) != mesh.num_triangles())
            throw std::runtime_error("--init-file holds " + std::to_string(init.idx.size()) +
                                     " entries, mesh has " +
                                     std::to_string(mesh.num_triangles()) + " elements");
        }
        rep = local_search(inst, init, lcfg, snapshots);
      } else {
        SolverConfig cfg;
        cfg.algorithm = detail::algorithm_by_name(s_alg);
        cfg.gamma0 = s_gamma0;
        cfg.seed = s_seed;
        cfg.init = s_y0 == "random" ? SolverConfig::Init::RandomBox : SolverConfig::Init::Zero;
        rep = run_solver(proj, data, cfg);
      }

      const ErrorReport err = compute_errors(mesh, rep.best_z.u, prob.exact);
      std::printf("algorithm   %s\n", s_alg.c_str());
      std::printf("objective   %.6e\n", rep.best_objective);
      std::printf("err_l2      %.6e\n", err.err_l2);
      std::printf("err_h1      %.6e\n", err.err_h1);
      std::printf("iterations  %d\n", rep.iterations);
      std::printf("reason      %s\n", to_string(rep.reason));
      std::printf("wall_ms     %.1f\n", rep.wall_ms);
      if (!s_report.empty()) write_report_csv(s_report, rep);
      return 0;
    }

    if (*study) {
      std::map<std::string, std::string> kv;
      if (!st_config.empty()) apply_config_file(st_config, kv);
      // Command-line flags override config-file keys.
      if (!st_law.empty()) kv["law"] = st_law;
      if (!st_mesh.empty()) kv["mesh_n"] = st_mesh;
      if (!st_m.empty()) kv["m"] = st_m;
      if (!st_noise.empty()) kv["noise"] = st_noise;
      if (!st_algs.empty()) kv["algorithms"] = st_algs;
      if (!st_seed.empty()) kv["seed"] = st_seed;
      if (!st_gamma0.empty()) kv["gamma0"] = st_gamma0;
      if (!st_sampling.empty()) kv["sampling"] = st_sampling;
      if (!st_out.empty()) kv["out"] = st_out;

      ExperimentSpec spec;
      if (kv.count("law")) spec.law = kv["law"];
      for (const auto& v : split(kv.count("mesh_n") ? kv["mesh_n"] : "", ','))
        if (!v.empty()) spec.mesh_ns.push_back(std::stoi(v));
      for (const auto& v : split(kv.count("m") ? kv["m"] : "", ','))
        if (!v.empty()) spec.data_sizes.push_back(std::stoi(v));
      for (const auto& v : split(kv.count("noise") ? kv["noise"] : "0", ','))
        if (!v.empty()) spec.noises.push_back(std::stod(v));
      for (const auto& v : split(kv.count("algorithms") ? kv["algorithms"] : "", ','))
        if (!v.empty()) spec.algorithms.push_back(v);
      if (kv.count("seed")) spec.seed = std::stoull(kv["seed"]);
      if (kv.count("gamma0")) spec.gamma0 = std::stod(kv["gamma0"]);
      if (kv.count("sampling")) spec.sampling = kv["sampling"];
      if (kv.count("record_wall_time")) spec.record_wall_time = kv["record_wall_time"] != "0";

      if (kv.count("out") && !kv["out"].empty()) {
        std::ofstream out(kv["out"]);
        if (!out) throw std::runtime_error("cannot open output '" + kv["out"] + "'");
        run_experiment(spec, out);
        std::printf("wrote %s\n", kv["out"].c_str());
      } else {
        run_experiment(spec, std::cout);
      }
      return 0;
    }

    if (*eoc) {
      std::ifstream in(e_in);
      if (!in) throw std::runtime_error("cannot open '" + e_in + "'");
      std::string line;
      if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
      const std::vector<std::string> header = split(line, ',');
      auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
          if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("CSV misses column '" + name + "'");
      };
      const int c_n = col("n"), c_m = col("m"), c_noise = col("noise"), c_alg = col("algorithm"),
                c_l2 = col("err_l2"), c_h1 = col("err_h1");
      struct Row {
        int n;
        double l2, h1;
      };
      std::map<std::string, std::vector<Row>> groups;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        const std::string key = f[c_alg] + "," + f[c_m] + "," + f[c_noise];
        groups[key].push_back({std::stoi(f[c_n]), std::stod(f[c_l2]), std::stod(f[c_h1])});
      }
      std::ostringstream out;
      out << "algorithm,m,noise,n_coarse,n_fine,eoc_l2,eoc_h1\n";
      char buf[200];
      for (auto& [key, rows] : groups) {
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.n < b.n; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
          const double h1 = std::sqrt(2.0) / rows[i - 1].n, h2 = std::sqrt(2.0) / rows[i].n;
          std::snprintf(buf, sizeof buf, "%s,%d,%d,%.6f,%.6f\n", key.c_str(), rows[i - 1].n,
                        rows[i].n, compute_eoc(rows[i - 1].l2, h1, rows[i].l2, h2),
                        compute_eoc(rows[i - 1].h1, h1, rows[i].h1, h2));
          out << buf;
        }
      }
      if (!e_out.empty()) {
        std::ofstream of(e_out);
        if (!of) throw std::runtime_error("cannot open output '" + e_out + "'");
        of << out.str();
      } else {
        std::cout << out.str();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
