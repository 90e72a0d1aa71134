// Command-line driver for the porous-medium experiments.
//
//   spme_cli converge-det --d 1 --J-list 8,16,32 --N-list 8,16 --out results
//   spme_cli converge-stoch --J-list 64 --N-list 128 --samples 1000 --seed 7
//   spme_cli --config study.json --samples 10
//
// A JSON config supplies defaults; flags given on the command line win.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spme/spme.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list: '" + s + "'");
  return out;
}

void apply_json(const nlohmann::json& j, spme::ExperimentConfig& cfg) {
  if (j.contains("experiment")) {
    const auto k = spme::parse_experiment(j.at("experiment").get<std::string>());
    if (!k) throw std::invalid_argument("config: unknown experiment");
    cfg.kind = *k;
  }
  if (j.contains("J")) cfg.J_list = j.at("J").get<std::vector<int>>();
  if (j.contains("N")) cfg.N_list = j.at("N").get<std::vector<int>>();
  if (j.contains("pairs")) cfg.pairs = j.at("pairs").get<bool>();
  if (j.contains("p")) cfg.p = j.at("p").get<double>();
  if (j.contains("d")) cfg.d = j.at("d").get<int>();
  if (j.contains("L")) cfg.L = j.at("L").get<double>();
  if (j.contains("T")) cfg.T = j.at("T").get<double>();
  if (j.contains("t_lo")) cfg.t_lo = j.at("t_lo").get<double>();
  if (j.contains("sigma")) {
    const auto k = spme::parse_noise(j.at("sigma").get<std::string>());
    if (!k) throw std::invalid_argument("config: unknown sigma");
    cfg.sigma = *k;
  }
  if (j.contains("sigma0")) cfg.sigma0 = j.at("sigma0").get<double>();
  if (j.contains("samples")) cfg.samples = j.at("samples").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("quad_order")) cfg.quad_order = j.at("quad_order").get<int>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("projection_norm")) cfg.projection_norm = j.at("projection_norm").get<double>();
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

void print_slope(const char* label, const spme::SlopeFit& f) {
  std::printf("%s: slope %.4f (residual %.2e, %d levels)\n", label, f.slope, f.residual, f.levels);
}

/// Prints the slope along every full row and column with at least 3 levels.
void print_table_slopes(const spme::ErrorTable& t, const spme::ExperimentConfig& cfg) {
  if (cfg.pairs) return;
  if (cfg.J_list.size() >= 3) {
    for (int N : cfg.N_list) {
      try {
        print_slope(("h-slope at N=" + std::to_string(N)).c_str(), t.spatial_slope(N, cfg.J_list, cfg.L));
      } catch (const std::exception&) {
      }
    }
  }
  if (cfg.N_list.size() >= 3) {
    for (int J : cfg.J_list) {
      try {
        print_slope(("tau-slope at J=" + std::to_string(J)).c_str(), t.temporal_slope(J, cfg.N_list, cfg.T));
      } catch (const std::exception&) {
      }
    }
  }
}

int write_table(const spme::ErrorTable& t, const spme::ExperimentConfig& cfg, const fs::path& out,
                const std::string& stem) {
  {
    auto os = open_out(out, stem + "_long.csv");
    t.write_long_csv(os);
  }
  {
    auto os = open_out(out, stem + "_wide.csv");
    t.write_wide_csv(os);
  }
  t.write_wide_csv(std::cout);
  print_table_slopes(t, cfg);
  for (const auto& e : t.entries()) {
    if (!e.ok()) std::fprintf(stderr, "solver failure at J=%d N=%d: %s\n", e.J, e.N, e.note.c_str());
  }
  return t.failures() == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Very-weak finite element experiments for stochastic porous-medium equations"};
  spme::ExperimentConfig cfg;

  std::string experiment, config_path, J_list, N_list, sigma, out = "spme_out", dump_mass;
  int J_dump = 0;
  bool pairs = false;
  app.add_option("experiment,--experiment", experiment,
                 "project | converge-det | converge-stoch | spacetime | support");
  app.add_option("--config", config_path, "JSON file with defaults")->check(CLI::ExistingFile);
  app.add_option("--J-list", J_list, "Comma-separated cells per direction");
  app.add_option("--N-list", N_list, "Comma-separated step counts");
  app.add_flag("--pairs", pairs, "Pair the J and N lists instead of taking all combinations");
  auto* o_p = app.add_option("--p", cfg.p, "Exponent of alpha(u) = |u|^{p-2} u");
  auto* o_d = app.add_option("--d", cfg.d, "Dimension (1 or 2)");
  auto* o_L = app.add_option("--L", cfg.L, "Half width of the domain (-L, L)^d");
  auto* o_T = app.add_option("--T", cfg.T, "Final time");
  auto* o_tlo = app.add_option("--t-lo", cfg.t_lo, "Lower end of the error time window");
  app.add_option("--sigma", sigma, "Noise: none | linear | spacetime");
  auto* o_s0 = app.add_option("--sigma0", cfg.sigma0, "Amplitude of the space-time noise");
  auto* o_samples = app.add_option("--samples", cfg.samples, "Monte-Carlo paths or seeds");
  auto* o_seed = app.add_option("--seed", cfg.seed, "Base seed; path i uses seed + i");
  auto* o_q = app.add_option("--quad-order", cfg.quad_order, "Gauss points per direction for the nonlinear term");
  auto* o_threads = app.add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  auto* o_norm = app.add_option("--projection-norm", cfg.projection_norm, "Exponent of the projection-study norm");
  app.add_option("--out", out, "Output directory for CSV files");
  app.add_option("--dump-mass", dump_mass, "Write the mass matrix triplets of grid --dump-J to this file");
  app.add_option("--dump-J", J_dump, "Cells per direction for --dump-mass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    // Flag values parsed above are reapplied over the JSON defaults.
    const spme::ExperimentConfig from_flags = cfg;
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      nlohmann::json j;
      is >> j;
      apply_json(j, cfg);
      auto keep = [&](CLI::Option* o, auto member) {
        if (o->count() > 0) cfg.*member = from_flags.*member;
      };
      keep(o_p, &spme::ExperimentConfig::p);
      keep(o_d, &spme::ExperimentConfig::d);
      keep(o_L, &spme::ExperimentConfig::L);
      keep(o_T, &spme::ExperimentConfig::T);
      keep(o_tlo, &spme::ExperimentConfig::t_lo);
      keep(o_s0, &spme::ExperimentConfig::sigma0);
      keep(o_samples, &spme::ExperimentConfig::samples);
      keep(o_seed, &spme::ExperimentConfig::seed);
      keep(o_q, &spme::ExperimentConfig::quad_order);
      keep(o_threads, &spme::ExperimentConfig::threads);
      keep(o_norm, &spme::ExperimentConfig::projection_norm);
    }
    if (!experiment.empty()) {
      const auto k = spme::parse_experiment(experiment);
      if (!k) throw std::invalid_argument("unknown experiment '" + experiment + "'");
      cfg.kind = *k;
    }
    if (!J_list.empty()) cfg.J_list = parse_int_list(J_list);
    if (!N_list.empty()) cfg.N_list = parse_int_list(N_list);
    if (pairs) cfg.pairs = true;
    if (!sigma.empty()) {
      const auto k = spme::parse_noise(sigma);
      if (!k) throw std::invalid_argument("unknown noise '" + sigma + "'");
      cfg.sigma = *k;
    }

    if (!dump_mass.empty()) {
      const spme::Grid g(cfg.L, J_dump > 0 ? J_dump : cfg.J_list.front(), cfg.d);
      std::ofstream os(dump_mass);
      spme::assemble_mass(g).write_triplets(os);
      return 0;
    }

    cfg.validate();
    const fs::path dir(out);
    fs::create_directories(dir);

    switch (cfg.kind) {
      case spme::ExperimentKind::project: {
        const auto study = spme::run_projection_study(cfg);
        auto os = open_out(dir, "projection.csv");
        study.write_csv(os);
        study.write_csv(std::cout);
        if (cfg.J_list.size() >= 3) {
          for (const char* target : {"barenblatt", "indicator"}) {
            print_slope((std::string(target) + " P_h").c_str(), study.slope(target, false, cfg.L));
            print_slope((std::string(target) + " R~_h").c_str(), study.slope(target, true, cfg.L));
          }
        }
        return 0;
      }
      case spme::ExperimentKind::converge_det: {
        const auto t = spme::run_convergence_det(cfg, [](const spme::ErrorEntry& e) {
          std::fprintf(stderr, "J=%d N=%d error=%.6g (%.1fs)\n", e.J, e.N, e.error, e.seconds);
        });
        return write_table(t, cfg, dir, "converge_det");
      }
      case spme::ExperimentKind::converge_stoch: {
        const auto t = spme::run_convergence_stoch(cfg, [](const spme::ErrorEntry& e) {
          std::fprintf(stderr, "J=%d N=%d error=%.6g +- %.2g (%d paths, %.1fs)\n", e.J, e.N, e.error, e.std_error,
                       e.samples, e.seconds);
        });
        return write_table(t, cfg, dir, "converge_stoch");
      }
      case spme::ExperimentKind::support: {
        const auto s = spme::run_support_study(cfg);
        auto os = open_out(dir, "support.csv");
        s.write_csv(os);
        std::printf("contained in radius + 2h: %s; touches boundary: %s; worst excess over radius: %.4g\n",
                    s.all_contained() ? "yes" : "no", s.touches_boundary() ? "yes" : "no", s.worst_excess());
        return 0;
      }
      case spme::ExperimentKind::spacetime: {
        const auto r = spme::run_spacetime(cfg);
        {
          auto os = open_out(dir, "spacetime_snapshots.csv");
          r.write_snapshots_csv(os);
        }
        {
          auto os = open_out(dir, "spacetime_support.csv");
          r.support.write_csv(os);
        }
        std::printf("contained in deterministic radius + 2h: %s; worst excess over radius: %.4g\n",
                    r.support.all_contained() ? "yes" : "no", r.support.worst_excess());
        return 0;
      }
    }
  } catch (const spme::SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
