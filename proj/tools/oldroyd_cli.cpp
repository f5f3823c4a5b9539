// oldroyd: simulate | ensemble | refine | verify
//
// Exit codes: 0 success (divergent runs are data), 1 verification failure,
// 2 configuration or usage error, 3 I/O error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oldroyd/oldroyd.hpp"

namespace fs = std::filesystem;
using namespace oldroyd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

RunConfig load(const Common& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
  if (opt.seed) cfg.master_seed = *opt.seed;
  return cfg;
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  return os;
}

void finish(std::ofstream& os, const fs::path& file) {
  os.flush();
  if (!os) throw IoError("failed writing " + file.string());
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  auto os = open_out(file);
  os << j.dump(2) << '\n';
  finish(os, file);
}

void write_config_copy(const fs::path& dir, const RunConfig& cfg) {
  const auto file = dir / "config.ini";
  auto os = open_out(file);
  os << provenance(cfg).comment_line() << '\n' << serialize_config(cfg);
  finish(os, file);
}

int cmd_simulate(const Common& opt, const std::string& replay) {
  auto cfg = load(opt);
  cfg.validate();
  const auto setup = cfg.setup();
  const auto prov = provenance(cfg);
  const auto initial = make_initial_state(setup.grid, cfg.initial, cfg.master_seed);
  auto run = [&] {
    if (replay.empty()) return simulate(initial, setup, derive_seed(cfg.master_seed, SeedStream::noise, 0));
    NoisePath path;
    try {
      path = load_noise_path(replay);
    } catch (const std::exception& e) {
      throw IoError(e.what());
    }
    return simulate_replay(initial, setup, path);
  };
  const auto res = run();
  const auto dir = prepare_out(opt.out_dir);
  write_config_copy(dir, cfg);
  {
    const auto file = dir / "energy.csv";
    auto os = open_out(file);
    write_energy_csv(os, res.records, prov);
    finish(os, file);
  }
  write_json(dir / "stop.json", to_json(res.stop, prov));
  if (res.noise_path) {
    const auto file = dir / "noise_path.bin";
    try {
      save_noise_path(file.string(), *res.noise_path);
    } catch (const std::exception& e) {
      throw IoError(e.what());
    }
  }
  std::cout << "stop: " << to_string(res.stop.kind) << " at t = " << format_double(res.stop.t_stop)
            << ", E_N = " << format_double(res.stop.energy) << '\n';
  return kExitOk;
}

int cmd_ensemble(const Common& opt, std::optional<std::uint64_t> runs, std::optional<double> threshold,
                 const std::vector<double>& deltas) {
  auto cfg = load(opt);
  if (runs) cfg.ensemble.runs = *runs;
  if (threshold) cfg.monitor.threshold = *threshold;
  if (!deltas.empty()) cfg.ensemble.deltas = deltas;
  if (opt.threads) cfg.ensemble.threads = *opt.threads;
  cfg.validate();
  try {
    cfg.ensemble.validate(cfg.stepper.horizon);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto dir = prepare_out(opt.out_dir);
  const auto res = run_ensemble(cfg.setup(), cfg.initial, cfg.ensemble, cfg.master_seed);
  write_config_copy(dir, cfg);
  write_json(dir / "ensemble.json", res.to_json(provenance(cfg)));
  std::cout << "N = " << format_double(res.threshold) << ", runs = " << res.runs
            << ", divergences = " << res.divergences << '\n';
  for (std::size_t i = 0; i < res.deltas.size(); ++i) {
    std::cout << "delta " << format_double(res.deltas[i]) << ": P = " << format_double(res.survival[i]) << " ["
              << format_double(res.intervals[i].lower) << ", " << format_double(res.intervals[i].upper) << "]\n";
  }
  return kExitOk;
}

int cmd_refine(const Common& opt, const std::vector<double>& cutoffs, std::optional<std::uint64_t> paths) {
  auto cfg = load(opt);
  if (!cutoffs.empty()) cfg.refine.cutoffs = cutoffs;
  if (paths) cfg.refine.paths = *paths;
  if (opt.threads) cfg.refine.threads = *opt.threads;
  if (!std::is_sorted(cfg.refine.cutoffs.begin(), cfg.refine.cutoffs.end())) {
    std::sort(cfg.refine.cutoffs.begin(), cfg.refine.cutoffs.end());
    std::cerr << "warning: refine cutoffs reordered ascending to " << config_detail::from_list(cfg.refine.cutoffs)
              << '\n';
  }
  cfg.validate();
  const auto setup = cfg.setup();
  try {
    cfg.refine.validate(*setup.grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double needed = cfg.s + 2.0 + 0.5 * cfg.grid.dim;
  if (!(cfg.initial.decay > needed)) {
    throw ConfigError("initial.decay = " + format_double(cfg.initial.decay) + " must exceed s + 2 + dim/2 = " +
                      format_double(needed) + " for refinement");
  }
  const auto dir = prepare_out(opt.out_dir);
  const auto res = refinement_study(setup, cfg.initial, cfg.refine, cfg.master_seed);
  write_config_copy(dir, cfg);
  write_json(dir / "refine.json", res.to_json(provenance(cfg)));
  for (const auto& p : res.pairs) {
    std::cout << "(" << format_double(p.n) << ", " << format_double(p.m)
              << "): mean sup |dv| = " << format_double(p.mean_sup_v)
              << ", mean sup |dtau| = " << format_double(p.mean_sup_tau) << '\n';
  }
  std::cout << "fitted rate = " << format_double(res.fitted_rate) << '\n';
  return kExitOk;
}

int cmd_verify(const Common& opt, std::uint64_t trials, bool write) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
  if (opt.seed) cfg.master_seed = *opt.seed;
  SuiteOptions so;
  so.dim = cfg.grid.dim;
  so.modes = cfg.grid.modes;
  so.s = cfg.s > 0.0 ? cfg.s : 2.0;
  so.trials = trials;
  try {
    so.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto rep = inequality_suite(cfg.master_seed, so);
  for (const auto& c : rep.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " worst = " << format_double(c.worst)
              << " tol = " << format_double(c.tolerance) << '\n';
  }
  for (const auto& c : rep.constants) {
    std::cout << "fitted " << c.name << ": [" << format_double(c.min_ratio) << ", " << format_double(c.max_ratio)
              << "]\n";
  }
  if (write) {
    const auto dir = prepare_out(opt.out_dir);
    write_json(dir / "verify.json", rep.to_json(provenance(cfg)));
  }
  return rep.passed() ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Oldroyd pseudo-spectral simulator"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", common.config_path, "INI configuration file");
    if (config_required) c->required();
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_option("--seed", common.seed, "master seed (overrides [seeds] master)");
  };

  auto* simulate_cmd = app.add_subcommand("simulate", "single run: energy CSV and stopping event");
  add_common(simulate_cmd, true);
  std::string replay;
  simulate_cmd->add_option("--replay", replay, "drive the run with a recorded noise path");

  auto* ensemble_cmd = app.add_subcommand("ensemble", "survival probabilities over seeded runs");
  add_common(ensemble_cmd, true);
  std::optional<std::uint64_t> runs;
  std::optional<double> threshold;
  std::vector<double> deltas;
  ensemble_cmd->add_option("--runs", runs, "number of runs (>= 30)");
  ensemble_cmd->add_option("--threads", common.threads, "worker threads");
  ensemble_cmd->add_option("--N", threshold, "energy threshold");
  ensemble_cmd->add_option("--deltas", deltas, "survival times")->delimiter(',');

  auto* refine_cmd = app.add_subcommand("refine", "common-noise runs at increasing cutoffs");
  add_common(refine_cmd, true);
  std::vector<double> cutoffs;
  std::optional<std::uint64_t> paths;
  refine_cmd->add_option("--cutoffs", cutoffs, "Galerkin cutoffs")->delimiter(',');
  refine_cmd->add_option("--paths", paths, "noise paths");
  refine_cmd->add_option("--threads", common.threads, "worker threads");

  auto* verify_cmd = app.add_subcommand("verify", "randomized spectral identity suite");
  add_common(verify_cmd, false);
  std::uint64_t trials = SuiteOptions::kMinTrials;
  verify_cmd->add_option("--trials", trials, "random fields per check (>= 100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(common, replay);
    if (*ensemble_cmd) return cmd_ensemble(common, runs, threshold, deltas);
    if (*refine_cmd) return cmd_refine(common, cutoffs, paths);
    if (*verify_cmd) return cmd_verify(common, trials, verify_cmd->count("--out") > 0);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitConfig;
}
