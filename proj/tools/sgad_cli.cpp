// sgad: data generation, training, evaluation, beta tuning, sweeps and plots.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sgad/bench.hpp"
#include "sgad/config.hpp"
#include "sgad/dataset_io.hpp"
#include "sgad/errors.hpp"
#include "sgad/expert.hpp"
#include "sgad/model.hpp"
#include "sgad/train.hpp"

namespace {

using sgad::Settings;

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  Settings overrides;  // from explicit flags
};

// Binds a flag to a settings key; only flags actually given are recorded.
void bind(CLI::App* app, Flags& f, const std::string& flag, const std::string& key,
          const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&f, key](const std::string& v) { f.overrides[key] = v; }, help + " [" + key + "]");
}

void common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "INI config file (a manifest works too)");
  app->add_option("--set", f.sets, "Override any key: section.key=value");
  bind(app, f, "--seed", "run.seed", "Seed");
  bind(app, f, "--out", "run.out", "Output path");
}

Settings resolve(const Flags& f, const Settings& implied = {}) {
  Settings merged = implied;
  if (!f.config.empty()) {
    for (const auto& [k, v] : sgad::load_settings(f.config)) merged[k] = v;
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw sgad::InvalidConfig("--set expects key=value, got '" + s + "'");
    merged[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [k, v] : f.overrides) merged[k] = v;
  return sgad::resolve_settings(merged);
}

void require(const std::string& value, const std::string& key) {
  if (value.empty()) throw sgad::InvalidConfig("config key '" + key + "' is required");
}

void print_row(const sgad::ResultRow& r) {
  std::cout << r.env_id << " preset=" << r.preset << " speed=" << r.goal_speed << " h=" << r.h
            << " n=" << r.n_samples << " " << r.strategy << " beta=" << r.beta
            << " noise=" << r.obs_noise_sigma << ": " << r.successes << "/" << r.n_episodes
            << " success=" << r.success_rate << " [" << r.wilson_lo << ", " << r.wilson_hi
            << "] steps=" << r.mean_steps << " switches=" << r.mean_mode_switches << "\n";
}

sgad::Cell cell_from(const sgad::RunConfig& c) {
  sgad::Cell cell;
  cell.preset = c.preset.name;
  cell.goal_speed = c.env.goal_speed;
  cell.h = c.policy.h;
  cell.n_samples = c.strategy.n_samples;
  cell.strategy = c.strategy.kind;
  cell.beta = c.strategy.guidance.beta;
  cell.obs_noise_sigma = c.env.obs_noise_sigma;
  return cell;
}

void check_env(const sgad::Checkpoint& ck, const sgad::RunConfig& c) {
  if (ck.policy.obs_dim != sgad::obs_dim(c.env.env_id)) {
    throw sgad::InvalidConfig("config key 'env.id': checkpoint was trained on a different environment");
  }
  if (c.policy.h > ck.policy.l) {
    throw sgad::InvalidConfig("config key 'policy.h' exceeds the checkpoint's prediction length");
  }
}

int run_gen_data(const Flags& f) {
  const Settings s = resolve(f);
  const auto c = sgad::build_run_config(s);
  require(c.out, "run.out");
  const auto d = sgad::build_dataset(c.n, c.env, c.preset, c.seed);
  sgad::dataset_write(d, c.out);
  const auto m = sgad::write_manifest(c.out, "gen-data", s, {c.out});
  std::cout << "wrote " << d.trajectories.size() << " demos to " << c.out << " (manifest " << m << ")\n";
  return 0;
}

int run_train(const Flags& f) {
  Settings implied;
  Settings probe = f.overrides;
  if (!f.config.empty()) {
    for (const auto& [k, v] : sgad::load_settings(f.config)) probe.emplace(k, v);
  }
  const auto data_it = probe.find("run.data");
  if (data_it == probe.end() || data_it->second.empty()) {
    throw sgad::InvalidConfig("config key 'run.data' is required");
  }
  const auto dataset = sgad::dataset_read(data_it->second);
  implied["env.id"] = dataset.meta.env_id;
  const Settings s = resolve(f, implied);
  const auto c = sgad::build_run_config(s);
  require(c.out, "run.out");
  if (dataset.meta.env_id != sgad::to_string(c.env.env_id)) {
    throw sgad::InvalidConfig("config key 'env.id' disagrees with the dataset's environment");
  }
  const auto ck = sgad::train(dataset, c.policy, c.train);
  sgad::checkpoint_write(ck, c.out);
  const auto m = sgad::write_manifest(c.out, "train", s, {c.out});
  const auto& curve = ck.train_meta["eval_loss"];
  std::cout << "trained " << c.train.steps << " steps; eval loss " << curve.front()[1] << " -> "
            << curve.back()[1] << "; wrote " << c.out << " (manifest " << m << ")\n";
  return 0;
}

int run_eval(const Flags& f) {
  const Settings s = resolve(f);
  const auto c = sgad::build_run_config(s);
  require(c.ckpt, "run.ckpt");
  const auto ck = sgad::checkpoint_read(c.ckpt);
  check_env(ck, c);
  const auto row = sgad::evaluate_cell(c.sweep, cell_from(c), {{c.preset.name, &ck}});
  print_row(row);
  if (!c.out.empty()) {
    sgad::emit_csv({row}, c.out);
    sgad::write_manifest(c.out, "eval", s, {c.out});
  }
  return 0;
}

int run_tune_beta(const Flags& f) {
  const Settings s = resolve(f);
  const auto c = sgad::build_run_config(s);
  require(c.ckpt, "run.ckpt");
  const auto ck = sgad::checkpoint_read(c.ckpt);
  check_env(ck, c);
  const auto curve = sgad::tune_beta(ck, c.sweep, cell_from(c), c.sweep.betas);
  for (const auto& r : curve.rows) print_row(r);
  std::cout << "best beta " << curve.best_beta << "\n";
  if (!c.out.empty()) {
    sgad::emit_csv(curve.rows, c.out);
    sgad::write_manifest(c.out, "tune-beta", s, {c.out});
  }
  return 0;
}

int run_sweep(const Flags& f) {
  const Settings s = resolve(f);
  const auto c = sgad::build_run_config(s);
  require(c.out, "run.out");
  std::map<std::string, sgad::Checkpoint> loaded;
  sgad::CheckpointSet set;
  for (const auto& [preset, path] : c.checkpoints) {
    loaded.emplace(preset, sgad::checkpoint_read(path));
    check_env(loaded.at(preset), c);
    set[preset] = &loaded.at(preset);
  }
  const auto rows = sgad::sweep(c.sweep, set);
  for (const auto& r : rows) print_row(r);
  sgad::emit_csv(rows, c.out);
  sgad::write_manifest(c.out, "sweep", s, {c.out});
  return 0;
}

int run_plot(const Flags& f) {
  const Settings s = resolve(f);
  const auto c = sgad::build_run_config(s);
  require(c.csv, "run.csv");
  require(c.out_dir, "run.out_dir");
  const auto status = sgad::emit_plots(c.csv, c.out_dir);
  if (status.warning) {
    std::cerr << "warning: " << c.csv << " has no rows; no plots written\n";
    return 0;
  }
  for (const auto& p : status.files) std::cout << "wrote " << p << "\n";
  sgad::write_manifest((std::filesystem::path(c.out_dir) / "plots").string(), "plot", s,
                       status.files);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
  if (const char* threads = std::getenv("SGAD_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
  CLI::App app{"Self-guided action diffusion laboratory"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  Flags gen, trn, evl, tune, swp, plt;
  auto* g = app.add_subcommand("gen-data", "Generate expert demonstrations");
  common(g, gen);
  bind(g, gen, "--env", "env.id", "Environment (maze|push)");
  bind(g, gen, "--preset", "env.preset", "Variance preset (low|medium|high)");
  bind(g, gen, "--n", "run.n", "Number of demonstrations");

  auto* t = app.add_subcommand("train", "Train a denoiser on a dataset");
  common(t, trn);
  bind(t, trn, "--data", "run.data", "Dataset file");
  bind(t, trn, "--steps", "train.steps", "Optimizer steps");

  auto add_eval_flags = [](CLI::App* a, Flags& fl) {
    common(a, fl);
    bind(a, fl, "--ckpt", "run.ckpt", "Checkpoint file");
    bind(a, fl, "--env", "env.id", "Environment (maze|push)");
    bind(a, fl, "--preset", "env.preset", "Variance preset");
    bind(a, fl, "--episodes", "run.episodes", "Episodes");
    bind(a, fl, "--h", "policy.h", "Execution horizon");
    bind(a, fl, "--n-samples", "strategy.n_samples", "Samples per decision");
    bind(a, fl, "--goal-speed", "env.goal_speed", "Goal speed");
    bind(a, fl, "--obs-noise", "env.obs_noise_sigma", "Observation noise sigma");
  };
  auto* e = app.add_subcommand("eval", "Evaluate one strategy");
  add_eval_flags(e, evl);
  bind(e, evl, "--strategy", "strategy.kind", "random|coherence|ensemble|selfgad");
  bind(e, evl, "--beta", "strategy.beta", "Guidance weight");

  auto* tb = app.add_subcommand("tune-beta", "Grid-search the guidance weight");
  add_eval_flags(tb, tune);
  bind(tb, tune, "--betas", "sweep.betas", "Comma-separated beta grid");

  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep");
  common(sw, swp);
  bind(sw, swp, "--checkpoints", "sweep.checkpoints", "preset:path,...");
  bind(sw, swp, "--episodes", "run.episodes", "Episodes per cell");

  auto* p = app.add_subcommand("plot", "Render SVG plots from a results CSV");
  common(p, plt);
  bind(p, plt, "--csv", "run.csv", "Results CSV");
  bind(p, plt, "--out-dir", "run.out_dir", "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (g->parsed()) return run_gen_data(gen);
    if (t->parsed()) return run_train(trn);
    if (e->parsed()) return run_eval(evl);
    if (tb->parsed()) return run_tune_beta(tune);
    if (sw->parsed()) return run_sweep(swp);
    if (p->parsed()) return run_plot(plt);
  } catch (const sgad::InvalidConfig& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
