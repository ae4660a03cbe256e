#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "sgad/bench.hpp"
#include "sgad/config.hpp"
#include "sgad/expert.hpp"
#include "sgad/infer.hpp"
#include "sgad/train.hpp"

using namespace sgad;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

class Report {
 public:
  void line(const std::string& id, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures_;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void log(const std::string& msg) {
  std::fprintf(stderr, "[acceptance] %s\n", msg.c_str());
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.flat()) v = rng.normal();
  return m;
}

double inner(const Matrix& a, const Matrix& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.flat()[i] * b.flat()[i];
  return s;
}

double brute_loss(const Matrix& cur, const Matrix& prior, int h, double decay) {
  const int l = static_cast<int>(cur.rows());
  double total = 0.0;
  for (int t = h; t < l; ++t) {
    double sq = 0.0;
    for (std::size_t j = 0; j < cur.cols(); ++j) {
      const double d = cur(t - h, j) - prior(t, j);
      sq += d * d;
    }
    total += std::pow(decay, t - h) * sq;
  }
  return total;
}

// 1. Analytic gradients against central differences.
void gradient_exactness(Report& rep) {
  const auto t0 = Clock::now();
  DenoiserDims dims;
  dims.chunk_len = 4;
  dims.chunk_width = 2;
  dims.context = 2;
  dims.obs_dim = 3;
  dims.hidden = {16, 12};
  Rng rng(101);
  double model_worst = 0.0;
  int model_probes = 0;
  for (int net = 0; net < 4; ++net) {
    auto p = init_params(200 + net, dims);
    for (double& v : p.flat()) v += 0.05 * rng.normal();
    const auto x = random_matrix(4, 2, rng);
    std::vector<double> obs(6);
    for (double& v : obs) v = rng.normal();
    const auto g = random_matrix(4, 2, rng);
    const double sigma = std::exp(-1.0 + 1.5 * rng.normal());
    const auto grads = denoise_backward(p, x, sigma, obs, g);
    const double eps = 1e-6;
    auto err = [](double a, double b) {
      return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
    };
    for (int probe = 0; probe < 30; ++probe) {
      const auto idx = rng.uniform_index(p.size());
      auto plus = p, minus = p;
      plus.flat()[idx] += eps;
      minus.flat()[idx] -= eps;
      const double fd = (inner(g, denoise(plus, x, sigma, obs)) -
                         inner(g, denoise(minus, x, sigma, obs))) / (2 * eps);
      model_worst = std::max(model_worst, err(grads.params[idx], fd));
      ++model_probes;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp.flat()[i] += eps;
      xm.flat()[i] -= eps;
      const double fd = (inner(g, denoise(p, xp, sigma, obs)) -
                         inner(g, denoise(p, xm, sigma, obs))) / (2 * eps);
      model_worst = std::max(model_worst, err(grads.input.flat()[i], fd));
      ++model_probes;
    }
  }

  double guide_worst = 0.0;
  const int guide_probes = 200;
  for (int probe = 0; probe < guide_probes; ++probe) {
    const int l = 2 + static_cast<int>(rng.uniform_index(15));
    const int h = 1 + static_cast<int>(rng.uniform_index(l - 1));
    const auto cur = random_matrix(l, 2, rng);
    const PriorChunk prior{random_matrix(l, 2, rng), 0};
    const auto g = guidance_grad(cur, prior, h, 0.5);
    const auto idx = rng.uniform_index(cur.size());
    const double eps = 1e-3;
    auto plus = cur, minus = cur;
    plus.flat()[idx] += eps;
    minus.flat()[idx] -= eps;
    const double fd =
        (guidance_loss(plus, prior, h, 0.5) - guidance_loss(minus, prior, h, 0.5)) / (2 * eps);
    const double a = g.flat()[idx];
    guide_worst = std::max(guide_worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
  }
  const double secs = seconds_since(t0);
  rep.line("1 gradient exactness",
           model_worst < 1e-5 && guide_worst < 1e-8 && model_probes >= 100 && secs < 60,
           fmt("denoiser worst rel err %.2e over %d probes, guidance worst %.2e over %d probes, %.1fs",
               model_worst, model_probes, guide_worst, guide_probes, secs));
}

// 2. Coherent selection and overlap bookkeeping against brute force.
void oracle_equivalence(Report& rep) {
  Rng rng(202);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int l = 2 + static_cast<int>(rng.uniform_index(15));
    const int h = 1 + static_cast<int>(rng.uniform_index(l - 1));
    const PriorChunk prior{random_matrix(l, 2, rng), 0};
    std::vector<ActionChunk> cands;
    const int n = 1 + static_cast<int>(rng.uniform_index(16));
    for (int i = 0; i < n; ++i) cands.push_back(random_matrix(l, 2, rng));
    if (trial % 7 == 0 && n > 1) cands[n - 1] = cands[0];
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double v = brute_loss(cands[i], prior.chunk, h, 0.5);
      if (v < best_loss) best_loss = v, best = i;
    }
    if (select_coherent(cands, prior, h, 0.5, rng) != best) ++mismatches;
  }

  int overlap_bad = 0, cases = 0;
  for (int l = 1; l <= 8; ++l) {
    for (int h = 1; h <= l; ++h) {
      ++cases;
      const auto w = overlap_weights(l, h, 0.5);
      std::vector<double> hand;
      double v = 1.0;
      for (int k = 0; k < l - h; ++k, v *= 0.5) hand.push_back(v);
      if (w != hand) ++overlap_bad;
      // Rows tagged by their absolute timestep: prior born at 0, current at h.
      Matrix prior(l, 1), cur(l, 1);
      for (int k = 0; k < l; ++k) {
        prior(k, 0) = k;
        cur(k, 0) = h + k;
      }
      const auto ov = extract_overlap(PriorChunk{prior, 0}, cur, h);
      bool ok = static_cast<int>(ov.prior.rows()) == l - h &&
                static_cast<int>(ov.current.rows()) == l - h;
      for (int k = 0; ok && k < l - h; ++k) {
        ok = ov.prior(k, 0) == h + k && ov.current(k, 0) == h + k;
      }
      if (!ok) ++overlap_bad;
    }
  }
  rep.line("2 oracle equivalence", mismatches == 0 && overlap_bad == 0,
           fmt("select_coherent mismatches %d/1000, overlap mismatches %d over %d (l,h) cases",
               mismatches, overlap_bad, cases));
}

// 3. A trained sampler reproduces a two-mode 1-D distribution.
void sampler_fidelity(Report& rep) {
  const auto t0 = Clock::now();
  Dataset d;
  d.meta = {"synthetic", "bimodal", 303};
  Rng rng(303);
  for (int i = 0; i < 200; ++i) {
    Trajectory tr;
    tr.obs_dim = 1;
    tr.action_dim = 1;
    for (int t = 0; t < 25; ++t) {
      tr.states.push_back(0.0f);
      const double mode = rng.uniform() < 0.5 ? -1.0 : 1.0;
      tr.actions.push_back(static_cast<float>(mode + 0.05 * rng.normal()));
    }
    d.trajectories.push_back(tr);
  }
  PolicyConfig pol;
  pol.c = 1;
  pol.l = 1;
  pol.h = 1;
  pol.obs_dim = 1;
  pol.action_dim = 1;
  TrainConfig cfg;
  cfg.hidden = {128, 128, 128};
  cfg.steps = 10000;
  cfg.batch_size = 128;
  cfg.learning_rate = 5e-4;
  cfg.seed = 304;
  const auto ck = train(d, pol, cfg);
  const auto sched = build_schedule(80, 0.002, 18, 7);
  const std::vector<double> obs = ck.normalizer.normalize_window(std::vector<double>{0.0});
  Rng srng(305);
  const int n = 10000;
  const auto samples = ode_sample_normalized(ck.params, obs, sched, srng, n);
  int near = 0, positive = 0;
  for (const auto& m : samples) {
    const double a = ck.normalizer.denormalize(m)(0, 0);
    if (std::min(std::abs(a - 1.0), std::abs(a + 1.0)) <= 0.25) ++near;
    if (a > 0) ++positive;
  }
  const double frac_near = static_cast<double>(near) / n;
  const double frac_pos = static_cast<double>(positive) / n;
  const double secs = seconds_since(t0);
  rep.line("3 sampler fidelity",
           frac_near >= 0.95 && frac_pos >= 0.4 && frac_pos <= 0.6 && secs < 300,
           fmt("%.2f%% of %d samples within 0.25 of a mode, +1 mode frequency %.3f, %.1fs",
               100 * frac_near, n, frac_pos, secs));
}

struct Trained {
  Checkpoint ck;
  Dataset data;
  RunConfig cfg;
};

RunConfig defaults(const std::string& env, const std::string& preset) {
  return build_run_config(resolve_settings({{"env.id", env}, {"env.preset", preset}}));
}

Trained train_model(const std::string& env, const std::string& preset, Report& rep) {
  const auto t0 = Clock::now();
  Trained t;
  t.cfg = defaults(env, preset);
  t.cfg.train.seed = 1;
  t.data = build_dataset(t.cfg.n, t.cfg.env, t.cfg.preset, 1);
  t.ck = train(t.data, t.cfg.policy, t.cfg.train);
  const auto& curve = t.ck.train_meta["train_loss_per_100"];
  // Five 100-step windows make one 500-step smoothing window.
  double head = 0, tail = 0;
  const std::size_t n = curve.size();
  for (std::size_t i = 0; i < 5; ++i) {
    head += curve[i].get<double>() / 5;
    tail += curve[n - 5 + i].get<double>() / 5;
  }
  rep.line("training loss " + env + "/" + preset, tail < head,
           fmt("smoothed train loss %.4f -> %.4f over %d steps, %.0fs", head, tail,
               t.cfg.train.steps, seconds_since(t0)));
  return t;
}

SweepSpec spec_for(const RunConfig& cfg, int episodes, std::uint64_t seed) {
  SweepSpec s = cfg.sweep;
  s.episodes = episodes;
  s.base_seed = seed;
  return s;
}

std::string row_text(const ResultRow& r) {
  return fmt("%s %.1f%% [%.1f,%.1f]", r.strategy.c_str(), 100 * r.success_rate,
             100 * r.wilson_lo, 100 * r.wilson_hi);
}

constexpr std::uint64_t kTuneSeed = 100;
constexpr std::uint64_t kEvalSeed = 10000;

struct MazeResult {
  BetaCurve curve;
  ResultRow random, selfgad;
  double gap() const { return selfgad.success_rate - random.success_rate; }
};

MazeResult maze_preset(const Trained& t, const std::string& preset) {
  const std::vector<double> grid = {0.0, 0.03, 0.07, 0.1, 0.13, 0.16, 0.2, 0.3};
  MazeResult m;
  Cell base;
  base.preset = preset;
  const auto t0 = Clock::now();
  m.curve = tune_beta(t.ck, spec_for(t.cfg, 200, kTuneSeed), base, grid);
  const CheckpointSet set = {{preset, &t.ck}};
  Cell sg = base;
  sg.strategy = StrategyKind::kSelfGuided;
  sg.beta = m.curve.best_beta;
  const auto rows = sweep_cells(spec_for(t.cfg, 200, kEvalSeed), {base, sg}, set);
  m.random = rows[0];
  m.selfgad = rows[1];
  log(fmt("maze %s: beta* %.2f, %s vs %s, %.0fs", preset.c_str(), m.curve.best_beta,
          row_text(m.random).c_str(), row_text(m.selfgad).c_str(), seconds_since(t0)));
  return m;
}

// 4. Guidance neutrality and attraction on a trained maze model.
void guidance_neutrality(const Trained& t, double beta, Report& rep) {
  const auto sched = build_schedule(80, 0.002, 18, 7);
  const int h = 1;
  const int probes = 200;
  Rng pick(404);
  auto random_state = [&](std::size_t min_step) {
    const auto& tr = t.data.trajectories[pick.uniform_index(t.data.trajectories.size())];
    const auto step = min_step + pick.uniform_index(tr.length() - min_step);
    return std::make_pair(&tr, step);
  };
  auto state = [](const Trajectory& tr, std::size_t step) {
    return std::vector<double>(tr.state(step).begin(), tr.state(step).end());
  };
  GuidanceConfig zero = t.cfg.strategy.guidance;
  zero.beta = 0.0;
  GuidanceConfig tuned = t.cfg.strategy.guidance;
  tuned.beta = beta;

  // Counts probes where guidance lowers the deviation from the prior.
  auto attraction = [&](const std::vector<double>& now, const PriorChunk& prior, int i,
                        bool& identical) {
    Rng a(6000 + i), b(6000 + i), c(6000 + i);
    const auto free = ode_sample(t.ck, now, sched, a);
    identical = ode_sample(t.ck, now, sched, b, std::make_pair(zero, prior), h) == free;
    const auto guided = ode_sample(t.ck, now, sched, c, std::make_pair(tuned, prior), h);
    return guidance_loss(guided, prior, h, tuned.decay) < guidance_loss(free, prior, h, tuned.decay);
  };

  int identical = 0, reduced = 0;
  for (int i = 0; i < probes; ++i) {
    const auto [tr, step] = random_state(0);
    const auto [other, other_step] = random_state(0);
    Rng prior_rng(5000 + i);
    const PriorChunk prior{ode_sample(t.ck, state(*other, other_step), sched, prior_rng), 0};
    bool same = false;
    reduced += attraction(state(*tr, step), prior, i, same);
    identical += same;
  }
  int consecutive = 0;
  for (int i = 0; i < probes; ++i) {
    const auto [tr, step] = random_state(1);
    Rng prior_rng(7000 + i);
    const PriorChunk prior{ode_sample(t.ck, state(*tr, step - 1), sched, prior_rng), 0};
    bool same = false;
    consecutive += attraction(state(*tr, step), prior, probes + i, same);
  }
  log(fmt("priors sampled one step earlier on the same demo: reduced %d/%d", consecutive, probes));
  rep.line("4 guidance neutrality and attraction", identical == probes && reduced >= 0.9 * probes,
           fmt("beta=0 bit-identical %d/%d, beta=%.2f reduces prior deviation %d/%d random "
               "(obs, prior) probes",
               identical, probes, beta, reduced, probes));
}

void maze_criteria(Report& rep) {
  std::map<std::string, Trained> models;
  std::map<std::string, MazeResult> results;
  for (const std::string p : {"low", "medium", "high"}) {
    models[p] = train_model("maze", p, rep);
    results[p] = maze_preset(models[p], p);
  }
  const auto& med = results["medium"];
  const auto& tm = models["medium"];

  guidance_neutrality(tm, med.curve.best_beta, rep);

  rep.line("5 single-sample superiority",
           med.gap() >= 0.10 && med.selfgad.wilson_lo > med.random.wilson_hi,
           fmt("maze medium h=1 n=1, 200 episodes: %s vs %s (beta %.2f), gap %+.1fpp",
               row_text(med.selfgad).c_str(), row_text(med.random).c_str(), med.curve.best_beta,
               100 * med.gap()));

  Cell coh;
  coh.preset = "medium";
  coh.strategy = StrategyKind::kCoherence;
  coh.n_samples = 16;
  const auto t0 = Clock::now();
  const auto coherence =
      evaluate_cell(spec_for(tm.cfg, 200, kEvalSeed), coh, {{"medium", &tm.ck}});
  log(fmt("coherence n=16 evaluated in %.0fs", seconds_since(t0)));
  rep.line("6 sample efficiency",
           med.selfgad.success_rate >= coherence.success_rate - 0.05,
           fmt("selfgad n=1 %.1f%% vs coherence n=16 %.1f%% (difference %+.1fpp, allowed -5pp)",
               100 * med.selfgad.success_rate, 100 * coherence.success_rate,
               100 * (med.selfgad.success_rate - coherence.success_rate)));

  const double gl = results["low"].gap(), gm = med.gap(), gh = results["high"].gap();
  rep.line("8 variance trend", gl <= gm && gm <= gh,
           fmt("selfgad-random gap low %+.1fpp, medium %+.1fpp, high %+.1fpp", 100 * gl, 100 * gm,
               100 * gh));

  std::vector<Cell> noisy;
  for (double s : {0.0, 0.02, 0.05}) {
    Cell c;
    c.preset = "medium";
    c.obs_noise_sigma = s;
    noisy.push_back(c);
  }
  const auto nrows = sweep_cells(spec_for(tm.cfg, 200, kEvalSeed), noisy, {{"medium", &tm.ck}});
  bool monotone = true;
  for (std::size_t i = 1; i < nrows.size(); ++i) {
    monotone = monotone && nrows[i].success_rate <= nrows[i - 1].success_rate;
  }
  rep.line("9 observation noise", monotone,
           fmt("random success at obs noise 0/0.02/0.05: %.1f%% / %.1f%% / %.1f%%",
               100 * nrows[0].success_rate, 100 * nrows[1].success_rate,
               100 * nrows[2].success_rate));

  const auto& curve = results["high"].curve;
  const auto best = std::max_element(curve.rows.begin(), curve.rows.end(),
                                     [](const ResultRow& a, const ResultRow& b) {
                                       return a.successes < b.successes;
                                     });
  std::string shape;
  for (const auto& r : curve.rows) shape += fmt("%g:%.1f%% ", r.beta, 100 * r.success_rate);
  rep.line("10 beta curve shape",
           best->successes > curve.rows.front().successes &&
               best->successes > curve.rows.back().successes,
           fmt("maze high tune_beta %s-> best beta %.2f", shape.c_str(), curve.best_beta));

  rep.line("mode switches", med.selfgad.mean_mode_switches < med.random.mean_mode_switches,
           fmt("maze medium mean mode switches selfgad %.3f vs random %.3f over 200 episodes",
               med.selfgad.mean_mode_switches, med.random.mean_mode_switches));

  const auto& zero = results["medium"].curve.rows.front();
  rep.line("beta zero matches random",
           zero.wilson_lo <= med.random.wilson_hi && med.random.wilson_lo <= zero.wilson_hi,
           fmt("maze medium tuning beta=0 %.1f%% [%.1f,%.1f] vs random %.1f%% [%.1f,%.1f]",
               100 * zero.success_rate, 100 * zero.wilson_lo, 100 * zero.wilson_hi,
               100 * med.random.success_rate, 100 * med.random.wilson_lo,
               100 * med.random.wilson_hi));
}

// 7. Goal dynamics on the push task.
void push_criteria(Report& rep) {
  const auto t = train_model("push", "low", rep);
  const CheckpointSet set = {{"low", &t.ck}};
  const std::vector<double> grid = {0.001, 0.003, 0.01, 0.03};
  const auto t0 = Clock::now();

  auto gap_at = [&](double speed, double& beta) {
    Cell base;
    base.goal_speed = speed;
    beta = tune_beta(t.ck, spec_for(t.cfg, 100, kTuneSeed), base, grid).best_beta;
    Cell sg = base;
    sg.strategy = StrategyKind::kSelfGuided;
    sg.beta = beta;
    const auto rows = sweep_cells(spec_for(t.cfg, 100, kEvalSeed), {base, sg}, set);
    log(fmt("push speed %.1f: beta* %.3f, %s vs %s", speed, beta, row_text(rows[0]).c_str(),
            row_text(rows[1]).c_str()));
    return std::make_pair(rows[0], rows[1]);
  };
  double b0 = 0, b15 = 0;
  const auto [r0, s0] = gap_at(0.0, b0);
  const auto [r15, s15] = gap_at(1.5, b15);
  const double g0 = s0.success_rate - r0.success_rate;
  const double g15 = s15.success_rate - r15.success_rate;

  std::vector<Cell> cells;
  for (int h : {4, 8, 16}) {
    for (auto kind : {StrategyKind::kRandom, StrategyKind::kCoherence, StrategyKind::kSelfGuided}) {
      Cell c;
      c.goal_speed = 1.5;
      c.h = h;
      c.strategy = kind;
      c.n_samples = kind == StrategyKind::kCoherence ? 4 : 1;
      c.beta = kind == StrategyKind::kSelfGuided ? b15 : 0.0;
      cells.push_back(c);
    }
  }
  const auto rows = sweep_cells(spec_for(t.cfg, 100, kEvalSeed), cells, set);
  bool monotone = true;
  std::string horizon;
  for (std::size_t k = 0; k < 3; ++k) {
    horizon += rows[k].strategy + " ";
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& r = rows[i * 3 + k];
      horizon += fmt("%.0f%%%s", 100 * r.success_rate, i < 2 ? "/" : "; ");
      if (i > 0 && r.success_rate > rows[(i - 1) * 3 + k].success_rate) monotone = false;
    }
  }
  log(fmt("push evaluation %.0fs", seconds_since(t0)));
  rep.line("7 goal dynamics", g15 > g0 && monotone,
           fmt("h=1 selfgad-random gap %+.1fpp at speed 0 (beta %.3f), %+.1fpp at speed 1.5 "
               "(beta %.3f); speed 1.5 success at h=4/8/16: %s",
               100 * g0, b0, 100 * g15, b15, horizon.c_str()));
}

// 11. Every CLI command reproduces its outputs from its manifest.
struct Cli {
  fs::path dir;
  int operator()(const std::string& args) const {
    const std::string cmd = std::string(SGAD_CLI_PATH) + " " + args + " >> " +
                            (dir / "cli.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void determinism(const fs::path& work, Report& rep) {
  const fs::path dir = work / "cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Cli cli{dir};
  auto at = [&](const std::string& n) { return (dir / n).string(); };
  std::vector<std::string> failed;

  // Runs a command, then re-runs it from its manifest and compares bytes.
  auto check = [&](const std::string& name, const std::string& args,
                   const std::vector<std::string>& outputs, const std::string& manifest) {
    if (cli(args) != 0) {
      failed.push_back(name + " (run)");
      return;
    }
    std::vector<std::string> first;
    for (const auto& o : outputs) {
      first.push_back(slurp(at(o)));
      fs::rename(at(o), at(o + ".first"));
    }
    if (cli(name + " --config " + at(manifest)) != 0) {
      failed.push_back(name + " (rerun)");
      return;
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (first[i].empty() || slurp(at(outputs[i])) != first[i]) failed.push_back(name + " " + outputs[i]);
    }
  };

  const std::string small = " --set model.hidden=32,32 --set train.eval_interval=50";
  const std::string eval_common =
      " --env maze --preset low --episodes 8 --seed 9 --set schedule.n_steps=6";
  check("gen-data", "gen-data --env maze --preset low --n 20 --seed 3 --out " + at("d.bin"),
        {"d.bin"}, "d.bin.manifest.ini");
  check("train",
        "train --data " + at("d.bin") + " --out " + at("c.ckpt") + " --steps 200 --seed 4" + small,
        {"c.ckpt"}, "c.ckpt.manifest.ini");
  check("eval",
        "eval --ckpt " + at("c.ckpt") + eval_common + " --strategy selfgad --beta 0.1 --out " +
            at("e.csv"),
        {"e.csv"}, "e.csv.manifest.ini");
  check("tune-beta",
        "tune-beta --ckpt " + at("c.ckpt") + eval_common + " --betas 0,0.1 --out " + at("t.csv"),
        {"t.csv"}, "t.csv.manifest.ini");
  check("sweep",
        "sweep --episodes 6 --seed 5 --checkpoints low:" + at("c.ckpt") +
            " --set schedule.n_steps=6 --set sweep.horizons=1,4 --set "
            "sweep.strategies=random,coherence,selfgad --set sweep.betas=0.1 --set "
            "sweep.n_samples=1,4 --out " + at("s.csv"),
        {"s.csv"}, "s.csv.manifest.ini");
  {
    const std::vector<std::string> svgs = {"success_vs_samples.svg", "success_vs_horizon.svg",
                                           "success_vs_preset.svg", "success_vs_beta.svg"};
    std::vector<std::string> outs;
    for (const auto& s : svgs) outs.push_back("plots/" + s);
    check("plot", "plot --csv " + at("s.csv") + " --out-dir " + at("plots"), outs,
          "plots/plots.manifest.ini");
  }
  std::string detail = "gen-data, train, eval, tune-beta, sweep and plot reproduced from manifests";
  if (!failed.empty()) {
    detail = "mismatch:";
    for (const auto& f : failed) detail += " " + f;
  }
  rep.line("11 determinism", failed.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::string work = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--work-dir", work, "Scratch directory");
  app.add_option("--only", only, "Run a subset: fast, maze, push, cli");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  auto wanted = [&](const std::string& s) {
    return only.empty() || std::find(only.begin(), only.end(), s) != only.end();
  };

  const auto t0 = Clock::now();
  Report rep;
  try {
    if (wanted("fast")) {
      gradient_exactness(rep);
      oracle_equivalence(rep);
      sampler_fidelity(rep);
    }
    if (wanted("maze")) maze_criteria(rep);
    if (wanted("push")) push_criteria(rep);
    if (wanted("cli")) determinism(work, rep);
  } catch (const std::exception& e) {
    rep.line("harness", false, std::string("exception: ") + e.what());
  }
  const double secs = seconds_since(t0);
  rep.line("12 runtime budget", secs < 1800, fmt("%.0fs total (limit 1800s)", secs));
  return rep.failures() == 0 ? 0 : 1;
}
