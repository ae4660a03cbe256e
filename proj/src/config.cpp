#include "sgad/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sgad/errors.hpp"

namespace sgad {

Settings default_settings(EnvId env) {
  const bool maze = env == EnvId::kMaze;
  return {
      {"env.id", to_string(env)},
      {"env.preset", "low"},
      {"env.dt", "0.1"},
      {"env.goal_speed", "0"},
      {"env.goal_radius", maze ? "0.05" : "0.06"},
      {"env.max_steps", maze ? "120" : "200"},
      {"env.obs_noise_sigma", "0"},
      {"env.a_max", "0.2"},
      {"policy.c", maze ? "1" : "2"},
      {"policy.l", maze ? "8" : "16"},
      {"policy.h", "1"},
      {"policy.predict_states", "false"},
      {"model.hidden", "256,256,256"},
      {"model.sigma_data", "0.5"},
      {"train.batch_size", "64"},
      {"train.steps", "8000"},
      {"train.learning_rate", "0.0003"},
      {"train.p_mean", "-1.2"},
      {"train.p_std", "1.2"},
      {"train.eval_fraction", "0.1"},
      {"train.eval_interval", "500"},
      {"schedule.sigma_max", "80"},
      {"schedule.sigma_min", "0.002"},
      {"schedule.n_steps", "18"},
      {"schedule.rho", "7"},
      {"strategy.kind", "random"},
      {"strategy.n_samples", "1"},
      {"strategy.beta", "0"},
      {"strategy.decay", "0.5"},
      {"strategy.apply_every_step", "true"},
      {"strategy.last_k", "0"},
      {"strategy.grad_target", "noisy_iterate"},
      {"strategy.ensemble_decay", "0.5"},
      {"sweep.presets", "low"},
      {"sweep.goal_speeds", "0"},
      {"sweep.horizons", "1"},
      {"sweep.n_samples", "1"},
      {"sweep.strategies", "random"},
      {"sweep.betas", "0"},
      {"sweep.obs_noise", "0"},
      {"sweep.checkpoints", ""},
      {"run.seed", "0"},
      {"run.n", "100"},
      {"run.episodes", maze ? "200" : "100"},
      {"run.data", ""},
      {"run.out", ""},
      {"run.ckpt", ""},
      {"run.csv", ""},
      {"run.out_dir", ""},
  };
}

Settings load_settings(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidConfig("config file " + path + ": " + e.message() + " (line " +
                        std::to_string(e.line()) + ")");
  }
  Settings s;
  for (const auto& [section, body] : tree) {
    if (section == "manifest") continue;
    if (body.empty() && !body.data().empty()) {
      throw InvalidConfig("config file " + path + ": key '" + section +
                          "' must live inside a [section]");
    }
    for (const auto& [key, value] : body) s[section + "." + key] = value.data();
  }
  return s;
}

Settings resolve_settings(const Settings& overrides) {
  EnvId env = EnvId::kMaze;
  if (auto it = overrides.find("env.id"); it != overrides.end()) {
    env = env_id_from_string(it->second);
  }
  Settings s = default_settings(env);
  for (const auto& [k, v] : overrides) {
    if (!s.contains(k)) throw InvalidConfig("unknown config key '" + k + "'");
    s[k] = v;
  }
  return s;
}

std::string to_ini(const Settings& settings) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : settings) {
    const auto dot = k.find('.');
    sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
  }
  std::string out;
  for (const auto& [name, entries] : sections) {
    if (!out.empty()) out += "\n";
    out += "[" + name + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(const Settings& s) : s_(s) {}

  const std::string& str(const std::string& key) const {
    const auto it = s_.find(key);
    if (it == s_.end()) throw InvalidConfig("missing config key '" + key + "'");
    return it->second;
  }
  double real(const std::string& key) const { return parse<double>(key, str(key)); }
  int integer(const std::string& key) const { return parse<int>(key, str(key)); }
  std::uint64_t u64(const std::string& key) const {
    return parse<std::uint64_t>(key, str(key));
  }
  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidConfig("config key '" + key + "' expects true/false, got '" + v + "'");
  }
  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(str(key))) out.push_back(parse<double>(key, item));
    return out;
  }
  std::vector<int> ints(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split_list(str(key))) out.push_back(parse<int>(key, item));
    return out;
  }

 private:
  template <typename T>
  static T parse(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !in.eof()) {
      throw InvalidConfig("config key '" + key + "' has malformed value '" + text + "'");
    }
    return v;
  }

  const Settings& s_;
};

template <typename F>
auto keyed(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const InvalidConfig& e) {
    const std::string what = e.what();
    if (what.find(key) != std::string::npos) throw;
    throw InvalidConfig("config key '" + key + "': " + what);
  }
}

}  // namespace

RunConfig build_run_config(const Settings& s) {
  const Reader r(s);
  RunConfig c;
  c.env = default_env_config(keyed("env.id", [&] { return env_id_from_string(r.str("env.id")); }));
  c.preset = keyed("env.preset", [&] { return variance_preset(r.str("env.preset")); });
  c.env.dt = r.real("env.dt");
  c.env.goal_speed = r.real("env.goal_speed");
  c.env.goal_radius = r.real("env.goal_radius");
  c.env.max_steps = r.integer("env.max_steps");
  c.env.obs_noise_sigma = r.real("env.obs_noise_sigma");
  c.env.a_max = r.real("env.a_max");
  c.env = apply_preset(c.env, c.preset);
  keyed("env", [&] { c.env.validate(); return 0; });

  c.policy.c = r.integer("policy.c");
  c.policy.l = r.integer("policy.l");
  c.policy.h = r.integer("policy.h");
  c.policy.predict_states = r.flag("policy.predict_states");
  c.policy.obs_dim = obs_dim(c.env.env_id);
  c.policy.action_dim = kActionDim;
  keyed("policy", [&] { c.policy.validate(); return 0; });

  c.train.hidden = r.ints("model.hidden");
  c.train.sigma_data = r.real("model.sigma_data");
  c.train.batch_size = r.integer("train.batch_size");
  c.train.steps = r.integer("train.steps");
  c.train.learning_rate = r.real("train.learning_rate");
  c.train.p_mean = r.real("train.p_mean");
  c.train.p_std = r.real("train.p_std");
  c.train.eval_fraction = r.real("train.eval_fraction");
  c.train.eval_interval = r.integer("train.eval_interval");
  c.seed = r.u64("run.seed");
  c.train.seed = c.seed;
  keyed("train", [&] { c.train.validate(); return 0; });

  c.schedule = keyed("schedule", [&] {
    return build_schedule(r.real("schedule.sigma_max"), r.real("schedule.sigma_min"),
                          r.integer("schedule.n_steps"), r.real("schedule.rho"));
  });

  c.strategy.kind = keyed("strategy.kind", [&] { return strategy_from_string(r.str("strategy.kind")); });
  c.strategy.n_samples = r.integer("strategy.n_samples");
  c.strategy.guidance.beta = r.real("strategy.beta");
  c.strategy.guidance.decay = r.real("strategy.decay");
  c.strategy.guidance.apply_every_step = r.flag("strategy.apply_every_step");
  c.strategy.guidance.last_k = r.integer("strategy.last_k");
  const auto& target = r.str("strategy.grad_target");
  if (target == "noisy_iterate") {
    c.strategy.guidance.target = GradTarget::kNoisyIterate;
  } else if (target == "denoised_estimate") {
    c.strategy.guidance.target = GradTarget::kDenoisedEstimate;
  } else {
    throw InvalidConfig("config key 'strategy.grad_target' expects noisy_iterate or denoised_estimate");
  }
  c.strategy.ensemble_decay = r.real("strategy.ensemble_decay");
  keyed("strategy", [&] { c.strategy.validate(); return 0; });

  c.n = r.integer("run.n");
  c.episodes = r.integer("run.episodes");
  if (c.episodes < 1) throw InvalidConfig("config key 'run.episodes' must be >= 1");
  c.data = r.str("run.data");
  c.out = r.str("run.out");
  c.ckpt = r.str("run.ckpt");
  c.csv = r.str("run.csv");
  c.out_dir = r.str("run.out_dir");

  SweepSpec& sw = c.sweep;
  sw.env = c.env;
  sw.strategy = c.strategy;
  sw.schedule = c.schedule;
  sw.presets = split_list(r.str("sweep.presets"));
  for (const auto& p : sw.presets) keyed("sweep.presets", [&] { return variance_preset(p); });
  sw.goal_speeds = r.reals("sweep.goal_speeds");
  sw.horizons = r.ints("sweep.horizons");
  sw.n_samples = r.ints("sweep.n_samples");
  sw.strategies.clear();
  for (const auto& k : split_list(r.str("sweep.strategies"))) {
    sw.strategies.push_back(keyed("sweep.strategies", [&] { return strategy_from_string(k); }));
  }
  sw.betas = r.reals("sweep.betas");
  sw.obs_noise = r.reals("sweep.obs_noise");
  sw.episodes = c.episodes;
  sw.base_seed = c.seed;
  for (const auto& entry : split_list(r.str("sweep.checkpoints"))) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) {
      throw InvalidConfig("config key 'sweep.checkpoints' expects preset:path entries");
    }
    c.checkpoints[entry.substr(0, colon)] = entry.substr(colon + 1);
  }
  return c;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string write_manifest(const std::string& artifact, const std::string& command,
                           const Settings& resolved,
                           const std::vector<std::string>& outputs) {
  Settings m = resolved;
  m["manifest.command"] = command;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    m["manifest.output" + std::to_string(i)] = outputs[i];
    m["manifest.hash" + std::to_string(i)] = file_hash(outputs[i]);
  }
  const std::string path = artifact + ".manifest.ini";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << to_ini(m);
  if (!out) throw IoError("write failed: " + path);
  return path;
}

}  // namespace sgad
