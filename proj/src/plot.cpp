#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sgad/bench.hpp"
#include "sgad/errors.hpp"

namespace sgad {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

int preset_rank(const std::string& p) {
  if (p == "low") return 0;
  if (p == "medium") return 1;
  if (p == "high") return 2;
  return 3;
}

struct Axis {
  const char* file;
  const char* title;
  const char* label;
  // Sort key and tick label of a row along this axis.
  std::function<double(const ResultRow&)> key;
  std::function<std::string(const ResultRow&)> tick;
};

// Identity of a row with the plotted axis blanked out.
std::string series_key(const ResultRow& r, const std::string& axis) {
  std::string k = r.env_id + "|" + r.strategy;
  if (axis != "preset") k += "|p=" + r.preset;
  if (axis != "speed") k += "|v=" + compact(r.goal_speed);
  if (axis != "h") k += "|h=" + std::to_string(r.h);
  if (axis != "n") k += "|n=" + std::to_string(r.n_samples);
  if (axis != "beta") k += "|b=" + compact(r.beta);
  k += "|noise=" + compact(r.obs_noise_sigma);
  return k;
}

std::string legend_label(const ResultRow& r, const std::string& axis,
                         const std::vector<ResultRow>& rows) {
  auto varies = [&](auto get) {
    return std::any_of(rows.begin(), rows.end(), [&](const ResultRow& o) { return get(o) != get(r); });
  };
  std::string s = r.strategy;
  if (axis != "preset" && varies([](const ResultRow& o) { return o.preset; })) s += " " + r.preset;
  if (axis != "speed" && varies([](const ResultRow& o) { return o.goal_speed; })) s += " v=" + compact(r.goal_speed);
  if (axis != "h" && varies([](const ResultRow& o) { return o.h; })) s += " h=" + std::to_string(r.h);
  if (axis != "n" && varies([](const ResultRow& o) { return o.n_samples; })) s += " n=" + std::to_string(r.n_samples);
  if (axis != "beta" && r.strategy == "selfgad" && varies([](const ResultRow& o) { return o.beta; })) s += " b=" + compact(r.beta);
  if (varies([](const ResultRow& o) { return o.obs_noise_sigma; })) s += " noise=" + compact(r.obs_noise_sigma);
  return s;
}

std::string render(const std::vector<ResultRow>& rows, const Axis& axis,
                   const std::string& axis_name) {
  std::map<double, std::string> ticks;
  for (const auto& r : rows) ticks.emplace(axis.key(r), axis.tick(r));
  std::map<double, int> slot;
  for (const auto& [k, _] : ticks) slot.emplace(k, static_cast<int>(slot.size()));

  std::map<std::string, std::vector<const ResultRow*>> series;
  for (const auto& r : rows) series[series_key(r, axis_name)].push_back(&r);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto nslots = static_cast<double>(slot.size());
  auto xpos = [&](double key) {
    return nslots <= 1 ? kLeft + pw / 2 : kLeft + pw * slot.at(key) / (nslots - 1);
  };
  auto ypos = [&](double rate) { return kTop + ph * (1.0 - rate); };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       std::string(axis.title) + "</text>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) +
       "\" y2=\"" + num(kTop + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) +
       "\" y2=\"" + num(kTop + ph) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(ypos(v) + 4) +
         "\" text-anchor=\"end\">" + num(v).substr(0, 3) + "</text>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(ypos(v)) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(ypos(v)) + "\" stroke=\"#dddddd\"/>\n";
  }
  for (const auto& [k, label] : ticks) {
    s += "<text x=\"" + num(xpos(k)) + "\" y=\"" + num(kTop + ph + 18) +
         "\" text-anchor=\"middle\">" + label + "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 18) +
       "\" text-anchor=\"middle\">" + std::string(axis.label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num(kTop + ph / 2) + ")\">success rate</text>\n";

  int color = 0;
  for (auto& [key, pts] : series) {
    std::sort(pts.begin(), pts.end(),
              [&](const ResultRow* a, const ResultRow* b) { return axis.key(*a) < axis.key(*b); });
    const char* c = kPalette[color % 8];
    std::string poly;
    for (const auto* p : pts) {
      poly += num(xpos(axis.key(*p))) + "," + num(ypos(p->success_rate)) + " ";
      s += "<line x1=\"" + num(xpos(axis.key(*p))) + "\" y1=\"" + num(ypos(p->wilson_lo)) +
           "\" x2=\"" + num(xpos(axis.key(*p))) + "\" y2=\"" + num(ypos(p->wilson_hi)) +
           "\" stroke=\"" + c + "\" stroke-opacity=\"0.5\"/>\n";
      s += "<circle cx=\"" + num(xpos(axis.key(*p))) + "\" cy=\"" + num(ypos(p->success_rate)) +
           "\" r=\"3.5\" fill=\"" + c + "\"/>\n";
    }
    if (pts.size() > 1) {
      poly.pop_back();
      s += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"" + c + "\" stroke-width=\"2\"/>\n";
    }
    const double ly = kTop + 10 + 18 * color;
    s += "<rect x=\"" + num(kLeft + pw + 12) + "\" y=\"" + num(ly - 8) +
         "\" width=\"10\" height=\"10\" fill=\"" + c + "\"/>\n";
    s += "<text x=\"" + num(kLeft + pw + 28) + "\" y=\"" + num(ly + 1) + "\">" +
         legend_label(*pts.front(), axis_name, rows) + "</text>\n";
    ++color;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace

PlotStatus emit_plots(const std::string& csv_path, const std::string& out_dir) {
  const auto rows = parse_csv(csv_path);
  PlotStatus status;
  if (rows.empty()) {
    status.warning = true;
    return status;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir);

  const std::vector<std::pair<std::string, Axis>> axes = {
      {"n", {"success_vs_samples.svg", "Success rate vs sample count", "samples per decision",
             [](const ResultRow& r) { return static_cast<double>(r.n_samples); },
             [](const ResultRow& r) { return std::to_string(r.n_samples); }}},
      {"h", {"success_vs_horizon.svg", "Success rate vs execution horizon", "execution horizon h",
             [](const ResultRow& r) { return static_cast<double>(r.h); },
             [](const ResultRow& r) { return std::to_string(r.h); }}},
      {"preset", {"success_vs_preset.svg", "Success rate vs dataset variance", "variance preset",
                  [](const ResultRow& r) { return static_cast<double>(preset_rank(r.preset)); },
                  [](const ResultRow& r) { return r.preset; }}},
      {"beta", {"success_vs_beta.svg", "Success rate vs guidance weight", "guidance weight beta",
                [](const ResultRow& r) { return r.beta; },
                [](const ResultRow& r) { return compact(r.beta); }}},
  };
  for (const auto& [name, axis] : axes) {
    const std::string path = (std::filesystem::path(out_dir) / axis.file).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << render(rows, axis, name);
    if (!out) throw IoError("write failed: " + path);
    status.files.push_back(path);
  }
  return status;
}

}  // namespace sgad
