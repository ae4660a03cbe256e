#include "sgad/dataset_io.hpp"

#include <algorithm>

#include "sgad/binio.hpp"
#include "sgad/errors.hpp"

namespace sgad {

using nlohmann::json;

void dataset_write(const Dataset& d, const std::string& path) {
  d.validate();
  json header;
  header["format"] = "sgad-dataset";
  header["obs_dim"] = d.obs_dim();
  header["action_dim"] = d.action_dim();
  header["meta"] = {{"env_id", d.meta.env_id},
                    {"preset", d.meta.preset},
                    {"seed", d.meta.seed}};
  json entries = json::array();
  std::vector<float> payload;
  for (const auto& tr : d.trajectories) {
    entries.push_back({{"length", tr.length()},
                       {"obs_dim", tr.obs_dim},
                       {"action_dim", tr.action_dim}});
    payload.insert(payload.end(), tr.states.begin(), tr.states.end());
    payload.insert(payload.end(), tr.actions.begin(), tr.actions.end());
  }
  header["trajectories"] = std::move(entries);
  binio::write_container(path, std::string_view(kDatasetMagic, 8),
                         kDatasetVersion, header, payload);
}

Dataset dataset_read(const std::string& path) {
  auto c = binio::read_container(path, std::string_view(kDatasetMagic, 8),
                                 kDatasetVersion);
  Dataset d;
  std::size_t cursor = 0;
  try {
    const int obs_dim = c.header.at("obs_dim").get<int>();
    const int action_dim = c.header.at("action_dim").get<int>();
    const auto& meta = c.header.at("meta");
    d.meta.env_id = meta.at("env_id").get<std::string>();
    d.meta.preset = meta.at("preset").get<std::string>();
    d.meta.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& e : c.header.at("trajectories")) {
      Trajectory tr;
      tr.obs_dim = e.at("obs_dim").get<int>();
      tr.action_dim = e.at("action_dim").get<int>();
      if (tr.obs_dim != obs_dim || tr.action_dim != action_dim) {
        throw InvalidInput("trajectory dims disagree with dataset header");
      }
      const auto len = e.at("length").get<std::size_t>();
      const std::size_t ns = len * obs_dim;
      const std::size_t na = len * action_dim;
      if (cursor + ns + na > c.payload.size()) {
        throw ParseError("payload shorter than declared trajectories",
                         c.payload_offset + 4 * c.payload.size());
      }
      tr.states.assign(c.payload.begin() + cursor, c.payload.begin() + cursor + ns);
      cursor += ns;
      tr.actions.assign(c.payload.begin() + cursor, c.payload.begin() + cursor + na);
      cursor += na;
      d.trajectories.push_back(std::move(tr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset header: ") + e.what(),
                     std::string_view(kDatasetMagic, 8).size() + 8);
  }
  if (cursor != c.payload.size()) {
    throw ParseError("trailing bytes after last trajectory",
                     c.payload_offset + 4 * cursor);
  }
  d.validate();
  return d;
}

}  // namespace sgad
