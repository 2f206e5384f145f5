#pragma once

// Model checkpoints as a versioned JSON container. Doubles are emitted by
// nlohmann's shortest-round-trip formatter, so save/load is bit-exact for
// finite values (and parameters are finite by invariant).

#include <fstream>
#include <string>

#include "json.hpp"

#include "iner/tagger.hpp"

namespace iner {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json model_to_json(const TaggerModel& m) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["dims"] = {{"hash_buckets", m.dims.hash_buckets},
               {"d_e", m.dims.d_e},
               {"w", m.dims.w},
               {"h", m.dims.h},
               {"d", m.dims.d}};
  j["k"] = m.K;
  j["rng_seed"] = m.rng_seed;
  j["params"] = {{"embed", m.embed.data}, {"w1", m.w1.data},  {"b1", m.b1},
                 {"w2", m.w2.data},       {"b2", m.b2},       {"wc", m.wc.data},
                 {"bc", m.bc}};
  return j;
}

inline TaggerModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointVersion)
    throw parse_error("unsupported checkpoint version");
  TaggerModel m;
  const auto& d = j.at("dims");
  m.dims.hash_buckets = d.at("hash_buckets").get<int>();
  m.dims.d_e = d.at("d_e").get<int>();
  m.dims.w = d.at("w").get<int>();
  m.dims.h = d.at("h").get<int>();
  m.dims.d = d.at("d").get<int>();
  m.K = j.at("k").get<int>();
  m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const auto& p = j.at("params");
  auto load = [&p](const char* key, std::size_t expected) {
    auto v = p.at(key).get<std::vector<double>>();
    if (v.size() != expected) throw parse_error(std::string("checkpoint: bad size for ") + key);
    return v;
  };
  m.embed = Matrix(m.dims.hash_buckets, m.dims.d_e);
  m.embed.data = load("embed", m.embed.data.size());
  m.w1 = Matrix(m.dims.h, m.dims.window_input());
  m.w1.data = load("w1", m.w1.data.size());
  m.b1 = load("b1", static_cast<std::size_t>(m.dims.h));
  m.w2 = Matrix(m.dims.d, m.dims.h);
  m.w2.data = load("w2", m.w2.data.size());
  m.b2 = load("b2", static_cast<std::size_t>(m.dims.d));
  m.wc = Matrix(m.K, m.dims.d);
  m.wc.data = load("wc", m.wc.data.size());
  m.bc = load("bc", static_cast<std::size_t>(m.K));
  return m;
}

inline void save_model(const TaggerModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << model_to_json(m).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TaggerModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("checkpoint " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace iner
