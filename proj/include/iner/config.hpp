#pragma once

// Flat `key = value` run configuration. Every key is optional; unknown keys
// are rejected. Blank lines and '#' comments are allowed.

#include <fstream>
#include <sstream>
#include <string>

#include "iner/trainer.hpp"

namespace iner {

struct CliConfig {
  RunConfig run;
  std::string out_dir = "run";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline long long parse_int(const std::string& v, const std::string& key, std::size_t line) {
  std::size_t used = 0;
  long long out;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
    out = 0;
  }
  if (used != v.size())
    throw config_error("line " + std::to_string(line) + ": " + key + " expects an integer");
  return out;
}

inline double parse_real(const std::string& v, const std::string& key, std::size_t line) {
  std::size_t used = 0;
  double out;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
    out = 0;
  }
  if (used != v.size())
    throw config_error("line " + std::to_string(line) + ": " + key + " expects a number");
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key, std::size_t line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("line " + std::to_string(line) + ": " + key + " expects true or false");
}

}  // namespace detail

inline CliConfig parse_config_text(const std::string& text) {
  CliConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool d_e_set = false, d_set = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw config_error("line " + std::to_string(line_no) + ": expected key = value");

    if (key == "seed")
      cfg.run.seed = static_cast<std::uint64_t>(detail::parse_int(value, key, line_no));
    else if (key == "lr")
      cfg.run.lr = detail::parse_real(value, key, line_no);
    else if (key == "batch_size")
      cfg.run.batch_size = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "epochs")
      cfg.run.epochs_override = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "lambda1")
      cfg.run.loss.lambda1 = detail::parse_real(value, key, line_no);
    else if (key == "lambda2")
      cfg.run.loss.lambda2 = detail::parse_real(value, key, line_no);
    else if (key == "tau")
      cfg.run.tau = detail::parse_real(value, key, line_no);
    else if (key == "pseudo_mode")
      cfg.run.loss.pseudo_mode = pseudo_mode_from_string(value);
    else if (key == "use_kd")
      cfg.run.loss.use_kd = detail::parse_bool(value, key, line_no);
    else if (key == "use_cd")
      cfg.run.loss.use_cd = detail::parse_bool(value, key, line_no);
    else if (key == "use_se")
      cfg.run.loss.use_se = detail::parse_bool(value, key, line_no);
    else if (key == "normalize_soft_labels")
      cfg.run.loss.normalize_soft_labels = detail::parse_bool(value, key, line_no);
    else if (key == "fg")
      cfg.run.fg = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "pg")
      cfg.run.pg = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "embed_dim") {
      cfg.run.dims.d_e = static_cast<int>(detail::parse_int(value, key, line_no));
      d_e_set = true;
    } else if (key == "hidden_dim")
      cfg.run.dims.h = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "window")
      cfg.run.dims.w = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "hash_buckets")
      cfg.run.dims.hash_buckets = static_cast<int>(detail::parse_int(value, key, line_no));
    else if (key == "out_dir")
      cfg.out_dir = value;
    else
      throw config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    (void)d_set;
  }
  // The representation width is tied to the embedding width; there is no
  // separate key for it.
  if (d_e_set) cfg.run.dims.d = cfg.run.dims.d_e;
  cfg.run.validate();
  return cfg;
}

inline CliConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace iner
