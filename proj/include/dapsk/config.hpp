// Simulation campaign configuration and its key = value text format.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapsk/channel.hpp"
#include "dapsk/dataset.hpp"
#include "dapsk/modem.hpp"
#include "dapsk/neural.hpp"

namespace dapsk {

enum class Mode { differential_onebit, differential_vql_nn, differential_vql_lrt, coherent };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::differential_onebit: return "differential-onebit";
    case Mode::differential_vql_nn: return "differential-vql-nn";
    case Mode::differential_vql_lrt: return "differential-vql-lrt";
    case Mode::coherent: return "coherent";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::differential_onebit, Mode::differential_vql_nn, Mode::differential_vql_lrt,
                 Mode::coherent}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown mode '" + s + "'");
}

struct SimConfig {
  int uses = 256;
  int antennas = 96;
  // VQL group sizes; all zero means an even three-way split (remainder to the sign group).
  int group1 = 0;
  int group2 = 0;
  int group3 = 0;
  int taps = 31;
  std::string pdp = "uniform";  // uniform | exponential
  double pdp_decay = 8.0;
  int mod_order = 16;  // 2M points
  double ring_ratio = 2.0;
  std::vector<double> snr_db{0, 5, 10, 15, 20, 25};
  int blocks = 100;
  std::uint64_t seed = 1;
  std::vector<Mode> modes{Mode::differential_vql_nn};
  double ser_threshold = 0.05;
  double pilot_fraction = 0.5;
  std::string coherent_alphabet = "psk";  // psk | apsk
  std::string model_path;
  bool train_model = false;
  int threads = 0;  // 0: hardware concurrency
  bool drift_compensation = true;  // derotate the previous frame by the mean channel drift

  // Amplitude classifier training.
  std::size_t train_samples = 20000;
  int epochs = 250;
  std::size_t batch_size = 1000;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden{64, 64, 64};

  Constellation constellation() const { return Constellation(mod_order / 2, ring_ratio); }

  std::array<int, 3> group_sizes() const {
    if (group1 == 0 && group2 == 0 && group3 == 0) {
      const int third = antennas / 3;
      return {third, antennas - 2 * third, third};
    }
    return {group1, group2, group3};
  }

  std::vector<double> pdp_profile() const {
    if (pdp == "uniform") return ChannelConfig::uniform_pdp(taps);
    if (pdp == "exponential") return ChannelConfig::exponential_pdp(taps, pdp_decay);
    throw std::invalid_argument("unknown pdp '" + pdp + "' (expected uniform or exponential)");
  }

  DatasetConfig dataset_config() const {
    const auto g = group_sizes();
    return {constellation(), uses, pdp_profile(), g[0], g[1], g[2], snr_db};
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.learning_rate = learning_rate;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.seed = derive_seed(seed, 0x7261696eULL);
    return t;
  }

  bool uses_mode(Mode m) const { return std::find(modes.begin(), modes.end(), m) != modes.end(); }

  void validate() const {
    require(uses >= 2, "config: uses must be >= 2");
    require(antennas >= 1, "config: antennas must be >= 1");
    require(taps >= 1 && taps <= uses, "config: taps must lie in [1, uses]");
    require(mod_order >= 4 && mod_order % 2 == 0, "config: mod_order must be an even number >= 4");
    (void)constellation();
    (void)pdp_profile();
    require(blocks >= 1, "config: blocks must be >= 1");
    for (std::size_t k = 1; k < snr_db.size(); ++k) {
      require(snr_db[k] > snr_db[k - 1], "config: snr_db grid must be strictly increasing");
    }
    const auto g = group_sizes();
    require(g[0] >= 0 && g[1] >= 1 && g[2] >= 0, "config: VQL needs a non-empty sign group");
    require(g[0] + g[1] + g[2] == antennas, "config: group sizes must sum to antennas");
    require(!modes.empty(), "config: at least one mode is required");
    require(ser_threshold >= 0.0 && ser_threshold <= 1.0, "config: ser_threshold must lie in [0, 1]");
    require(pilot_fraction > 0.0 && pilot_fraction < 1.0, "config: pilot_fraction must lie in (0, 1)");
    require(coherent_alphabet == "psk" || coherent_alphabet == "apsk",
            "config: coherent_alphabet must be psk or apsk");
    require(threads >= 0, "config: threads must be >= 0");
    train_config().validate();
    require(train_samples >= 1, "config: train_samples must be >= 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + ": not a number: '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + ": not an integer: '" + v + "'");
  return n;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + ": expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(SimConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  auto as_int = [&] { return static_cast<int>(parse_int(key, value)); };
  if (key == "uses") c.uses = as_int();
  else if (key == "antennas") c.antennas = as_int();
  else if (key == "group1") c.group1 = as_int();
  else if (key == "group2") c.group2 = as_int();
  else if (key == "group3") c.group3 = as_int();
  else if (key == "taps") c.taps = as_int();
  else if (key == "pdp") c.pdp = value;
  else if (key == "pdp_decay") c.pdp_decay = parse_double(key, value);
  else if (key == "mod_order") c.mod_order = as_int();
  else if (key == "ring_ratio") c.ring_ratio = parse_double(key, value);
  else if (key == "snr_db") {
    c.snr_db.clear();
    for (const auto& s : split_list(value)) c.snr_db.push_back(parse_double(key, s));
  } else if (key == "blocks") c.blocks = as_int();
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "mode" || key == "modes") {
    c.modes.clear();
    for (const auto& s : split_list(value)) c.modes.push_back(parse_mode(s));
  } else if (key == "ser_threshold") c.ser_threshold = parse_double(key, value);
  else if (key == "pilot_fraction") c.pilot_fraction = parse_double(key, value);
  else if (key == "coherent_alphabet") c.coherent_alphabet = value;
  else if (key == "model") c.model_path = value;
  else if (key == "train_model") c.train_model = parse_bool(key, value);
  else if (key == "threads") c.threads = as_int();
  else if (key == "drift_compensation") c.drift_compensation = parse_bool(key, value);
  else if (key == "train_samples") c.train_samples = static_cast<std::size_t>(parse_int(key, value));
  else if (key == "epochs") c.epochs = as_int();
  else if (key == "batch_size") c.batch_size = static_cast<std::size_t>(parse_int(key, value));
  else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
  else if (key == "hidden") {
    c.hidden.clear();
    for (const auto& s : split_list(value)) c.hidden.push_back(static_cast<std::size_t>(parse_int(key, s)));
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

/// Parses `key = value` lines; `#` starts a comment.
inline SimConfig parse_config(std::istream& is, SimConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  return parse_config(is);
}

}  // namespace dapsk
