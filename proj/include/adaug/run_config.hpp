// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// One flat configuration record for the command-line tools, serialized as a
// sectioned key = value file. Every run writes its resolved configuration to
// <out>/config.ini before doing any work, so a run can be reproduced exactly
// by pointing --config at the snapshot.

#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "adaug/ada.hpp"
#include "adaug/classic_aug.hpp"
#include "adaug/dataset.hpp"
#include "adaug/fs.hpp"
#include "adaug/interpret.hpp"
#include "adaug/unet.hpp"

namespace adaug {

struct RunConfig {
  SyntheticSpec data;
  // U-Net shape knobs; the input extent always follows data.n.
  int base_channels = 8;
  int kernel = 3;
  int depth = 3;
  float dropout = 0.5f;
  float bn_momentum = 0.4f;
  AdaConfig ada;
  AugmentParams aug;
  int batch_size = 8;
  float lr = 0.001f;
  std::uint64_t seed = 7;
  std::string out_dir = "runs/default";
  int threads = 0;

  UNetConfig unet_config() const {
    UNetConfig cfg;
    cfg.n = data.n;
    cfg.base_channels = base_channels;
    cfg.kernel = kernel;
    cfg.depth = depth;
    cfg.dropout_rate = dropout;
    cfg.bn_momentum = bn_momentum;
    return cfg;
  }

  void validate() const {
    data.validate();
    unet_config().validate();
    ada.validate(data.n);
    aug.validate();
    if (batch_size < 1)
      throw std::invalid_argument("config: batch_size must be >= 1");
    if (!(lr > 0.0f)) throw std::invalid_argument("config: lr must be > 0");
    if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
  }
};

namespace detail {

inline std::string fmt_float(float v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(v));
  return buf;
}

inline float parse_float(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const float f = std::stof(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return f;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number '" + v + "' for " + key);
  }
}

inline int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer '" + v + "' for " + key);
  }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const std::uint64_t u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer '" + v + "' for " + key);
  }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for " + key);
}

}  // namespace detail

inline std::string serialize_config(const RunConfig& c) {
  using detail::fmt_float;
  std::string out;
  out += "[data]\n";
  out += "n = " + std::to_string(c.data.n) + "\n";
  out += "train = " + std::to_string(c.data.train_count) + "\n";
  out += "val = " + std::to_string(c.data.val_count) + "\n";
  out += "noise_std = " + fmt_float(c.data.noise_std) + "\n";
  out += std::string("spurious = ") + (c.data.spurious_context ? "true" : "false") + "\n";
  out += "lure_strength = " + fmt_float(c.data.lure_strength) + "\n";
  out += "\n[unet]\n";
  out += "base_channels = " + std::to_string(c.base_channels) + "\n";
  out += "kernel = " + std::to_string(c.kernel) + "\n";
  out += "depth = " + std::to_string(c.depth) + "\n";
  out += "dropout = " + fmt_float(c.dropout) + "\n";
  out += "bn_momentum = " + fmt_float(c.bn_momentum) + "\n";
  out += "\n[ada]\n";
  out += "z = " + std::to_string(c.ada.z) + "\n";
  out += "standard_epochs = " + std::to_string(c.ada.standard_epochs) + "\n";
  out += "cycles = " + std::to_string(c.ada.cycles) + "\n";
  out += "ada_epochs = " + std::to_string(c.ada.ada_epochs) + "\n";
  out += "method = " + std::string(method_name(c.ada.method)) + "\n";
  out += "\n[aug]\n";
  out += "rotation_deg = " + fmt_float(c.aug.rotation_deg) + "\n";
  out += "shift_frac = " + fmt_float(c.aug.shift_frac) + "\n";
  out += "scale_lo = " + fmt_float(c.aug.scale_lo) + "\n";
  out += "scale_hi = " + fmt_float(c.aug.scale_hi) + "\n";
  out += "channel_shift = " + fmt_float(c.aug.channel_shift) + "\n";
  out += "elastic_alpha = " + fmt_float(c.aug.elastic_alpha) + "\n";
  out += "elastic_sigma = " + fmt_float(c.aug.elastic_sigma) + "\n";
  out += "\n[train]\n";
  out += "batch_size = " + std::to_string(c.batch_size) + "\n";
  out += "lr = " + fmt_float(c.lr) + "\n";
  out += "\n[run]\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "out = " + c.out_dir + "\n";
  out += "threads = " + std::to_string(c.threads) + "\n";
  return out;
}

// Applies one section-qualified assignment. Unknown keys are errors so typos
// in a config file cannot pass silently.
inline void config_set(RunConfig& c, const std::string& section, const std::string& key,
                       const std::string& value) {
  using namespace detail;
  const std::string where = section + "." + key;
  if (section == "data") {
    if (key == "n") c.data.n = parse_int(value, where);
    else if (key == "train") c.data.train_count = parse_int(value, where);
    else if (key == "val") c.data.val_count = parse_int(value, where);
    else if (key == "noise_std") c.data.noise_std = parse_float(value, where);
    else if (key == "spurious") c.data.spurious_context = parse_bool(value, where);
    else if (key == "lure_strength") c.data.lure_strength = parse_float(value, where);
    else throw std::invalid_argument("config: unknown key '" + where + "'");
  } else if (section == "unet") {
    if (key == "base_channels") c.base_channels = parse_int(value, where);
    else if (key == "kernel") c.kernel = parse_int(value, where);
    else if (key == "depth") c.depth = parse_int(value, where);
    else if (key == "dropout") c.dropout = parse_float(value, where);
    else if (key == "bn_momentum") c.bn_momentum = parse_float(value, where);
    else throw std::invalid_argument("config: unknown key '" + where + "'");
  } else if (section == "ada") {
    if (key == "z") c.ada.z = parse_int(value, where);
    else if (key == "standard_epochs") c.ada.standard_epochs = parse_int(value, where);
    else if (key == "cycles") c.ada.cycles = parse_int(value, where);
    else if (key == "ada_epochs") c.ada.ada_epochs = parse_int(value, where);
    else if (key == "method") c.ada.method = method_from_name(value);
    else throw std::invalid_argument("config: unknown key '" + where + "'");
  } else if (section == "aug") {
    if (key == "rotation_deg") c.aug.rotation_deg = parse_float(value, where);
    else if (key == "shift_frac") c.aug.shift_frac = parse_float(value, where);
    else if (key == "scale_lo") c.aug.scale_lo = parse_float(value, where);
    else if (key == "scale_hi") c.aug.scale_hi = parse_float(value, where);
    else if (key == "channel_shift") c.aug.channel_shift = parse_float(value, where);
    else if (key == "elastic_alpha") c.aug.elastic_alpha = parse_float(value, where);
    else if (key == "elastic_sigma") c.aug.elastic_sigma = parse_float(value, where);
    else throw std::invalid_argument("config: unknown key '" + where + "'");
  } else if (section == "train") {
    if (key == "batch_size") c.batch_size = parse_int(value, where);
    else if (key == "lr") c.lr = parse_float(value, where);
    else throw std::invalid_argument("config: unknown key '" + where + "'");
  } else if (section == "run") {
    if (key == "seed") c.seed = parse_u64(value, where);
    else if (key == "out") c.out_dir = value;
    else if (key == "threads") c.threads = parse_int(value, where);
    else throw std::invalid_argument("config: unknown key '" + where + "'");
  } else {
    throw std::invalid_argument("config: unknown section '" + section + "'");
  }
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::string section;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      if (pos > text.size()) break;
      continue;
    }
    const std::size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": malformed section header '" + line + "'");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value, got '" + line + "'");
    auto trim = [](std::string s) {
      const std::size_t f = s.find_first_not_of(" \t");
      if (f == std::string::npos) return std::string();
      const std::size_t l = s.find_last_not_of(" \t");
      return s.substr(f, l - f + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": key '" + key + "' appears before any section");
    config_set(c, section, key, value);
    if (pos > text.size()) break;
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  return parse_config(detail::read_file(path));
}

inline void save_config(const std::string& path, const RunConfig& c) {
  detail::write_file_atomic(path, serialize_config(c));
}

}  // namespace adaug
