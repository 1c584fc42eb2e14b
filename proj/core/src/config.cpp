// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "cvrnn/errors.hpp"

namespace cvrnn {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("expected key=value", line_no);
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string to_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad clip must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint-every must be >= 0");
  if (train_stride < 1) throw ConfigError("train-stride must be >= 1");
  model.validate();
  loss.validate(model.image_size);
}

KeyValues to_key_values(const TrainConfig& c) {
  return {
      {"model", to_string(c.model_kind)},
      {"image-size", std::to_string(c.model.image_size)},
      {"channels", std::to_string(c.model.channels)},
      {"T", std::to_string(c.model.horizon)},
      {"z-dim", std::to_string(c.model.z_dim)},
      {"feat-hw", std::to_string(c.model.feat_hw)},
      {"feat-ch", std::to_string(c.model.feat_ch)},
      {"hidden-ch", std::to_string(c.model.hidden_ch)},
      {"base-ch", std::to_string(c.model.base_ch)},
      {"model-seed", std::to_string(c.model.seed)},
      {"no-l1", fmt_bool(!c.loss.use_l1)},
      {"no-msssim", fmt_bool(!c.loss.use_msssim)},
      {"no-gdl", fmt_bool(!c.loss.use_gdl)},
      {"msssim-scales", std::to_string(c.loss.msssim_scales)},
      {"msssim-window", std::to_string(c.loss.msssim_window)},
      {"msssim-sigma", fmt_double(c.loss.msssim_sigma)},
      {"msssim-gaussian", fmt_bool(c.loss.msssim_gaussian)},
      {"gdl-alpha", fmt_double(c.loss.gdl_alpha)},
      {"steps", std::to_string(c.steps)},
      {"batch", std::to_string(c.batch_size)},
      {"lr", fmt_double(c.learning_rate)},
      {"beta", fmt_double(c.beta)},
      {"grad-clip", c.grad_clip ? fmt_double(*c.grad_clip) : "none"},
      {"seed", std::to_string(c.seed)},
      {"checkpoint-every", std::to_string(c.checkpoint_every)},
      {"train-stride", std::to_string(c.train_stride)},
      {"per-step-loss", fmt_bool(c.per_step_loss)},
  };
}

TrainConfig apply_key_values(TrainConfig c, const KeyValues& kv) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"model", [&](auto&, auto& v) { c.model_kind = parse_model_kind(v); }},
      {"image-size", [&](auto& k, auto& v) { c.model.image_size = to_int(k, v); }},
      {"channels", [&](auto& k, auto& v) { c.model.channels = to_int(k, v); }},
      {"T", [&](auto& k, auto& v) { c.model.horizon = to_int(k, v); }},
      {"z-dim", [&](auto& k, auto& v) { c.model.z_dim = to_int(k, v); }},
      {"feat-hw", [&](auto& k, auto& v) { c.model.feat_hw = to_int(k, v); }},
      {"feat-ch", [&](auto& k, auto& v) { c.model.feat_ch = to_int(k, v); }},
      {"hidden-ch", [&](auto& k, auto& v) { c.model.hidden_ch = to_int(k, v); }},
      {"base-ch", [&](auto& k, auto& v) { c.model.base_ch = to_int(k, v); }},
      {"model-seed", [&](auto& k, auto& v) { c.model.seed = to_u64(k, v); }},
      {"no-l1", [&](auto& k, auto& v) { c.loss.use_l1 = !to_bool(k, v); }},
      {"no-msssim", [&](auto& k, auto& v) { c.loss.use_msssim = !to_bool(k, v); }},
      {"no-gdl", [&](auto& k, auto& v) { c.loss.use_gdl = !to_bool(k, v); }},
      {"msssim-scales", [&](auto& k, auto& v) { c.loss.msssim_scales = to_int(k, v); }},
      {"msssim-window", [&](auto& k, auto& v) { c.loss.msssim_window = to_int(k, v); }},
      {"msssim-sigma", [&](auto& k, auto& v) { c.loss.msssim_sigma = to_double(k, v); }},
      {"msssim-gaussian", [&](auto& k, auto& v) { c.loss.msssim_gaussian = to_bool(k, v); }},
      {"gdl-alpha", [&](auto& k, auto& v) { c.loss.gdl_alpha = to_double(k, v); }},
      {"steps", [&](auto& k, auto& v) { c.steps = to_int(k, v); }},
      {"batch", [&](auto& k, auto& v) { c.batch_size = to_int(k, v); }},
      {"lr", [&](auto& k, auto& v) { c.learning_rate = to_double(k, v); }},
      {"beta", [&](auto& k, auto& v) { c.beta = to_double(k, v); }},
      {"grad-clip",
       [&](auto& k, auto& v) {
         if (v == "none" || v == "0") {
           c.grad_clip.reset();
         } else {
           c.grad_clip = to_double(k, v);
         }
       }},
      {"seed", [&](auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"checkpoint-every", [&](auto& k, auto& v) { c.checkpoint_every = to_int(k, v); }},
      {"train-stride", [&](auto& k, auto& v) { c.train_stride = to_int(k, v); }},
      {"per-step-loss", [&](auto& k, auto& v) { c.per_step_loss = to_bool(k, v); }},
  };
  for (const auto& [k, v] : kv) {
    const auto it = setters.find(k);
    if (it == setters.end()) throw ConfigError("unknown training option '" + k + "'");
    it->second(k, v);
  }
  return c;
}

std::string config_hash(const TrainConfig& cfg) { return hash_hex(fnv1a64(to_text(to_key_values(cfg)))); }

TrainConfig desk_scale_config() {
  TrainConfig c;
  c.model.image_size = 64;
  c.model.channels = 1;
  c.model.feat_hw = 8;
  return c;
}

}  // namespace cvrnn
