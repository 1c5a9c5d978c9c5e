#pragma once

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfl/trainer.hpp"

namespace sfl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TrainerConfig trainer;
  std::string dataset = "benchmark";  // 'benchmark' or a dataset CSV path
  std::uint64_t data_seed = 77;
  int classifier_epochs = 20;
};

namespace detail {

struct KeyValue {
  std::string value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

[[noreturn]] inline void config_fail(const std::string& key, int line, const std::string& why) {
  throw ConfigError("config error at line " + std::to_string(line) + ", key '" + key +
                    "': " + why);
}

inline double parse_double(const std::string& key, const KeyValue& kv) {
  char* end = nullptr;
  const double v = std::strtod(kv.value.c_str(), &end);
  if (end == kv.value.c_str() || *end != '\0') config_fail(key, kv.line, "not a number");
  return v;
}

inline long long parse_int(const std::string& key, const KeyValue& kv) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
  if (ec != std::errc() || p != kv.value.data() + kv.value.size())
    config_fail(key, kv.line, "not an integer");
  return v;
}

}  // namespace detail

// Flat `key = value` configuration with '#' comments. Unknown keys are
// rejected; every value is range-checked at parse time.
inline RunConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path);

  std::map<std::string, detail::KeyValue> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config error at line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config error at line " + std::to_string(lineno) + ": empty key");
    entries[key] = detail::KeyValue{value, lineno};
  }

  RunConfig cfg;
  auto take = [&](const char* key) -> std::optional<detail::KeyValue> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    detail::KeyValue kv = it->second;
    entries.erase(it);
    if (kv.value.empty()) return std::nullopt;  // blank value = use the default
    return kv;
  };

  if (auto kv = take("method")) {
    try {
      cfg.trainer.method = method_from_name(kv->value);
    } catch (const std::invalid_argument&) {
      detail::config_fail("method", kv->line, "expected one of marginal|conditional|joint|sfl|sfl_plus");
    }
  }
  if (auto kv = take("loss")) {
    if (kv->value == "bce") cfg.trainer.loss = LossKind::Bce;
    else if (kv->value == "hinge") cfg.trainer.loss = LossKind::Hinge;
    else detail::config_fail("loss", kv->line, "expected bce|hinge");
  }
  if (auto kv = take("disc_head")) {
    if (kv->value == "approx") cfg.trainer.disc_variant = DiscVariant::Approx;
    else if (kv->value == "exact") cfg.trainer.disc_variant = DiscVariant::Exact;
    else detail::config_fail("disc_head", kv->line, "expected approx|exact");
  }
  if (auto kv = take("batch")) {
    const long long v = detail::parse_int("batch", *kv);
    if (v < 1) detail::config_fail("batch", kv->line, "must be >= 1");
    cfg.trainer.batch = static_cast<std::size_t>(v);
  }
  if (auto kv = take("epochs")) {
    const long long v = detail::parse_int("epochs", *kv);
    if (v < 0) detail::config_fail("epochs", kv->line, "must be >= 0");
    cfg.trainer.e_max = static_cast<int>(v);
  }
  if (auto kv = take("iters_per_epoch")) {
    const long long v = detail::parse_int("iters_per_epoch", *kv);
    if (v < 1) detail::config_fail("iters_per_epoch", kv->line, "must be >= 1");
    cfg.trainer.n_max = static_cast<int>(v);
  }
  if (auto kv = take("latent_dim")) {
    const long long v = detail::parse_int("latent_dim", *kv);
    if (v < 1) detail::config_fail("latent_dim", kv->line, "must be >= 1");
    cfg.trainer.latent_dim = static_cast<std::size_t>(v);
  }
  if (auto kv = take("lr_d")) {
    const double v = detail::parse_double("lr_d", *kv);
    if (v <= 0.0) detail::config_fail("lr_d", kv->line, "must be positive");
    cfg.trainer.alpha_d = v;
  }
  if (auto kv = take("lr_g")) {
    const double v = detail::parse_double("lr_g", *kv);
    if (v <= 0.0) detail::config_fail("lr_g", kv->line, "must be positive");
    cfg.trainer.alpha_g = v;
  }
  if (auto kv = take("d_steps")) {
    const long long v = detail::parse_int("d_steps", *kv);
    if (v < 1) detail::config_fail("d_steps", kv->line, "must be >= 1");
    cfg.trainer.d_steps = static_cast<int>(v);
  }
  if (auto kv = take("nu")) {
    const double v = detail::parse_double("nu", *kv);
    if (v < 0.0 || v > 1.0) detail::config_fail("nu", kv->line, "must lie in [0,1]");
    cfg.trainer.nu = v;
  }
  if (auto kv = take("topk_fraction")) {
    const double v = detail::parse_double("topk_fraction", *kv);
    if (v <= 0.0 || v > 1.0) detail::config_fail("topk_fraction", kv->line, "must lie in (0,1]");
    cfg.trainer.topk_fraction = v;
  }
  if (auto kv = take("retention_ratio")) {
    const double v = detail::parse_double("retention_ratio", *kv);
    if (v <= 0.0 || v > 1.0) detail::config_fail("retention_ratio", kv->line, "must lie in (0,1]");
    cfg.trainer.retention_ratio = v;
  }
  if (auto kv = take("seed")) {
    const long long v = detail::parse_int("seed", *kv);
    if (v < 0) detail::config_fail("seed", kv->line, "must be >= 0");
    cfg.trainer.seed = static_cast<std::uint64_t>(v);
  }
  if (auto kv = take("eval_every")) {
    const long long v = detail::parse_int("eval_every", *kv);
    if (v < 1) detail::config_fail("eval_every", kv->line, "must be >= 1");
    cfg.trainer.eval_every = static_cast<int>(v);
  }
  if (auto kv = take("n_eval")) {
    const long long v = detail::parse_int("n_eval", *kv);
    if (v < 8) detail::config_fail("n_eval", kv->line, "must be >= 8");
    cfg.trainer.n_eval = static_cast<std::size_t>(v);
  }
  if (auto kv = take("metric_k")) {
    const long long v = detail::parse_int("metric_k", *kv);
    if (v < 1) detail::config_fail("metric_k", kv->line, "must be >= 1");
    cfg.trainer.metric_k = static_cast<std::size_t>(v);
  }
  if (auto kv = take("dataset")) cfg.dataset = kv->value;
  if (auto kv = take("data_seed")) {
    const long long v = detail::parse_int("data_seed", *kv);
    if (v < 0) detail::config_fail("data_seed", kv->line, "must be >= 0");
    cfg.data_seed = static_cast<std::uint64_t>(v);
  }
  if (auto kv = take("classifier_epochs")) {
    const long long v = detail::parse_int("classifier_epochs", *kv);
    if (v < 0) detail::config_fail("classifier_epochs", kv->line, "must be >= 0");
    cfg.classifier_epochs = static_cast<int>(v);
  }

  if (!entries.empty()) {
    const auto& [key, kv] = *entries.begin();
    detail::config_fail(key, kv.line, "unknown key");
  }
  if (cfg.dataset != "benchmark") {
    std::ifstream probe(cfg.dataset);
    if (!probe) throw ConfigError("config error: dataset file not found: " + cfg.dataset);
  }
  if (cfg.trainer.method == Method::SflPlus && cfg.classifier_epochs < 1)
    throw ConfigError("config error: sfl_plus requires classifier_epochs >= 1");
  return cfg;
}

inline const char* config_help() {
  return
      "configuration keys (flat `key = value`, '#' comments):\n"
      "  method            marginal|conditional|joint|sfl|sfl_plus  (default joint)\n"
      "  loss              hinge|bce                                (default hinge)\n"
      "  disc_head         approx|exact conditional term            (default approx)\n"
      "  batch             minibatch size B                         (default 128)\n"
      "  epochs            epoch budget E_max                       (default 200)\n"
      "  iters_per_epoch   minibatches per epoch                    (default 30)\n"
      "  latent_dim        generator latent width                   (default 2)\n"
      "  lr_d, lr_g        Adam step sizes                          (default 2e-3, 1e-3)\n"
      "  d_steps           discriminator steps per generator step   (default 1)\n"
      "  nu                maximum focusing rate, in [0,1]          (default 0.5)\n"
      "  topk_fraction     generator top-k filter, in (0,1]         (default off)\n"
      "  retention_ratio   instance-selection retention, in (0,1]   (default off)\n"
      "  seed              run seed                                 (default 1)\n"
      "  eval_every        metric cadence in epochs                 (default 10)\n"
      "  n_eval            samples per metric evaluation            (default 2000)\n"
      "  metric_k          manifold neighbor count                  (default 3)\n"
      "  dataset           'benchmark' or a dataset CSV path        (default benchmark)\n"
      "  data_seed         dataset generation seed                  (default 77)\n"
      "  classifier_epochs desk-classifier training epochs          (default 20)\n";
}

}  // namespace sfl
