#pragma once

// Flat `key = value` run configuration shared by every subcommand. Lines
// starting with '#' are comments. Unknown keys are rejected so a typo can
// never be silently ignored.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l2r/contrastive.hpp"
#include "l2r/sampling.hpp"

namespace l2r::cli {

struct RunConfig {
  sampling::SamplingConfig sampling;
  contrastive::ContrastiveConfig contrastive;
  std::size_t gmm_components = 5;
  std::size_t frames = 50;
  std::size_t objects = 8;
  std::size_t steps = 200;
  double learning_rate = 0.05;
  std::string ablate_weights = "none";  ///< int | dist | spa | none

  std::string input;
  std::string out;
  std::string gmm;
  std::string counts;
  std::string corpus;
  std::string report;
  std::string plot;
  std::string a;
  std::string b;
};

struct KeyDoc {
  std::string_view name;
  std::string_view unit;
  std::string_view description;
};

/// Every accepted key, in documentation order.
std::span<const KeyDoc> run_config_keys();

/// Throws ConfigError for an unknown key or a value of the wrong type.
void set_key(RunConfig& config, std::string_view key, std::string_view value);

/// Applies the lines of a config file on top of `config`. Errors carry the line number.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Sampling alphas after `ablate_weights` is applied: the named family alone.
sampling::SamplingConfig effective_sampling(const RunConfig& config);

/// Every key with its resolved value, as a JSON object.
std::string to_json(const RunConfig& config);

}  // namespace l2r::cli
