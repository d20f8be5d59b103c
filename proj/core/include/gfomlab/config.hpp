#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfomlab/ensembles.hpp"

namespace gfom {

// Pre-normalization variance profile by name:
//   constant:     sigma^2_ij = value
//   row_linear:   sigma^2_ij = value * (i + 1) / rows
//   block:        value on the diagonal blocks (split at rows/2, cols/2), value_b elsewhere
struct ProfileConfig {
  std::string kind = "constant";
  double value = 1.0;
  double value_b = 1.0;

  VarianceProfile build(std::size_t rows, std::size_t cols) const;
  bool operator==(const ProfileConfig&) const = default;
};

struct EnsembleConfig {
  std::string law = "gaussian";
  double p = 0.5;
  ProfileConfig profile;
  // Unset fields follow the program: symmetric programs use a symmetric
  // inv_sqrt_n ensemble, asymmetric programs an inv_sqrt_m one.
  std::optional<std::string> normalization;
  std::optional<bool> symmetric;
  std::optional<double> truncation;

  EnsembleSpec build(bool symmetric_program, std::size_t m, std::size_t n) const;
  bool operator==(const EnsembleConfig&) const = default;
};

// Acceptance thresholds. A statistic passes when |gap| <= its tolerance;
// SE-based rows use se_multiple * combined SE, capped by `abs` when set.
struct Tolerances {
  std::optional<double> abs;
  double se_multiple = 4.0;
  double ks = 0.06;
  double variance_rel = 0.15;
  double r2 = 0.95;
  std::optional<double> ratio;  // delocalization bound; 10 (log n)^{2t} when unset
  double exact = 1e-8;          // pathwise identities

  bool operator==(const Tolerances&) const = default;
};

struct ExperimentConfig {
  std::string experiment;
  std::string program = "power_iteration";
  nlohmann::json params = nlohmann::json::object();
  EnsembleConfig ensemble;
  std::optional<std::string> law_b;
  double law_b_p = 0.5;
  std::size_t n = 100;
  std::optional<std::size_t> m;
  std::size_t T = 1;
  std::size_t replicates = 20;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 20000;
  std::string test_function = "square";
  std::vector<std::size_t> coordinates;
  Tolerances tolerance;
  std::vector<std::size_t> sweep_n;
  std::size_t threads = 0;

  std::size_t rows() const noexcept { return m.value_or(n); }
  bool operator==(const ExperimentConfig&) const = default;
};

// Parses and validates a config document. Syntax errors raise ConfigError
// with "line L, column C"; unknown keys raise ConfigError naming the key;
// out-of-range values raise ValidationError naming the field.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "config");
ExperimentConfig parse_config(const std::string& path);

// Full document with every default filled in; parse(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

// SHA-256 of the canonical (key-sorted) serialization, hex encoded.
std::string config_hash(const ExperimentConfig& c);
std::string sha256_hex(const std::string& data);

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> versions;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  bool dry_run = false;
  bool partial = false;
  std::string status = "ok";  // ok, tolerance_failure, config_error, numerical_error, dry_run
  std::string message;
};
nlohmann::json to_json(const RunManifest& m);

}  // namespace gfom
