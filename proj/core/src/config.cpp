#include "gfomlab/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "gfomlab/error.hpp"
#include "gfomlab/programs.hpp"
#include "gfomlab/test_functions.hpp"

namespace gfom {

using nlohmann::json;

VarianceProfile ProfileConfig::build(std::size_t rows, std::size_t cols) const {
  if (kind == "constant") return VarianceProfile::constant(rows, cols, value);
  if (kind == "row_linear") {
    const double v = value;
    return VarianceProfile::from_function(rows, cols, [v, rows](std::size_t i, std::size_t) {
      return v * static_cast<double>(i + 1) / static_cast<double>(rows);
    });
  }
  if (kind == "block") {
    const double a = value, b = value_b;
    return VarianceProfile::from_function(rows, cols, [=](std::size_t i, std::size_t j) {
      return (i < rows / 2) == (j < cols / 2) ? a : b;
    });
  }
  throw ConfigError("unknown profile kind '" + kind + "'");
}

EnsembleSpec EnsembleConfig::build(bool symmetric_program, std::size_t m, std::size_t n) const {
  EnsembleSpec spec;
  spec.law = EntryLaw::parse(law, p);
  spec.symmetric = symmetric.value_or(symmetric_program);
  spec.normalization = normalization ? parse_normalization(*normalization)
                                     : (spec.symmetric ? Normalization::inv_sqrt_n
                                                       : Normalization::inv_sqrt_m);
  spec.truncation = truncation;
  spec.profile = spec.symmetric ? profile.build(n, n) : profile.build(m, n);
  spec.validate(spec.symmetric ? n : m, n);
  return spec;
}

namespace {

const std::set<std::string> kTopKeys = {
    "experiment", "program", "ensemble", "law_b",   "n",         "m",           "T",
    "replicates", "seed",    "mc_samples", "test_function", "coordinates", "tolerance",
    "sweep_n",    "threads"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

std::size_t get_count(const json& j, const char* field, std::size_t min_value) {
  const json& v = j.at(field);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
    std::ostringstream os;
    os << field << ": must be an integer >= " << min_value;
    throw ValidationError(os.str());
  }
  return v.get<std::size_t>();
}

double get_number(const json& j, const char* field) {
  const json& v = j.at(field);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    throw ValidationError(std::string(field) + ": must be a finite number");
  }
  return v.get<double>();
}

std::string get_string(const json& j, const char* field) {
  const json& v = j.at(field);
  if (!v.is_string()) throw ValidationError(std::string(field) + ": must be a string");
  return v.get<std::string>();
}

ProfileConfig parse_profile(const json& j) {
  ProfileConfig p;
  if (j.is_number()) {
    p.value = j.get<double>();
  } else {
    check_keys(j, {"kind", "value", "value_b"}, "ensemble.profile");
    if (j.contains("kind")) p.kind = get_string(j, "kind");
    if (j.contains("value")) p.value = get_number(j, "value");
    if (j.contains("value_b")) p.value_b = get_number(j, "value_b");
  }
  if (p.kind != "constant" && p.kind != "row_linear" && p.kind != "block") {
    throw ValidationError("ensemble.profile.kind: unknown profile '" + p.kind + "'");
  }
  if (!(p.value >= 0.0) || !(p.value_b >= 0.0)) {
    throw ValidationError("ensemble.profile: variances must be nonnegative");
  }
  return p;
}

EnsembleConfig parse_ensemble(const json& j) {
  check_keys(j, {"law", "p", "profile", "normalization", "symmetric", "truncation"}, "ensemble");
  EnsembleConfig e;
  if (j.contains("law")) e.law = get_string(j, "law");
  if (j.contains("p")) e.p = get_number(j, "p");
  try {
    (void)EntryLaw::parse(e.law, e.p);
  } catch (const std::exception& ex) {
    throw ValidationError(std::string("ensemble.law: ") + ex.what());
  }
  if (j.contains("profile")) e.profile = parse_profile(j.at("profile"));
  if (j.contains("normalization")) {
    e.normalization = get_string(j, "normalization");
    try {
      (void)parse_normalization(*e.normalization);
    } catch (const std::exception& ex) {
      throw ValidationError(std::string("ensemble.normalization: ") + ex.what());
    }
  }
  if (j.contains("symmetric")) {
    if (!j.at("symmetric").is_boolean()) throw ValidationError("ensemble.symmetric: must be bool");
    e.symmetric = j.at("symmetric").get<bool>();
  }
  if (j.contains("truncation")) {
    e.truncation = get_number(j, "truncation");
    if (!(*e.truncation > 0.0)) throw ValidationError("ensemble.truncation: must be positive");
  }
  return e;
}

Tolerances parse_tolerance(const json& j) {
  Tolerances t;
  if (j.is_number()) {
    t.abs = j.get<double>();
  } else {
    check_keys(j, {"abs", "se_multiple", "ks", "variance_rel", "r2", "ratio", "exact"},
               "tolerance");
    if (j.contains("abs")) t.abs = get_number(j, "abs");
    if (j.contains("se_multiple")) t.se_multiple = get_number(j, "se_multiple");
    if (j.contains("ks")) t.ks = get_number(j, "ks");
    if (j.contains("variance_rel")) t.variance_rel = get_number(j, "variance_rel");
    if (j.contains("r2")) t.r2 = get_number(j, "r2");
    if (j.contains("ratio")) t.ratio = get_number(j, "ratio");
    if (j.contains("exact")) t.exact = get_number(j, "exact");
  }
  if ((t.abs && !(*t.abs >= 0.0)) || !(t.se_multiple > 0.0) || !(t.ks > 0.0) ||
      !(t.variance_rel > 0.0) || (t.ratio && !(*t.ratio > 0.0)) || !(t.exact > 0.0)) {
    throw ValidationError("tolerance: thresholds must be positive");
  }
  return t;
}

std::vector<std::size_t> get_index_list(const json& j, const char* field, std::size_t min_value) {
  const json& v = j.at(field);
  if (!v.is_array()) throw ValidationError(std::string(field) + ": must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < static_cast<long long>(min_value)) {
      throw ValidationError(std::string(field) + ": entries must be integers >= " +
                            std::to_string(min_value));
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, kTopKeys, "config");
  ExperimentConfig c;
  c.experiment = j.contains("experiment") ? get_string(j, "experiment") : "se_vs_simulation";
  if (j.contains("program")) {
    const json& p = j.at("program");
    if (p.is_string()) {
      c.program = p.get<std::string>();
    } else {
      check_keys(p, {"name", "params"}, "program");
      if (p.contains("name")) c.program = get_string(p, "name");
      if (p.contains("params")) {
        if (!p.at("params").is_object()) throw ValidationError("program.params: must be an object");
        c.params = p.at("params");
      }
    }
  }
  const auto& reg = program_registry();
  if (std::none_of(reg.begin(), reg.end(), [&](const ProgramInfo& i) { return i.key == c.program; })) {
    throw ValidationError("program.name: unknown program '" + c.program + "'");
  }
  if (j.contains("ensemble")) c.ensemble = parse_ensemble(j.at("ensemble"));
  if (j.contains("law_b")) {
    const json& b = j.at("law_b");
    if (b.is_string()) {
      c.law_b = b.get<std::string>();
    } else {
      check_keys(b, {"law", "p"}, "law_b");
      c.law_b = get_string(b, "law");
      if (b.contains("p")) c.law_b_p = get_number(b, "p");
    }
    try {
      (void)EntryLaw::parse(*c.law_b, c.law_b_p);
    } catch (const std::exception& ex) {
      throw ValidationError(std::string("law_b: ") + ex.what());
    }
  }
  if (j.contains("n")) c.n = get_count(j, "n", 1);
  if (j.contains("m")) c.m = get_count(j, "m", 1);
  if (j.contains("T")) c.T = get_count(j, "T", 1);
  if (j.contains("replicates")) c.replicates = get_count(j, "replicates", 1);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                   s.get<long long>() < 0)) {
      throw ValidationError("seed: must be a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("mc_samples")) c.mc_samples = get_count(j, "mc_samples", 2);
  if (c.mc_samples < 2 * c.T + 2) {
    throw ValidationError("mc_samples: must be at least 2 T + 2");
  }
  if (j.contains("test_function")) c.test_function = get_string(j, "test_function");
  try {
    (void)make_test_function(c.test_function);
  } catch (const std::exception& ex) {
    throw ValidationError(std::string("test_function: ") + ex.what());
  }
  if (j.contains("coordinates")) c.coordinates = get_index_list(j, "coordinates", 0);
  if (j.contains("tolerance")) c.tolerance = parse_tolerance(j.at("tolerance"));
  if (j.contains("sweep_n")) c.sweep_n = get_index_list(j, "sweep_n", 1);
  if (j.contains("threads")) c.threads = get_count(j, "threads", 0);
  return c;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offsets are 1-based positions of the failing character.
    const std::size_t pos = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ": parse error at line " << line << ", column " << col;
    throw ConfigError(os.str());
  }
  return config_from_json(j);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["program"] = {{"name", c.program}, {"params", c.params}};
  json e;
  e["law"] = c.ensemble.law;
  e["p"] = c.ensemble.p;
  e["profile"] = {{"kind", c.ensemble.profile.kind},
                  {"value", c.ensemble.profile.value},
                  {"value_b", c.ensemble.profile.value_b}};
  if (c.ensemble.normalization) e["normalization"] = *c.ensemble.normalization;
  if (c.ensemble.symmetric) e["symmetric"] = *c.ensemble.symmetric;
  if (c.ensemble.truncation) e["truncation"] = *c.ensemble.truncation;
  j["ensemble"] = e;
  if (c.law_b) j["law_b"] = {{"law", *c.law_b}, {"p", c.law_b_p}};
  j["n"] = c.n;
  if (c.m) j["m"] = *c.m;
  j["T"] = c.T;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["mc_samples"] = c.mc_samples;
  j["test_function"] = c.test_function;
  j["coordinates"] = c.coordinates;
  json t;
  if (c.tolerance.abs) t["abs"] = *c.tolerance.abs;
  t["se_multiple"] = c.tolerance.se_multiple;
  t["ks"] = c.tolerance.ks;
  t["variance_rel"] = c.tolerance.variance_rel;
  t["r2"] = c.tolerance.r2;
  if (c.tolerance.ratio) t["ratio"] = *c.tolerance.ratio;
  t["exact"] = c.tolerance.exact;
  j["tolerance"] = t;
  j["sweep_n"] = c.sweep_n;
  j["threads"] = c.threads;
  return j;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw NumericalError("sha256: context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw NumericalError("sha256: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(to_json(c).dump()); }

json to_json(const RunManifest& m) {
  return {{"config_hash", m.config_hash}, {"seed", m.seed},       {"versions", m.versions},
          {"started", m.started},         {"finished", m.finished}, {"outputs", m.outputs},
          {"dry_run", m.dry_run},         {"partial", m.partial},   {"status", m.status},
          {"message", m.message}};
}

}  // namespace gfom
