#include "uspcov/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

namespace uspcov {

namespace {

using Json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    out.push_back(begin == std::string::npos
                      ? ""
                      : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& token, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": cannot parse number '" + token + "'");
  }
}

}  // namespace

Dataset load_dataset_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  // Header row decides the layout.
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  ++line_no;
  const std::vector<std::string> header = split_csv(line);
  if (header.empty() || header[0] != "group") {
    throw ParseError("line 1: header must start with 'group'");
  }

  Eigen::Index p = 0, m = 0;
  bool univariate = false;
  if (header.size() == 3 && header[1] == "y" && header[2] == "V") {
    univariate = true;
    p = 1;
    m = 1;
  } else {
    std::size_t idx = 1;
    while (idx < header.size() &&
           header[idx] == "y" + std::to_string(p + 1)) {
      ++idx;
      ++p;
    }
    if (p < 1) throw ParseError("line 1: expected columns y1..yp after group");
    for (Eigen::Index r = 1; r <= p; ++r) {
      for (Eigen::Index c = 1; c <= p; ++c) {
        const std::string want =
            "v" + std::to_string(r) + std::to_string(c);
        if (idx >= header.size() || header[idx] != want) {
          throw ParseError("line 1: expected column '" + want +
                           "' (v entries are row-major)");
        }
        ++idx;
      }
    }
    while (idx < header.size() &&
           header[idx] == "x" + std::to_string(m + 1)) {
      ++idx;
      ++m;
    }
    if (m < 1) throw ParseError("line 1: expected columns x1..xm");
    if (idx != header.size()) {
      throw ParseError("line 1: unexpected column '" + header[idx] + "'");
    }
  }
  const std::size_t expected_fields =
      univariate ? 3 : static_cast<std::size_t>(1 + p + p * p + m);

  Dataset data;
  data.label = std::filesystem::path(path).stem().string();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != expected_fields) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_fields) + " fields, got " +
                       std::to_string(fields.size()));
    }
    GroupObservation g;
    std::size_t idx = 1;
    g.y.resize(p);
    for (Eigen::Index l = 0; l < p; ++l) {
      g.y(l) = parse_number(fields[idx++], line_no);
    }
    Eigen::MatrixXd v(p, p);
    for (Eigen::Index r = 0; r < p; ++r) {
      for (Eigen::Index c = 0; c < p; ++c) {
        v(r, c) = parse_number(fields[idx++], line_no);
      }
    }
    if (univariate) {
      g.x = Eigen::VectorXd::Constant(1, 1.0);
    } else {
      g.x.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        g.x(i) = parse_number(fields[idx++], line_no);
      }
    }
    try {
      g.V = SpdMatrix(std::move(v));
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(line_no) + " (group " +
                       std::to_string(data.groups.size() + 1) +
                       "): sampling covariance rejected: " + e.what());
    }
    data.groups.push_back(std::move(g));
  }
  data.validate();
  return data;
}

Dataset load_dataset(const std::string& name_or_path) {
  if (is_builtin_dataset(name_or_path)) {
    return load_builtin(name_or_path).data;
  }
  return load_dataset_csv(name_or_path);
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

namespace {

void check_keys(const Json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(
        allowed.begin(), allowed.end(),
        [&](const char* k) { return it.key() == k; });
    if (!known) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

double number_field(const Json& obj, const char* key, const std::string& where,
                    double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw ConfigError(where + "." + key + " must be a number");
  }
  return obj[key].get<double>();
}

long integer_field(const Json& obj, const char* key, const std::string& where,
                   long fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) {
    throw ConfigError(where + "." + key + " must be an integer");
  }
  return obj[key].get<long>();
}

std::string string_field(const Json& obj, const char* key,
                         const std::string& where, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) {
    throw ConfigError(where + "." + key + " must be a string");
  }
  return obj[key].get<std::string>();
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(where + " must be a nonempty array of rows");
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) {
    throw ConfigError(where + " rows must be nonempty arrays");
  }
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ConfigError(where + " rows must all have the same length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        throw ConfigError(where + " entries must be numbers");
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(where + " must be a nonempty array of numbers");
  }
  Eigen::VectorXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ConfigError(where + " entries must be numbers");
    }
    out(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return out;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

PriorConfig prior_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  check_keys(j, where, {"kind", "v0_rule", "delta", "scaling", "v0", "label"});
  PriorConfig prior;
  prior.kind = string_field(j, "kind", where, "usp");
  prior.label = string_field(j, "label", where, "");
  if (prior.kind == "flat") {
    for (const char* key : {"v0_rule", "delta", "scaling", "v0"}) {
      if (j.contains(key)) {
        throw ConfigError(where + ": the flat prior takes no '" +
                          std::string(key) + "'");
      }
    }
    return prior;
  }
  if (prior.kind != "usp") {
    throw ConfigError(where + ".kind must be 'usp' or 'flat'");
  }
  prior.v0_rule = string_field(j, "v0_rule", where, "harmonic-mean");
  prior.delta = number_field(j, "delta", where, 1.0);
  prior.scaling = string_field(j, "scaling", where, "full");
  if (prior.v0_rule != "harmonic-mean" && prior.v0_rule != "arithmetic-mean" &&
      prior.v0_rule != "pooled-sigma" && prior.v0_rule != "explicit") {
    throw ConfigError(where + ".v0_rule must be one of harmonic-mean, "
                      "arithmetic-mean, pooled-sigma, explicit");
  }
  if (prior.scaling != "full" && prior.scaling != "diag") {
    throw ConfigError(where + ".scaling must be 'full' or 'diag'");
  }
  if (!(prior.delta > 0.0)) {
    throw ConfigError(where + ".delta must be positive");
  }
  if (prior.v0_rule == "explicit") {
    if (!j.contains("v0")) {
      throw ConfigError(where + ": explicit v0_rule requires 'v0'");
    }
    prior.v0 = matrix_from_json(j["v0"], where + ".v0");
  } else if (j.contains("v0")) {
    throw ConfigError(where + ": 'v0' is only valid with v0_rule explicit");
  }
  return prior;
}

Json prior_to_json(const PriorConfig& prior) {
  Json j;
  j["kind"] = prior.kind;
  if (prior.kind == "usp") {
    j["v0_rule"] = prior.v0_rule;
    j["delta"] = prior.delta;
    j["scaling"] = prior.scaling;
    if (prior.v0) j["v0"] = matrix_to_json(*prior.v0);
  }
  if (!prior.label.empty()) j["label"] = prior.label;
  return j;
}

GridConfig grid_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  check_keys(j, where, {"rule", "values", "cells"});
  GridConfig grid;
  grid.rule = string_field(j, "rule", where, "b0");
  if (grid.rule == "b0" || grid.rule == "u") {
    if (!j.contains("values") || !j["values"].is_array() ||
        j["values"].empty()) {
      throw ConfigError(where + ": rule '" + grid.rule +
                        "' requires a nonempty 'values' array");
    }
    for (const auto& v : j["values"]) {
      if (!v.is_number()) {
        throw ConfigError(where + ".values entries must be numbers");
      }
      grid.values.push_back(v.get<double>());
    }
    if (j.contains("cells")) {
      throw ConfigError(where + ": 'cells' is only valid with rule explicit");
    }
  } else if (grid.rule == "explicit") {
    if (!j.contains("cells") || !j["cells"].is_array() || j["cells"].empty()) {
      throw ConfigError(where +
                        ": rule 'explicit' requires a nonempty 'cells' array");
    }
    std::size_t index = 0;
    for (const auto& cell : j["cells"]) {
      const std::string cell_where =
          where + ".cells[" + std::to_string(index) + "]";
      if (!cell.is_object()) throw ConfigError(cell_where + " must be an object");
      check_keys(cell, cell_where, {"a_gen", "label"});
      if (!cell.contains("a_gen")) {
        throw ConfigError(cell_where + " requires 'a_gen'");
      }
      grid.cells.emplace_back(
          matrix_from_json(cell["a_gen"], cell_where + ".a_gen"),
          string_field(cell, "label", cell_where,
                       "cell-" + std::to_string(index + 1)));
      ++index;
    }
  } else {
    throw ConfigError(where + ".rule must be one of b0, u, explicit");
  }
  return grid;
}

Json grid_to_json(const GridConfig& grid) {
  Json j;
  j["rule"] = grid.rule;
  if (grid.rule == "explicit") {
    Json cells = Json::array();
    for (const auto& [a_gen, label] : grid.cells) {
      Json cell;
      cell["a_gen"] = matrix_to_json(a_gen);
      cell["label"] = label;
      cells.push_back(std::move(cell));
    }
    j["cells"] = std::move(cells);
  } else {
    j["values"] = grid.values;
  }
  return j;
}

SamplerConfig sampler_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  check_keys(j, where,
             {"total_iterations", "burn_in", "thin", "proposal_sigma",
              "proposal_nu", "init_theta", "init_beta", "init_a", "a0",
              "a_update", "compute_diagnostics"});
  SamplerConfig config;
  config.total_iterations = static_cast<int>(
      integer_field(j, "total_iterations", where, config.total_iterations));
  config.burn_in =
      static_cast<int>(integer_field(j, "burn_in", where, config.burn_in));
  config.thin = static_cast<int>(integer_field(j, "thin", where, config.thin));
  config.proposal_sigma =
      number_field(j, "proposal_sigma", where, config.proposal_sigma);
  config.proposal_nu =
      number_field(j, "proposal_nu", where, config.proposal_nu);

  const std::string init_theta = string_field(j, "init_theta", where, "data");
  if (init_theta != "data") {
    throw ConfigError(where + ".init_theta supports only 'data' "
                      "(explicit values go through the API)");
  }
  const std::string init_beta =
      string_field(j, "init_beta", where, "pooled-mean");
  if (init_beta == "pooled-mean") {
    config.init_beta = InitBeta::PooledMean;
  } else if (init_beta == "generative") {
    config.init_beta = InitBeta::Generative;
  } else {
    throw ConfigError(where +
                      ".init_beta must be 'pooled-mean' or 'generative'");
  }
  const std::string init_a = string_field(j, "init_a", where, "v0");
  if (init_a == "v0") {
    config.init_a = InitA::V0Based;
  } else if (init_a == "explicit") {
    if (!j.contains("a0")) {
      throw ConfigError(where + ": init_a 'explicit' requires 'a0'");
    }
    config.init_a = InitA::Explicit;
    config.a0 = SpdMatrix(matrix_from_json(j["a0"], where + ".a0"));
  } else {
    throw ConfigError(where + ".init_a must be 'v0' or 'explicit'");
  }
  if (j.contains("a0") && init_a != "explicit") {
    throw ConfigError(where + ": 'a0' is only valid with init_a explicit");
  }
  const std::string a_update = string_field(j, "a_update", where, "mh");
  if (a_update == "mh") {
    config.a_update = AUpdate::MetropolisHastings;
  } else if (a_update == "exact-flat") {
    config.a_update = AUpdate::FlatExactGibbs;
  } else {
    throw ConfigError(where + ".a_update must be 'mh' or 'exact-flat'");
  }
  if (j.contains("compute_diagnostics")) {
    if (!j["compute_diagnostics"].is_boolean()) {
      throw ConfigError(where + ".compute_diagnostics must be a boolean");
    }
    config.compute_diagnostics = j["compute_diagnostics"].get<bool>();
  }
  return config;
}

Json sampler_to_json(const SamplerConfig& config) {
  Json j;
  j["total_iterations"] = config.total_iterations;
  j["burn_in"] = config.burn_in;
  j["thin"] = config.thin;
  j["proposal_sigma"] = config.proposal_sigma;
  j["proposal_nu"] = config.proposal_nu;
  j["init_theta"] = config.init_theta == InitTheta::Data ? "data" : "explicit";
  switch (config.init_beta) {
    case InitBeta::PooledMean:
      j["init_beta"] = "pooled-mean";
      break;
    case InitBeta::Generative:
      j["init_beta"] = "generative";
      break;
    case InitBeta::Explicit:
      j["init_beta"] = "explicit";
      j["beta0"] = vector_to_json(*config.beta0);
      break;
  }
  if (config.init_a == InitA::V0Based) {
    j["init_a"] = "v0";
  } else {
    j["init_a"] = "explicit";
    j["a0"] = matrix_to_json(config.a0->matrix());
  }
  j["a_update"] = config.a_update == AUpdate::MetropolisHastings
                      ? "mh"
                      : "exact-flat";
  j["compute_diagnostics"] = config.compute_diagnostics;
  return j;
}

// Reading back a serialized chain config (which may carry an explicit beta0
// resolved from a generative rule).
SamplerConfig chain_config_from_json(const Json& j, const std::string& where) {
  Json stripped = j;
  std::optional<Eigen::VectorXd> beta0;
  if (stripped.contains("beta0")) {
    beta0 = vector_from_json(stripped["beta0"], where + ".beta0");
    stripped.erase("beta0");
  }
  const std::string init_beta =
      string_field(stripped, "init_beta", where, "pooled-mean");
  if (init_beta == "explicit") stripped["init_beta"] = "pooled-mean";
  SamplerConfig config = sampler_from_json(stripped, where);
  if (init_beta == "explicit") {
    config.init_beta = InitBeta::Explicit;
    config.beta0 = beta0;
  }
  return config;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  check_keys(j, "run config",
             {"mode", "dataset", "priors", "grid", "beta_gen", "sampler",
              "level", "n_sim", "master_seed", "parallelism", "output_dir",
              "scale"});

  RunConfig config;
  config.mode = string_field(j, "mode", "run config", "campaign");
  if (config.mode != "fit" && config.mode != "evaluate-cell" &&
      config.mode != "campaign" && config.mode != "reproduce") {
    throw ConfigError(
        "run config.mode must be one of fit, evaluate-cell, campaign, "
        "reproduce");
  }
  if (!j.contains("dataset")) {
    throw ConfigError("run config: 'dataset' is required");
  }
  config.dataset = string_field(j, "dataset", "run config", "");

  if (config.mode == "reproduce") {
    for (const char* key : {"priors", "grid", "beta_gen"}) {
      if (j.contains(key)) {
        throw ConfigError(std::string("run config: '") + key +
                          "' is not valid in reproduce mode (the preset "
                          "defines it)");
      }
    }
  } else {
    if (!j.contains("priors") || !j["priors"].is_array() ||
        j["priors"].empty()) {
      throw ConfigError("run config: 'priors' must be a nonempty array");
    }
    std::size_t index = 0;
    for (const auto& p : j["priors"]) {
      config.priors.push_back(
          prior_from_json(p, "priors[" + std::to_string(index) + "]"));
      ++index;
    }
    if (config.mode != "fit") {
      if (!j.contains("grid")) {
        throw ConfigError("run config: 'grid' is required");
      }
      config.grid = grid_from_json(j["grid"], "grid");
    } else if (j.contains("grid")) {
      throw ConfigError("run config: 'grid' is not valid in fit mode");
    }
    if (j.contains("beta_gen")) {
      config.beta_gen = vector_from_json(j["beta_gen"], "beta_gen");
    }
  }

  if (j.contains("sampler")) {
    config.sampler = sampler_from_json(j["sampler"], "sampler");
  }
  config.level = number_field(j, "level", "run config", config.level);
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw ConfigError("run config.level must lie in (0, 1)");
  }
  config.n_sim =
      static_cast<int>(integer_field(j, "n_sim", "run config", config.n_sim));
  if (config.n_sim < 1) {
    throw ConfigError("run config.n_sim must be positive");
  }
  if (j.contains("master_seed")) {
    if (!j["master_seed"].is_number_unsigned() &&
        !j["master_seed"].is_number_integer()) {
      throw ConfigError("run config.master_seed must be an integer");
    }
    config.master_seed = j["master_seed"].get<std::uint64_t>();
  }
  config.parallelism = static_cast<int>(
      integer_field(j, "parallelism", "run config", config.parallelism));
  if (config.parallelism < 0) {
    throw ConfigError("run config.parallelism must be >= 0 (0 = all cores)");
  }
  config.output_dir =
      string_field(j, "output_dir", "run config", config.output_dir);
  config.scale = string_field(j, "scale", "run config", config.scale);
  if (config.scale != "desk" && config.scale != "paper") {
    throw ConfigError("run config.scale must be 'desk' or 'paper'");
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

std::string run_config_to_json(const RunConfig& config) {
  Json j;
  j["mode"] = config.mode;
  j["dataset"] = config.dataset;
  if (config.mode != "reproduce") {
    Json priors = Json::array();
    for (const auto& p : config.priors) priors.push_back(prior_to_json(p));
    j["priors"] = std::move(priors);
    if (config.mode != "fit") j["grid"] = grid_to_json(config.grid);
    if (config.beta_gen) j["beta_gen"] = vector_to_json(*config.beta_gen);
  }
  j["sampler"] = sampler_to_json(config.sampler);
  j["level"] = config.level;
  j["n_sim"] = config.n_sim;
  j["master_seed"] = config.master_seed;
  j["parallelism"] = config.parallelism;
  if (!config.output_dir.empty()) j["output_dir"] = config.output_dir;
  if (config.mode == "reproduce") j["scale"] = config.scale;
  return j.dump(2);
}

std::string run_config_schema() {
  return R"(run-config schema (JSON object; unknown keys are errors):
{
  "mode": "fit" | "evaluate-cell" | "campaign" | "reproduce",
  "dataset": "<builtin name or CSV path>",        // builtins: eight-schools, hospital-27
  "priors": [                                      // not in reproduce mode
    {"kind": "usp",
     "v0_rule": "harmonic-mean" | "arithmetic-mean" | "pooled-sigma" | "explicit",
     "delta": <positive number, default 1>,        // V0 scale factor
     "scaling": "full" | "diag",                   // how delta is applied
     "v0": [[..]],                                 // only with v0_rule explicit
     "label": "<optional>"},
    {"kind": "flat", "label": "<optional>"}
  ],
  "grid": {                                        // campaign / evaluate-cell
    "rule": "b0" | "u" | "explicit",
    "values": [..],                                // for b0 / u rules
    "cells": [{"a_gen": [[..]], "label": "<optional>"}]   // for explicit rule
  },
  "beta_gen": [..],                                // default: preset value for builtins
  "sampler": {
    "total_iterations": 42000, "burn_in": 2000, "thin": 2,
    "proposal_sigma": 2.0, "proposal_nu": 40.0,
    "init_theta": "data",
    "init_beta": "pooled-mean" | "generative",
    "init_a": "v0" | "explicit", "a0": [[..]],
    "a_update": "mh" | "exact-flat",
    "compute_diagnostics": true
  },
  "level": 0.95,
  "n_sim": 200,
  "master_seed": 1,
  "parallelism": 1,                                // 0 = all hardware threads
  "output_dir": "out",
  "scale": "desk" | "paper"                        // reproduce mode only
}

CSV dataset schema: header row then one row per group.
  univariate:   group,y,V
  multivariate: group,y1..yp,v11..vpp,x1..xm      (v row-major; x1 = 1 for an intercept)
)";
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

namespace {

std::string derived_prior_label(const PriorConfig& prior) {
  if (!prior.label.empty()) return prior.label;
  if (prior.kind == "flat") return "flat";
  std::string base;
  if (prior.v0_rule == "harmonic-mean") {
    base = "usp-dm";
  } else if (prior.v0_rule == "arithmetic-mean") {
    base = "usp-am";
  } else if (prior.v0_rule == "pooled-sigma") {
    base = "usp-em";
  } else {
    base = "usp";
  }
  if (prior.scaling == "diag" && prior.delta != 1.0) base += "-diag";
  if (prior.delta != 1.0) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-x%g", prior.delta);
    base += buf;
  }
  return base;
}

}  // namespace

SpdMatrix resolve_prior_v0(const PriorConfig& prior, const BuiltinDataset& ds) {
  SpdMatrix base;
  if (prior.v0_rule == "harmonic-mean") {
    base = v0_harmonic_mean(ds.data);
  } else if (prior.v0_rule == "arithmetic-mean") {
    base = v0_arithmetic_mean(ds.data);
  } else if (prior.v0_rule == "pooled-sigma") {
    if (!ds.aux_sigma) {
      throw ConfigError(
          "prior v0_rule 'pooled-sigma' requires a dataset with an auxiliary "
          "covariance (builtin hospital-27)");
    }
    base = *ds.aux_sigma;
  } else {
    if (!prior.v0) {
      throw ConfigError("explicit v0_rule requires a v0 matrix");
    }
    base = SpdMatrix(*prior.v0);
  }
  if (prior.delta == 1.0) return base;
  if (prior.scaling == "diag") return v0_scaled_diag(base, prior.delta);
  return SpdMatrix(prior.delta * base.matrix());
}

ResolvedRun resolve_run_config(const RunConfig& config) {
  ResolvedRun run;
  run.config = config;
  if (is_builtin_dataset(config.dataset)) {
    run.dataset = load_builtin(config.dataset);
  } else {
    run.dataset = BuiltinDataset{
        std::filesystem::path(config.dataset).stem().string(),
        load_dataset_csv(config.dataset), std::nullopt};
  }
  if (config.mode == "reproduce") return run;

  const Eigen::Index p = run.dataset.data.p();
  for (const auto& prior : config.priors) {
    if (prior.kind == "flat") {
      run.priors.push_back(PriorSpec::improper_flat(
          prior.label.empty() ? "flat" : prior.label));
    } else {
      run.priors.push_back(PriorSpec::usp(resolve_prior_v0(prior, run.dataset),
                                          derived_prior_label(prior),
                                          prior.delta));
    }
  }
  if (config.mode == "fit") return run;

  Eigen::VectorXd beta_gen;
  if (config.beta_gen) {
    beta_gen = *config.beta_gen;
  } else if (run.dataset.name == "eight-schools") {
    beta_gen = eight_schools_beta_gen();
  } else if (run.dataset.name == "hospital-27") {
    beta_gen = hospital_beta_gen();
  } else {
    throw ConfigError(
        "run config: 'beta_gen' is required for non-builtin datasets");
  }

  if (config.grid.rule == "b0") {
    if (p == 1) {
      const SpdMatrix v0 = v0_harmonic_mean(run.dataset.data);
      run.grid = univariate_generative_grid(v0(0, 0), config.grid.values,
                                            beta_gen, config.n_sim);
    } else {
      if (!run.dataset.aux_sigma) {
        throw ConfigError(
            "grid rule 'b0' with p >= 2 requires a dataset with an auxiliary "
            "covariance; use an explicit grid instead");
      }
      std::vector<double> u_values;
      for (double b0 : config.grid.values) {
        if (!(b0 > 0.0 && b0 <= 1.0)) {
          throw ConfigError("grid b0 values must lie in (0, 1]");
        }
        const double r = std::pow(b0, 1.0 / static_cast<double>(p));
        u_values.push_back(r / (1.0 - r));  // b0 = 1 gives u = inf -> A = 0
      }
      run.grid = bivariate_generative_grid(*run.dataset.aux_sigma, u_values,
                                           beta_gen, config.n_sim);
      for (std::size_t i = 0; i < run.grid.size(); ++i) {
        run.grid[i].b0 = config.grid.values[i];
        char buf[32];
        std::snprintf(buf, sizeof(buf), "absB0=%g", config.grid.values[i]);
        run.grid[i].label = buf;
      }
    }
  } else if (config.grid.rule == "u") {
    if (!run.dataset.aux_sigma) {
      throw ConfigError(
          "grid rule 'u' requires a dataset with an auxiliary covariance");
    }
    run.grid = bivariate_generative_grid(*run.dataset.aux_sigma,
                                         config.grid.values, beta_gen,
                                         config.n_sim);
  } else {
    for (const auto& [a_gen, label] : config.grid.cells) {
      GenerativeConfig gen;
      gen.A_gen = a_gen;
      gen.beta_gen = beta_gen;
      gen.n_sim = config.n_sim;
      gen.label = label;
      run.grid.push_back(std::move(gen));
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

namespace {

Json coverage_result_to_json(const CoverageResult& r) {
  Json j;
  j["prior"] = r.prior_label;
  if (r.prior_delta) {
    j["prior_delta"] = *r.prior_delta;
  } else {
    j["prior_delta"] = nullptr;
  }
  j["generative"] = r.generative_label;
  if (std::isnan(r.b0)) {
    j["b0"] = nullptr;
  } else {
    j["b0"] = r.b0;
  }
  j["level"] = r.level;
  j["n_sim"] = r.n_sim;
  j["data_seed"] = r.data_seed;
  j["chain_seed"] = r.chain_seed;
  j["per_group_rb"] = vector_to_json(r.per_group_rb);
  j["per_group_rb_var"] = vector_to_json(r.per_group_rb_var);
  j["per_group_naive"] = vector_to_json(r.per_group_naive);
  j["overall_rb"] = r.overall_rb;
  j["overall_rb_var"] = r.overall_rb_var;
  j["overall_naive"] = r.overall_naive;
  j["rb_sim_variance"] = r.rb_sim_variance;
  j["naive_sim_variance"] = r.naive_sim_variance;
  j["mean_acceptance"] = r.mean_acceptance;
  j["chain_config"] = sampler_to_json(r.chain_config);
  return j;
}

CoverageResult coverage_result_from_json(const Json& j,
                                         const std::string& where) {
  check_keys(j, where,
             {"prior", "prior_delta", "generative", "b0", "level", "n_sim",
              "data_seed", "chain_seed", "per_group_rb", "per_group_rb_var",
              "per_group_naive", "overall_rb", "overall_rb_var",
              "overall_naive", "rb_sim_variance", "naive_sim_variance",
              "mean_acceptance", "chain_config"});
  CoverageResult r;
  r.prior_label = j.at("prior").get<std::string>();
  if (!j.at("prior_delta").is_null()) {
    r.prior_delta = j.at("prior_delta").get<double>();
  }
  r.generative_label = j.at("generative").get<std::string>();
  r.b0 = j.at("b0").is_null() ? std::numeric_limits<double>::quiet_NaN()
                              : j.at("b0").get<double>();
  r.level = j.at("level").get<double>();
  r.n_sim = j.at("n_sim").get<int>();
  r.data_seed = j.at("data_seed").get<std::uint64_t>();
  r.chain_seed = j.at("chain_seed").get<std::uint64_t>();
  r.per_group_rb = vector_from_json(j.at("per_group_rb"), where);
  r.per_group_rb_var = vector_from_json(j.at("per_group_rb_var"), where);
  r.per_group_naive = vector_from_json(j.at("per_group_naive"), where);
  r.overall_rb = j.at("overall_rb").get<double>();
  r.overall_rb_var = j.at("overall_rb_var").get<double>();
  r.overall_naive = j.at("overall_naive").get<double>();
  r.rb_sim_variance = j.at("rb_sim_variance").get<double>();
  r.naive_sim_variance = j.at("naive_sim_variance").get<double>();
  r.mean_acceptance = j.at("mean_acceptance").get<double>();
  r.chain_config =
      chain_config_from_json(j.at("chain_config"), where + ".chain_config");
  return r;
}

}  // namespace

std::string results_to_json_text(const ResultsFile& file) {
  Json root;
  root["format"] = "uspcov-results-v1";
  root["master_seed"] = file.master_seed;
  if (file.run_config_json.empty()) {
    root["run_config"] = nullptr;
  } else {
    root["run_config"] = Json::parse(file.run_config_json);
  }
  Json results = Json::array();
  for (const auto& r : file.results) {
    results.push_back(coverage_result_to_json(r));
  }
  root["results"] = std::move(results);
  Json failures = Json::array();
  for (const auto& f : file.failures) {
    Json entry;
    entry["prior_index"] = f.prior_index;
    entry["grid_index"] = f.grid_index;
    entry["message"] = f.message;
    failures.push_back(std::move(entry));
  }
  root["failures"] = std::move(failures);
  return root.dump(2) + "\n";
}

ResultsFile parse_results_json(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("results file: ") + e.what());
  }
  check_keys(root, "results file",
             {"format", "master_seed", "run_config", "results", "failures"});
  if (root.at("format").get<std::string>() != "uspcov-results-v1") {
    throw ParseError("results file: unsupported format tag");
  }
  ResultsFile file;
  file.master_seed = root.at("master_seed").get<std::uint64_t>();
  if (!root.at("run_config").is_null()) {
    file.run_config_json = root.at("run_config").dump(2);
  }
  std::size_t index = 0;
  for (const auto& r : root.at("results")) {
    file.results.push_back(coverage_result_from_json(
        r, "results[" + std::to_string(index) + "]"));
    ++index;
  }
  for (const auto& f : root.at("failures")) {
    file.failures.push_back(CellFailure{f.at("prior_index").get<std::size_t>(),
                                        f.at("grid_index").get<std::size_t>(),
                                        f.at("message").get<std::string>()});
  }
  return file;
}

ResultsFile load_results(const std::string& path) {
  return parse_results_json(read_file(path));
}

void export_results(const ResultsFile& file, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + out_dir +
                      "': " + ec.message());
  }
  const auto path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  write_file(path("results.json"), results_to_json_text(file));

  const std::string config_line =
      file.run_config_json.empty()
          ? "{}"
          : Json::parse(file.run_config_json).dump();

  // results.csv: one row per (prior, grid point).
  {
    std::ostringstream csv;
    csv << "# run-config: " << config_line << "\n";
    csv << "# master-seed: " << file.master_seed << "\n";
    csv << "prior,delta,b0";
    const Eigen::Index k =
        file.results.empty() ? 0 : file.results.front().per_group_rb.size();
    for (Eigen::Index j = 0; j < k; ++j) csv << ",rb_g" << (j + 1);
    csv << ",overall_rb,overall_rb_se\n";
    for (const auto& r : file.results) {
      csv << r.prior_label << ",";
      if (r.prior_delta) csv << fmt_double(*r.prior_delta);
      csv << ",";
      if (!std::isnan(r.b0)) csv << fmt_double(r.b0);
      for (Eigen::Index j = 0; j < r.per_group_rb.size(); ++j) {
        csv << "," << fmt_double(r.per_group_rb(j));
      }
      csv << "," << fmt_double(r.overall_rb) << ","
          << fmt_double(r.overall_rb_se()) << "\n";
    }
    write_file(path("results.csv"), csv.str());
  }

  // figure_coverage.csv: x = reference shrinkage, one series per prior.
  {
    std::vector<std::string> priors;
    std::vector<double> b0s;
    for (const auto& r : file.results) {
      if (std::find(priors.begin(), priors.end(), r.prior_label) ==
          priors.end()) {
        priors.push_back(r.prior_label);
      }
      if (!std::isnan(r.b0) &&
          std::find(b0s.begin(), b0s.end(), r.b0) == b0s.end()) {
        b0s.push_back(r.b0);
      }
    }
    std::sort(b0s.begin(), b0s.end());
    std::ostringstream csv;
    csv << "# run-config: " << config_line << "\n";
    csv << "# master-seed: " << file.master_seed << "\n";
    csv << "b0";
    for (const auto& prior : priors) csv << "," << prior;
    csv << "\n";
    for (double b0 : b0s) {
      csv << fmt_double(b0);
      for (const auto& prior : priors) {
        csv << ",";
        for (const auto& r : file.results) {
          if (r.prior_label == prior && r.b0 == b0) {
            csv << fmt_double(r.overall_rb);
            break;
          }
        }
      }
      csv << "\n";
    }
    write_file(path("figure_coverage.csv"), csv.str());
  }
}

}  // namespace uspcov
