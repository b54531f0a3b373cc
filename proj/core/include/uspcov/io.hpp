#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uspcov/coverage.hpp"
#include "uspcov/datasets.hpp"

namespace uspcov {

/// Loads a builtin dataset by name, or a CSV file.
///
/// CSV schema (UTF-8, '.' decimal separator, header row required):
///   univariate:   group,y,V
///   multivariate: group,y1..yp,v11..vpp,x1..xm   (v row-major)
/// Parse errors carry the line number; invariant violations carry the group
/// index.
Dataset load_dataset(const std::string& name_or_path);
Dataset load_dataset_csv(const std::string& path);

/// One prior entry of a run configuration, before resolution against the
/// dataset.
struct PriorConfig {
  std::string kind = "usp";     // "usp" | "flat"
  std::string v0_rule = "harmonic-mean";
  // "harmonic-mean" | "arithmetic-mean" | "pooled-sigma" | "explicit"
  double delta = 1.0;
  std::string scaling = "full";  // "full" | "diag" (how delta is applied)
  std::optional<Eigen::MatrixXd> v0;  // for v0_rule == "explicit"
  std::string label;                  // optional; derived when empty
};

struct GridConfig {
  std::string rule = "b0";  // "b0" | "u" | "explicit"
  std::vector<double> values;
  // rule == "explicit": (A_gen, label) pairs
  std::vector<std::pair<Eigen::MatrixXd, std::string>> cells;
};

/// Parsed run configuration; validated against the published schema before
/// any computation (unknown keys are errors).
struct RunConfig {
  std::string mode = "campaign";  // fit | evaluate-cell | campaign | reproduce
  std::string dataset;
  std::vector<PriorConfig> priors;
  GridConfig grid;
  std::optional<Eigen::VectorXd> beta_gen;  // unset: preset default
  SamplerConfig sampler;
  double level = 0.95;
  int n_sim = 200;
  std::uint64_t master_seed = 1;
  int parallelism = 1;
  std::string output_dir;
  std::string scale = "desk";  // reproduce mode: desk | paper
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);
std::string run_config_schema();

/// Resolves one prior entry's shape matrix against a dataset (rules:
/// harmonic-mean, arithmetic-mean, pooled-sigma, explicit; delta applied per
/// the scaling mode).
SpdMatrix resolve_prior_v0(const PriorConfig& prior, const BuiltinDataset& ds);

/// Run configuration resolved against its dataset: concrete priors and grid.
struct ResolvedRun {
  RunConfig config;
  BuiltinDataset dataset;  // aux_sigma empty for CSV datasets
  std::vector<PriorSpec> priors;
  std::vector<GenerativeConfig> grid;
};

ResolvedRun resolve_run_config(const RunConfig& config);

/// The full record written to results.json: the embedded run configuration
/// (reproducibility header), master seed, per-cell results, and failures.
struct ResultsFile {
  std::string run_config_json;
  std::uint64_t master_seed = 0;
  std::vector<CoverageResult> results;
  std::vector<CellFailure> failures;
};

std::string results_to_json_text(const ResultsFile& file);
ResultsFile parse_results_json(const std::string& json_text);
ResultsFile load_results(const std::string& path);

/// Writes results.csv (one row per cell), results.json (full structured
/// record), and figure_coverage.csv (x = reference shrinkage, one overall-RB
/// series per prior). An empty result list produces headers-only files.
void export_results(const ResultsFile& file, const std::string& out_dir);

}  // namespace uspcov
