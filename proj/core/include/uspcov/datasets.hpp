#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uspcov/coverage.hpp"
#include "uspcov/priors.hpp"

namespace uspcov {

/// A bundled dataset. The hospital data carries the pooled patient-level
/// covariance matrix as auxiliary information (it is the reference shape
/// matrix and the generative-grid scale for that experiment).
struct BuiltinDataset {
  std::string name;
  Dataset data;
  std::optional<SpdMatrix> aux_sigma;
};

/// SAT coaching effects for eight schools: one outcome per school with known
/// sampling variance, intercept-only regression (k=8, p=1, m=1).
Dataset eight_schools();

/// Hospital profiling data for 27 hospitals: percentages of non-surgical and
/// surgical problems, severity covariate, V_j = Sigma / n_j
/// (k=27, p=2, m=2).
Dataset hospital27();

/// Pooled patient-level covariance of the two problem percentages.
SpdMatrix hospital_pooled_sigma();

std::vector<std::string> builtin_dataset_names();
bool is_builtin_dataset(const std::string& name);
BuiltinDataset load_builtin(const std::string& name);

/// Generative regression coefficients frozen into the experiment presets (a
/// long reference fit's posterior means; see each preset's documentation).
Eigen::VectorXd eight_schools_beta_gen();
Eigen::VectorXd hospital_beta_gen();

enum class Scale { Desk, Paper };

/// A ready-to-run coverage experiment: dataset, the six priors under
/// comparison, the ten-point generative grid, and its chain configuration.
/// Desk scale: n_sim=200 with 12000-iteration chains. Paper scale:
/// n_sim=1000 with 42000-iteration chains (long running).
struct ExperimentPreset {
  BuiltinDataset dataset;
  std::vector<PriorSpec> priors;
  std::vector<GenerativeConfig> grid;
  SamplerConfig sampler;
  double level = 0.95;
};

ExperimentPreset experiment_preset(const std::string& dataset_name,
                                   Scale scale);

}  // namespace uspcov
