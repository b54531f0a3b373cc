#include "uspcov/datasets.hpp"

#include <array>
#include <cmath>

namespace uspcov {

namespace {

GroupObservation scalar_group(double y, double v) {
  GroupObservation g;
  g.y = Eigen::VectorXd::Constant(1, y);
  g.V = SpdMatrix(Eigen::MatrixXd::Constant(1, 1, v));
  g.x = Eigen::VectorXd::Constant(1, 1.0);
  return g;
}

struct HospitalRow {
  double y1, y2, severity;
  int n;
};

// Percentages of non-surgical / surgical problems, severity, interviewees.
constexpr std::array<HospitalRow, 27> kHospitalRows = {{
    {10.18, 15.06, 0.75, 24},  {11.55, 17.97, 0.62, 32},
    {16.21, 12.50, 0.66, 32},  {12.31, 14.88, 0.26, 43},
    {12.88, 15.21, 0.96, 44},  {11.84, 17.69, 0.44, 45},
    {14.82, 16.91, 0.44, 48},  {13.05, 15.07, 0.55, 49},
    {12.43, 12.01, 0.33, 51},  {8.35, 9.43, 0.47, 53},
    {17.97, 26.82, 0.48, 56},  {11.84, 15.64, 0.34, 58},
    {12.43, 13.94, 0.28, 58},  {14.73, 15.40, 0.63, 60},
    {15.80, 11.50, 0.26, 61},  {14.81, 20.56, 0.56, 62},
    {11.14, 13.02, 0.02, 62},  {17.12, 14.60, 0.41, 66},
    {16.93, 16.28, 0.56, 68},  {11.02, 13.52, 0.34, 68},
    {14.69, 16.49, 0.56, 72},  {10.48, 14.24, 0.79, 77},
    {15.82, 15.13, 0.47, 87},  {12.66, 14.99, 0.71, 122},
    {10.41, 17.25, 0.45, 124}, {10.32, 10.13, 0.05, 149},
    {13.72, 18.18, 0.77, 198},
}};

}  // namespace

Dataset eight_schools() {
  // Estimated coaching effect and its standard error per school.
  constexpr std::array<double, 8> effects = {28, 8, -3, 7, -1, 1, 18, 12};
  constexpr std::array<double, 8> std_errors = {15, 10, 16, 11, 9, 11, 10, 18};
  Dataset data;
  data.label = "eight-schools";
  data.groups.reserve(effects.size());
  for (std::size_t j = 0; j < effects.size(); ++j) {
    data.groups.push_back(
        scalar_group(effects[j], std_errors[j] * std_errors[j]));
  }
  return data;
}

SpdMatrix hospital_pooled_sigma() {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 148.87, 140.43, 140.43, 490.60;
  return SpdMatrix(sigma);
}

Dataset hospital27() {
  const SpdMatrix sigma = hospital_pooled_sigma();
  Dataset data;
  data.label = "hospital-27";
  data.groups.reserve(kHospitalRows.size());
  for (const auto& row : kHospitalRows) {
    GroupObservation g;
    g.y = Eigen::Vector2d(row.y1, row.y2);
    g.V = SpdMatrix(sigma.matrix() / static_cast<double>(row.n));
    g.x = Eigen::Vector2d(1.0, row.severity);
    data.groups.push_back(std::move(g));
  }
  return data;
}

std::vector<std::string> builtin_dataset_names() {
  return {"eight-schools", "hospital-27"};
}

bool is_builtin_dataset(const std::string& name) {
  return name == "eight-schools" || name == "hospital-27";
}

BuiltinDataset load_builtin(const std::string& name) {
  if (name == "eight-schools") {
    return BuiltinDataset{name, eight_schools(), std::nullopt};
  }
  if (name == "hospital-27") {
    return BuiltinDataset{name, hospital27(), hospital_pooled_sigma()};
  }
  throw ConfigError("unknown builtin dataset '" + name +
                    "' (available: eight-schools, hospital-27)");
}

Eigen::VectorXd eight_schools_beta_gen() {
  // Posterior mean of the pooled effect under the harmonic-mean USP
  // (100000-draw reference fit).
  return Eigen::VectorXd::Constant(1, 7.95);
}

Eigen::VectorXd hospital_beta_gen() {
  // Posterior means from the 100000-draw reference fit with V0 = Sigma
  // (seed 11; regenerable with
  //  `uspcov fit --dataset hospital-27 --prior usp-em --iterations 202000
  //   --seed 11`).
  Eigen::VectorXd beta(4);
  beta << 12.280173099972, 1.8477702439346417, 12.540685835085174,
      5.7993413416533954;
  return beta;
}

namespace {

SamplerConfig scaled_sampler(Scale scale) {
  SamplerConfig config;
  if (scale == Scale::Desk) {
    config.total_iterations = 12000;
    config.burn_in = 2000;
    config.thin = 2;
  }
  return config;  // paper scale keeps the 42000/2000/2 defaults
}

int scaled_n_sim(Scale scale) { return scale == Scale::Desk ? 200 : 1000; }

std::string delta_label(const std::string& base, double delta) {
  if (delta == 1.0) return base;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-x%g", base.c_str(), delta);
  return buf;
}

}  // namespace

ExperimentPreset experiment_preset(const std::string& dataset_name,
                                   Scale scale) {
  ExperimentPreset preset;
  preset.dataset = load_builtin(dataset_name);
  preset.sampler = scaled_sampler(scale);
  const int n_sim = scaled_n_sim(scale);
  constexpr std::array<double, 5> deltas = {1e0, 1e1, 1e2, 1e3, 1e4};

  if (dataset_name == "eight-schools") {
    const SpdMatrix v0_dm = v0_harmonic_mean(preset.dataset.data);
    for (double delta : deltas) {
      preset.priors.push_back(PriorSpec::usp(
          SpdMatrix(delta * v0_dm.matrix()), delta_label("usp-dm", delta),
          delta));
    }
    preset.priors.push_back(PriorSpec::improper_flat());

    constexpr std::array<double, 10> b0_grid = {0.05, 0.15, 0.25, 0.35, 0.45,
                                                0.55, 0.65, 0.75, 0.85, 0.95};
    preset.grid = univariate_generative_grid(v0_dm(0, 0), b0_grid,
                                             eight_schools_beta_gen(), n_sim);
    // Chain initialization: theta at the data, beta at the pooled mean of
    // each (mock) dataset, A at the unscaled harmonic mean for every prior.
    preset.sampler.init_beta = InitBeta::PooledMean;
    preset.sampler.init_a = InitA::Explicit;
    preset.sampler.a0 = v0_dm;
    preset.sampler.proposal_sigma = 2.0;
    return preset;
  }

  if (dataset_name == "hospital-27") {
    const SpdMatrix sigma = hospital_pooled_sigma();
    preset.priors.push_back(PriorSpec::usp(sigma, "usp-em", 1.0));
    for (std::size_t i = 1; i < deltas.size(); ++i) {
      preset.priors.push_back(
          PriorSpec::usp(v0_scaled_diag(sigma, deltas[i]),
                         delta_label("usp-em-diag", deltas[i]), deltas[i]));
    }
    preset.priors.push_back(PriorSpec::improper_flat());

    constexpr std::array<double, 10> u_grid = {0.29, 0.63, 1.00,  1.45, 2.04,
                                               2.87, 4.16, 6.47, 11.82, 38.50};
    preset.grid =
        bivariate_generative_grid(sigma, u_grid, hospital_beta_gen(), n_sim);
    // Coverage chains start beta at the generative value and A at Sigma.
    preset.sampler.init_beta = InitBeta::Generative;
    preset.sampler.init_a = InitA::Explicit;
    preset.sampler.a0 = sigma;
    preset.sampler.proposal_nu = 40.0;
    return preset;
  }

  throw ConfigError("no experiment preset for dataset '" + dataset_name + "'");
}

}  // namespace uspcov
