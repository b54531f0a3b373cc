#include "uspcov/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "uspcov/io.hpp"

namespace uspcov {

namespace {

int resolve_threads(int flag_value) {
  if (const char* env = std::getenv("USP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  if (flag_value > 0) return flag_value;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

PriorConfig prior_from_name(const std::string& name, double delta,
                            const std::string& scale_rule,
                            const BuiltinDataset& ds) {
  PriorConfig prior;
  if (name == "flat") {
    prior.kind = "flat";
    return prior;
  }
  prior.kind = "usp";
  if (name == "usp-dm") {
    prior.v0_rule = "harmonic-mean";
  } else if (name == "usp-em") {
    prior.v0_rule = ds.aux_sigma ? "pooled-sigma" : "arithmetic-mean";
  } else if (name == "usp-am") {
    prior.v0_rule = "arithmetic-mean";
  } else {
    throw ConfigError("unknown prior '" + name +
                      "' (choose usp-dm, usp-em, usp-am or flat)");
  }
  prior.delta = delta;
  if (scale_rule == "auto") {
    prior.scaling = (ds.data.p() >= 2) ? "diag" : "full";
  } else if (scale_rule == "full" || scale_rule == "diag") {
    prior.scaling = scale_rule;
  } else {
    throw ConfigError("--scale-rule must be auto, full or diag");
  }
  return prior;
}

BuiltinDataset open_dataset(const std::string& name_or_path) {
  if (is_builtin_dataset(name_or_path)) return load_builtin(name_or_path);
  return BuiltinDataset{name_or_path, load_dataset_csv(name_or_path),
                        std::nullopt};
}

SpdMatrix initial_a_for(const PriorConfig& prior, const BuiltinDataset& ds) {
  // Chains start A at the unscaled shape-rule value; the flat prior falls
  // back to the harmonic mean.
  if (prior.kind == "flat") {
    return ds.aux_sigma ? *ds.aux_sigma : v0_harmonic_mean(ds.data);
  }
  PriorConfig unscaled = prior;
  unscaled.delta = 1.0;
  return resolve_prior_v0(unscaled, ds);
}

struct SamplerFlags {
  int iterations = 0;  // 0: keep mode default
  int burn_in = -1;
  int thin = 0;
  double sigma = 0.0;
  double nu = 0.0;
  bool exact_flat = false;

  void apply(SamplerConfig& config) const {
    if (iterations > 0) config.total_iterations = iterations;
    if (burn_in >= 0) config.burn_in = burn_in;
    if (thin > 0) config.thin = thin;
    if (sigma > 0.0) config.proposal_sigma = sigma;
    if (nu > 0.0) config.proposal_nu = nu;
    if (exact_flat) config.a_update = AUpdate::FlatExactGibbs;
  }

  void register_options(CLI::App* cmd) {
    cmd->add_option("--iterations", iterations, "Total chain sweeps");
    cmd->add_option("--burn-in", burn_in, "Burn-in sweeps to discard");
    cmd->add_option("--thin", thin, "Keep every thin-th retained sweep");
    cmd->add_option("--sigma", sigma,
                    "Log-scale random-walk proposal sd (p = 1)");
    cmd->add_option("--nu", nu,
                    "Inverse-Wishart proposal degrees of freedom (p >= 2)");
    cmd->add_flag("--exact-flat-gibbs", exact_flat,
                  "Use the exact conditional A draw (flat prior only)");
  }
};

void print_summary_row(const std::string& name, const Chain& chain,
                       double level,
                       const std::map<std::string, double>& ess) {
  const double n = static_cast<double>(chain.size());
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : chain) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const Interval interval = posterior_interval(chain, level);
  std::printf("%-14s %10.4f %10.4f %10.4f %10.4f", name.c_str(), mean, sd,
              interval.low, interval.upp);
  if (const auto it = ess.find(name); it != ess.end()) {
    std::printf(" %9.0f", it->second);
  }
  std::printf("\n");
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitOptions {
  std::string dataset;
  std::string prior = "usp-dm";
  double delta = 1.0;
  std::string scale_rule = "auto";
  std::uint64_t seed = 1;
  double level = 0.95;
  SamplerFlags sampler;
};

int run_fit(const FitOptions& opt) {
  const BuiltinDataset ds = open_dataset(opt.dataset);
  const PriorConfig prior_config =
      prior_from_name(opt.prior, opt.delta, opt.scale_rule, ds);
  const PriorSpec prior =
      prior_config.kind == "flat"
          ? PriorSpec::improper_flat()
          : PriorSpec::usp(resolve_prior_v0(prior_config, ds), opt.prior,
                           opt.delta);

  SamplerConfig config;  // 42000 / 2000 / 2 defaults
  config.init_a = InitA::Explicit;
  config.a0 = initial_a_for(prior_config, ds);
  opt.sampler.apply(config);

  RngStream rng(opt.seed, 0);
  const PosteriorSamples draws = run_chain(ds.data, prior, config, rng);

  std::printf("dataset: %s (k=%ld, p=%ld, m=%ld)\n", ds.name.c_str(),
              static_cast<long>(ds.data.k()), static_cast<long>(ds.data.p()),
              static_cast<long>(ds.data.m()));
  std::printf("prior: %s%s\n", prior.label().c_str(),
              prior.is_flat() ? " (improper flat on A)" : "");
  std::printf("chain: %d iterations, burn-in %d, thin %d -> %ld kept\n",
              config.total_iterations, config.burn_in, config.thin,
              static_cast<long>(draws.kept()));
  std::printf("A-update acceptance rate: %.4f\n", draws.acceptance_rate);
  if (draws.proposal_failures > 0) {
    std::printf("warning: %ld proposal draws failed validation and were "
                "rejected\n",
                draws.proposal_failures);
  }
  if (!draws.ess_per_parameter.empty()) {
    double sum = 0.0;
    for (const auto& [label, value] : draws.ess_per_parameter) sum += value;
    std::printf("mean ESS across parameters: %.0f\n",
                sum / static_cast<double>(draws.ess_per_parameter.size()));
  }

  const double tail = 100.0 * 0.5 * (1.0 - opt.level);
  std::printf("\n%-14s %10s %10s %9.3g%% %8.3g%% %9s\n", "parameter", "mean",
              "sd", tail, 100.0 - tail, "ess");
  const Eigen::Index p = ds.data.p();
  const Eigen::Index mp = ds.data.m() * p;
  for (Eigen::Index i = 0; i < mp; ++i) {
    print_summary_row("beta[" + std::to_string(i + 1) + "]",
                      draws.beta_chain(i), opt.level,
                      draws.ess_per_parameter);
  }
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index c = r; c < p; ++c) {
      const std::string name =
          (p == 1) ? "A"
                   : "A[" + std::to_string(r + 1) + "][" +
                         std::to_string(c + 1) + "]";
      print_summary_row(name, draws.a_chain(r, c), opt.level,
                        draws.ess_per_parameter);
    }
  }
  for (Eigen::Index j = 0; j < ds.data.k(); ++j) {
    for (Eigen::Index l = 0; l < p; ++l) {
      const std::string name =
          (p == 1) ? "theta[" + std::to_string(j + 1) + "]"
                   : "theta[" + std::to_string(j + 1) + "][" +
                         std::to_string(l + 1) + "]";
      print_summary_row(name, draws.theta_chain(j, l), opt.level,
                        draws.ess_per_parameter);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string dataset;
  std::string prior = "usp-dm";
  double delta = 1.0;
  std::string scale_rule = "auto";
  double b0 = 0.0;
  int n_sim = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 0;
  std::uint64_t chain_seed = 0;
  bool has_data_seed = false;
  bool has_chain_seed = false;
  std::vector<double> beta_gen;
  std::string init_beta;
  int threads = 0;
  std::string output;
  SamplerFlags sampler;
};

int run_evaluate(const EvaluateOptions& opt) {
  RunConfig rc;
  rc.mode = "evaluate-cell";
  rc.dataset = opt.dataset;
  {
    const BuiltinDataset probe = open_dataset(opt.dataset);
    rc.priors = {prior_from_name(opt.prior, opt.delta, opt.scale_rule, probe)};
  }
  rc.grid.rule = "b0";
  rc.grid.values = {opt.b0};
  if (!opt.beta_gen.empty()) {
    rc.beta_gen = Eigen::Map<const Eigen::VectorXd>(
        opt.beta_gen.data(), static_cast<Eigen::Index>(opt.beta_gen.size()));
  }
  rc.level = opt.level;
  rc.n_sim = opt.n_sim;
  rc.master_seed = opt.seed;
  rc.parallelism = resolve_threads(opt.threads);
  rc.output_dir = opt.output;

  // Desk-scale chains by default for evaluation runs.
  rc.sampler.total_iterations = 12000;
  rc.sampler.burn_in = 2000;
  rc.sampler.thin = 2;
  if (opt.init_beta.empty()) {
    rc.sampler.init_beta = (rc.dataset == "hospital-27")
                               ? InitBeta::Generative
                               : InitBeta::PooledMean;
  } else if (opt.init_beta == "pooled-mean") {
    rc.sampler.init_beta = InitBeta::PooledMean;
  } else if (opt.init_beta == "generative") {
    rc.sampler.init_beta = InitBeta::Generative;
  } else {
    throw ConfigError("--init-beta must be pooled-mean or generative");
  }
  opt.sampler.apply(rc.sampler);

  ResolvedRun run = resolve_run_config(rc);
  rc.sampler.init_a = InitA::Explicit;
  rc.sampler.a0 = initial_a_for(rc.priors[0], run.dataset);
  run.config.sampler = rc.sampler;

  CellSeeds seeds = derive_cell_seeds(rc.master_seed, 0, 0);
  if (opt.has_data_seed) seeds.data_seed = opt.data_seed;
  if (opt.has_chain_seed) seeds.chain_seed = opt.chain_seed;

  const CoverageResult result =
      evaluate_cell(run.dataset.data, run.priors[0], run.grid[0], rc.sampler,
                    seeds, rc.level, rc.parallelism);

  std::printf("cell: prior=%s %s n_sim=%d level=%g\n",
              result.prior_label.c_str(), result.generative_label.c_str(),
              result.n_sim, result.level);
  std::printf("overall RB coverage: %.4f (SE %.4g)\n", result.overall_rb,
              result.overall_rb_se());
  std::printf("overall naive coverage: %.4f\n", result.overall_naive);
  std::printf("mean acceptance rate: %.4f\n", result.mean_acceptance);
  std::printf("per-group RB:");
  for (Eigen::Index j = 0; j < result.per_group_rb.size(); ++j) {
    std::printf(" %.4f", result.per_group_rb(j));
  }
  std::printf("\nseeds: data=%llu chain=%llu\n",
              static_cast<unsigned long long>(result.data_seed),
              static_cast<unsigned long long>(result.chain_seed));

  if (!opt.output.empty()) {
    ResultsFile file;
    file.run_config_json = run_config_to_json(run.config);
    file.master_seed = rc.master_seed;
    file.results = {result};
    export_results(file, opt.output);
    std::printf("wrote %s/results.{csv,json}\n", opt.output.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// campaign / reproduce
// ---------------------------------------------------------------------------

int export_campaign(const RunConfig& config, const BuiltinDataset& ds,
                    const std::vector<PriorSpec>& priors,
                    const std::vector<GenerativeConfig>& grid,
                    const SamplerConfig& sampler, double level,
                    std::uint64_t master_seed, int threads,
                    const std::string& out_dir) {
  std::printf("campaign: %zu priors x %zu grid points, n_sim=%d, %d thread%s\n",
              priors.size(), grid.size(), grid.empty() ? 0 : grid[0].n_sim,
              threads, threads == 1 ? "" : "s");
  const CampaignResult campaign = run_campaign(
      ds.data, priors, grid, sampler, master_seed, threads, level);

  for (std::size_t pi = 0; pi < priors.size(); ++pi) {
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const auto& cell = campaign.cells[pi][gi];
      if (cell) {
        std::printf("[%s | %s] overall RB %.4f (SE %.4g)\n",
                    cell->prior_label.c_str(), cell->generative_label.c_str(),
                    cell->overall_rb, cell->overall_rb_se());
      }
    }
  }
  for (const auto& failure : campaign.failures) {
    std::fprintf(stderr, "cell failure [prior %zu, grid %zu]: %s\n",
                 failure.prior_index, failure.grid_index,
                 failure.message.c_str());
  }

  ResultsFile file;
  file.run_config_json = run_config_to_json(config);
  file.master_seed = master_seed;
  file.results = campaign.flattened();
  file.failures = campaign.failures;
  export_results(file, out_dir);
  std::printf("wrote %s/{results.csv,results.json,figure_coverage.csv}\n",
              out_dir.c_str());
  return campaign.failures.empty() ? 0 : 2;
}

struct CampaignOptions {
  std::string config_path;
  std::string output;
  int threads = -1;  // -1: honor the config file
};

int run_campaign_cmd(const CampaignOptions& opt) {
  RunConfig config = load_run_config(opt.config_path);
  if (config.mode != "campaign") {
    throw ConfigError("campaign subcommand requires mode 'campaign', got '" +
                      config.mode + "'");
  }
  if (!opt.output.empty()) config.output_dir = opt.output;
  if (config.output_dir.empty()) config.output_dir = "uspcov-campaign";
  if (opt.threads >= 0) config.parallelism = opt.threads;
  const int threads = resolve_threads(config.parallelism);

  const ResolvedRun run = resolve_run_config(config);
  return export_campaign(run.config, run.dataset, run.priors, run.grid,
                         config.sampler, config.level, config.master_seed,
                         threads, config.output_dir);
}

struct ReproduceOptions {
  std::string dataset;
  std::string scale = "desk";
  std::uint64_t seed = 1;
  int n_sim = 0;  // 0: keep the scale's preset
  int threads = 0;
  std::string output;
  SamplerFlags sampler;
};

int run_reproduce(const ReproduceOptions& opt) {
  std::string name = opt.dataset;
  if (name == "hospital") name = "hospital-27";
  if (opt.scale != "desk" && opt.scale != "paper") {
    throw ConfigError("--scale must be 'desk' or 'paper'");
  }
  const Scale scale = opt.scale == "desk" ? Scale::Desk : Scale::Paper;
  ExperimentPreset preset = experiment_preset(name, scale);
  opt.sampler.apply(preset.sampler);
  if (opt.n_sim > 0) {
    for (auto& gen : preset.grid) gen.n_sim = opt.n_sim;
  }

  RunConfig config;
  config.mode = "reproduce";
  config.dataset = name;
  config.scale = opt.scale;
  config.sampler = preset.sampler;
  config.level = preset.level;
  config.n_sim = preset.grid[0].n_sim;
  config.master_seed = opt.seed;
  config.parallelism = resolve_threads(opt.threads);
  config.output_dir = opt.output.empty()
                          ? "reproduce-" + name + "-" + opt.scale
                          : opt.output;

  return export_campaign(config, preset.dataset, preset.priors, preset.grid,
                         preset.sampler, preset.level, opt.seed,
                         config.parallelism, config.output_dir);
}

int run_datasets() {
  for (const auto& name : builtin_dataset_names()) {
    const BuiltinDataset ds = load_builtin(name);
    std::printf("%-14s k=%-3ld p=%ld m=%ld %s\n", name.c_str(),
                static_cast<long>(ds.data.k()), static_cast<long>(ds.data.p()),
                static_cast<long>(ds.data.m()),
                name == "eight-schools"
                    ? "SAT coaching effects, intercept only"
                    : "hospital problem percentages with severity covariate");
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "uspcov: Bayesian Normal-Normal hierarchical models under uniform "
      "shrinkage priors, with a repeated-sampling frequency-coverage "
      "evaluation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "uspcov 0.1.0");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand(
      "fit", "Fit one model and print posterior summaries");
  fit_cmd->add_option("--dataset", fit.dataset, "Builtin name or CSV path")
      ->required();
  fit_cmd->add_option("--prior", fit.prior, "usp-dm | usp-em | usp-am | flat");
  fit_cmd->add_option("--delta", fit.delta, "Shape-matrix scale factor");
  fit_cmd->add_option("--scale-rule", fit.scale_rule, "auto | full | diag");
  fit_cmd->add_option("--seed", fit.seed, "Random seed");
  fit_cmd->add_option("--level", fit.level, "Interval level");
  fit.sampler.register_options(fit_cmd);

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Run one frequency-coverage cell");
  eval_cmd->add_option("--dataset", eval.dataset, "Builtin name or CSV path")
      ->required();
  eval_cmd->add_option("--prior", eval.prior, "usp-dm | usp-em | usp-am | flat");
  eval_cmd->add_option("--delta", eval.delta, "Shape-matrix scale factor");
  eval_cmd->add_option("--scale-rule", eval.scale_rule, "auto | full | diag");
  eval_cmd->add_option("--b0", eval.b0, "Reference shrinkage in (0, 1]")
      ->required();
  eval_cmd->add_option("--n-sim", eval.n_sim, "Simulated datasets per cell");
  eval_cmd->add_option("--level", eval.level, "Interval level");
  eval_cmd->add_option("--seed", eval.seed, "Master seed");
  eval_cmd->add_option("--data-seed", eval.data_seed,
                       "Override the derived mock-data seed")
      ->each([&eval](const std::string&) { eval.has_data_seed = true; });
  eval_cmd->add_option("--chain-seed", eval.chain_seed,
                       "Override the derived chain seed")
      ->each([&eval](const std::string&) { eval.has_chain_seed = true; });
  eval_cmd->add_option("--beta-gen", eval.beta_gen,
                       "Generative beta (default: preset value)");
  eval_cmd->add_option("--init-beta", eval.init_beta,
                       "pooled-mean | generative");
  eval_cmd->add_option("--threads", eval.threads,
                       "Worker threads (0 = all cores)");
  eval_cmd->add_option("--output", eval.output, "Write results files here");
  eval.sampler.register_options(eval_cmd);

  CampaignOptions campaign;
  auto* campaign_cmd = app.add_subcommand(
      "campaign", "Run a full (priors x grid) coverage campaign from a "
                  "run-config file");
  campaign_cmd->add_option("--config", campaign.config_path, "Run-config JSON")
      ->required();
  campaign_cmd->add_option("--output", campaign.output,
                           "Override the config's output directory");
  campaign_cmd->add_option("--threads", campaign.threads,
                           "Override the config's parallelism");

  ReproduceOptions reproduce;
  auto* reproduce_cmd = app.add_subcommand(
      "reproduce",
      "Run a bundled experiment (6 priors x 10 grid points) end to end");
  reproduce_cmd
      ->add_option("dataset", reproduce.dataset, "eight-schools | hospital")
      ->required();
  reproduce_cmd->add_option("--scale", reproduce.scale,
                            "desk (n_sim=200, 12000 sweeps) | paper "
                            "(n_sim=1000, 42000 sweeps; long running)");
  reproduce_cmd->add_option("--seed", reproduce.seed, "Master seed");
  reproduce_cmd->add_option("--n-sim", reproduce.n_sim,
                            "Override the scale's simulations per cell");
  reproduce_cmd->add_option("--threads", reproduce.threads,
                            "Worker threads (0 = all cores)");
  reproduce_cmd->add_option("--output", reproduce.output, "Output directory");
  reproduce.sampler.register_options(reproduce_cmd);

  auto* datasets_cmd =
      app.add_subcommand("datasets", "List the builtin datasets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit);
    if (eval_cmd->parsed()) return run_evaluate(eval);
    if (campaign_cmd->parsed()) return run_campaign_cmd(campaign);
    if (reproduce_cmd->parsed()) return run_reproduce(reproduce);
    if (datasets_cmd->parsed()) return run_datasets();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n\n"
              << run_config_schema();
    return 1;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("uspcov");
  for (const auto& arg : args) argv.push_back(arg.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace uspcov
