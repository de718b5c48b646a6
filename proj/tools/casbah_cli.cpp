#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>

#include "casbah/dist.hpp"
#include "casbah/errors.hpp"
#include "casbah/gibbs.hpp"
#include "casbah/io.hpp"
#include "casbah/model.hpp"
#include "casbah/sim.hpp"
#include "casbah/strata.hpp"
#include "casbah/version.hpp"

namespace fs = std::filesystem;
using namespace casbah;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::string na_or(double v) {
  return std::isnan(v) ? "NA" : io::format_double(v);
}

void standardize_covariates(ObservedDataset& data) {
  for (int j = 0; j < data.p(); ++j) {
    const double mean = data.x.col(j).mean();
    double var = (data.x.col(j).array() - mean).square().sum();
    var = data.n() > 1 ? var / (data.n() - 1) : 0.0;
    const double sd = std::sqrt(var);
    data.x.col(j).array() -= mean;
    if (sd > 0.0) data.x.col(j) /= sd;
  }
}

int cmd_simulate(int scenario, int n, std::uint64_t seed, const fs::path& out) {
  sim::ScenarioSpec spec = sim::scenario_spec(scenario, n);
  RngStream rng(seed);
  auto [data, truth] = sim::generate(spec, rng);
  fs::create_directories(out);
  std::vector<std::string> names;
  for (int j = 0; j < spec.n_covariates; ++j) {
    names.push_back("x" + std::to_string(j + 1));
  }
  io::write_dataset(out / "data.csv", data, names);
  io::write_truth(out / "truth.csv", truth);
  io::write_scenario_spec(out / "scenario.cfg", spec);
  std::cerr << "[casbah] wrote " << (out / "data.csv").string() << " and "
            << (out / "truth.csv").string() << "\n";
  return 0;
}

int cmd_fit(const fs::path& data_path, const fs::path& config_path,
            const fs::path& out, bool standardize) {
  io::RunConfig config =
      config_path.empty() ? io::default_config() : io::parse_config(config_path);
  io::apply_env_seed(config);
  if (standardize) config.standardize = true;

  io::NamedDataset named = io::read_dataset(data_path, config.covariates);
  if (config.standardize) standardize_covariates(named.data);
  named.data.validate(true);

  const auto start = std::chrono::steady_clock::now();
  gibbs::PosteriorDraws draws = gibbs::run_chain(named.data, config.hp, config.chain);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::write_draws(out, draws, named.data, named.covariate_names, config, wall);
  std::cerr << "[casbah] fit finished in " << wall << " s, " << draws.draws.size()
            << " kept iterations -> " << out.string() << "\n";
  return 0;
}

int cmd_summarize(const fs::path& draws_dir, const fs::path& out) {
  io::LoadedDraws loaded = io::read_draws(draws_dir);
  strata::StrataSummary summary = strata::summarize(loaded.draws, loaded.data);
  fs::create_directories(out);

  const auto interval_rows = [](const std::array<strata::IntervalSummary, 3>& s) {
    std::vector<std::vector<std::string>> rows;
    for (int idx = 0; idx < 3; ++idx) {
      const auto label = strata::stratum_from_index(idx);
      rows.push_back({strata::stratum_name(label),
                      s[idx].present ? io::format_double(s[idx].median) : "NA",
                      s[idx].present ? io::format_double(s[idx].lo90) : "NA",
                      s[idx].present ? io::format_double(s[idx].hi90) : "NA",
                      io::format_double(s[idx].presence_rate)});
    }
    return rows;
  };
  io::write_csv(out / "pce.csv",
                {"stratum", "median", "lo90", "hi90", "presence_rate"},
                interval_rows(summary.tau_summary));
  io::write_csv(out / "gap.csv",
                {"stratum", "median", "lo90", "hi90", "presence_rate"},
                interval_rows(summary.gap_summary));

  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < loaded.data.n(); ++i) {
      rows.push_back({std::to_string(i + 1),
                      io::format_double(summary.per_unit_probs(i, 0)),
                      io::format_double(summary.per_unit_probs(i, 1)),
                      io::format_double(summary.per_unit_probs(i, 2)),
                      strata::stratum_name(summary.partition[i])});
    }
    io::write_csv(out / "strata_probs.csv",
                  {"unit", "p_neg", "p_diss", "p_pos", "point"}, rows);
  }
  {
    // Per-stratum covariate means over the point partition (spider-plot data).
    std::vector<std::string> header = {"stratum", "count"};
    for (const auto& name : loaded.covariate_names) header.push_back(name);
    std::vector<std::vector<std::string>> rows;
    for (int idx = 0; idx < 3; ++idx) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(loaded.data.p());
      int count = 0;
      for (int i = 0; i < loaded.data.n(); ++i) {
        if (strata::stratum_index(summary.partition[i]) == idx) {
          sum += loaded.data.x.row(i).transpose();
          ++count;
        }
      }
      std::vector<std::string> row = {
          strata::stratum_name(strata::stratum_from_index(idx)),
          std::to_string(count)};
      for (int j = 0; j < loaded.data.p(); ++j) {
        row.push_back(count > 0 ? io::format_double(sum[j] / count) : "NA");
      }
      rows.push_back(std::move(row));
    }
    io::write_csv(out / "strata_covariates.csv", header, rows);
  }
  std::cerr << "[casbah] summaries written to " << out.string() << "\n";
  return 0;
}

int cmd_study(int scenario, int replicates, const fs::path& config_path,
              const fs::path& out, int n, int jobs) {
  io::RunConfig config =
      config_path.empty() ? io::default_config() : io::parse_config(config_path);
  io::apply_env_seed(config);
  sim::ScenarioSpec spec = sim::scenario_spec(scenario, n);
  sim::StudyResult result =
      sim::replicate_study(spec, replicates, config.hp, config.chain, jobs);
  fs::create_directories(out);

  const int ok = replicates - result.failures;
  const std::string fail_str = std::to_string(result.failures);
  const auto sd_or_empty = [ok](double sd) {
    return (ok < 2 || std::isnan(sd)) ? std::string() : io::format_double(sd);
  };
  const auto& agg = result.aggregates;
  io::write_csv(
      out / "table1.csv",
      {"scenario", "metric", "median_bias", "iqr", "mean_bias", "sd",
       "replicates", "failures"},
      {{std::to_string(scenario), "P", io::format_double(agg.bias_p_median),
        io::format_double(agg.bias_p_iqr), io::format_double(agg.bias_p_mean),
        sd_or_empty(agg.bias_p_sd), std::to_string(ok), fail_str},
       {std::to_string(scenario), "Y", io::format_double(agg.bias_y_median),
        io::format_double(agg.bias_y_iqr), io::format_double(agg.bias_y_mean),
        sd_or_empty(agg.bias_y_sd), std::to_string(ok), fail_str}});
  io::write_csv(out / "table2.csv",
                {"scenario", "ari_mean", "ari_sd", "replicates", "failures"},
                {{std::to_string(scenario), io::format_double(agg.ari_mean),
                  sd_or_empty(agg.ari_sd), std::to_string(ok), fail_str}});
  {
    std::vector<std::vector<std::string>> rows;
    for (int idx = 0; idx < 3; ++idx) {
      rows.push_back(
          {std::to_string(scenario),
           strata::stratum_name(strata::stratum_from_index(idx)),
           na_or(agg.tau_true_mean[idx]), na_or(agg.tau_est_mean[idx]),
           (agg.tau_present_count[idx] < 2 || std::isnan(agg.tau_est_sd[idx]))
               ? ""
               : io::format_double(agg.tau_est_sd[idx]),
           std::to_string(agg.tau_present_count[idx]), std::to_string(ok),
           fail_str});
    }
    io::write_csv(out / "table3.csv",
                  {"scenario", "stratum", "tau_true", "est_mean", "est_sd",
                   "present_in", "replicates", "failures"},
                  rows);
  }
  std::cerr << "[casbah] study tables written to " << out.string() << "\n";
  return 0;
}

int cmd_priorprob(double alpha_mean, bool have_alpha, double rho1, double rho2,
                  bool have_rho, int L, const std::string& grid,
                  const fs::path& out) {
  if (have_rho == have_alpha) {
    throw input_error("priorprob: give either --alpha-mean or both --rho1/--rho2");
  }
  if (!grid.empty()) {
    double lo, hi, step;
    if (std::sscanf(grid.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
        step <= 0.0 || hi < lo) {
      throw input_error("priorprob: --grid must be lo:hi:step with step > 0");
    }
    fs::create_directories(out);
    std::vector<std::vector<std::string>> rows;
    for (double a = lo; a <= hi + 1e-12; a += step) {
      const auto [r1, r2] = model::rho_moments(a);
      rows.push_back({io::format_double(a),
                      io::format_double(
                          model::prior_dissociative_probability(r1, r2, L))});
    }
    io::write_csv(out / "figure1.csv", {"alpha_mean", "probability"}, rows);
    std::cerr << "[casbah] wrote " << (out / "figure1.csv").string() << "\n";
    return 0;
  }
  double r1 = rho1, r2 = rho2;
  if (have_alpha) {
    const auto m = model::rho_moments(alpha_mean);
    r1 = m.first;
    r2 = m.second;
  }
  std::cout << io::format_double(model::prior_dissociative_probability(r1, r2, L))
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-atoms Bayesian mixture for principal stratification "
               "with a continuous post-treatment variable"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Generate a scenario dataset");
  int scenario = 1, n = 500, jobs = 1, replicates = 20, L = 20;
  std::uint64_t seed = 1;
  std::string out = ".", data_file, config_file, draws_dir, grid;
  bool standardize = false;
  simulate->add_option("--scenario", scenario, "Scenario id (1-5)")->required();
  simulate->add_option("--n", n, "Sample size")->default_val(500);
  simulate->add_option("--seed", seed, "Generator seed")->default_val(1);
  simulate->add_option("--out", out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler on a dataset");
  fit->add_option("--data", data_file, "Input data.csv")->required();
  fit->add_option("--config", config_file, "key=value run configuration");
  fit->add_option("--out", out, "Output directory for draws")->required();
  fit->add_flag("--standardize", standardize, "Standardize covariates");

  auto* summarize = app.add_subcommand("summarize", "Summarize stored draws");
  summarize->add_option("--draws", draws_dir, "Directory written by fit")->required();
  summarize->add_option("--out", out, "Output directory")->required();

  auto* study = app.add_subcommand("study", "Replicated simulation study");
  study->add_option("--scenario", scenario, "Scenario id (1-5)")->required();
  study->add_option("--replicates", replicates, "Number of replicates")->default_val(20);
  study->add_option("--config", config_file, "key=value run configuration");
  study->add_option("--out", out, "Output directory")->required();
  study->add_option("--n", n, "Sample size per replicate")->default_val(500);
  study->add_option("--jobs", jobs, "Concurrent replicates")->default_val(1);

  auto* priorprob =
      app.add_subcommand("priorprob", "Prior probability of the dissociative stratum");
  double alpha_mean = 0.0, rho1 = 0.0, rho2 = 0.0;
  auto* alpha_opt = priorprob->add_option("--alpha-mean", alpha_mean,
                                          "Mean of the stick predictor");
  auto* rho1_opt = priorprob->add_option("--rho1", rho1, "E Phi(alpha)");
  auto* rho2_opt = priorprob->add_option("--rho2", rho2, "E Phi(alpha)^2");
  priorprob->add_option("--L", L, "Truncation level")->required();
  priorprob->add_option("--grid", grid, "alpha-mean grid lo:hi:step -> figure1.csv");
  priorprob->add_option("--out", out, "Output directory for --grid")->default_val(".");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      if (scenario < 1 || scenario > 5) {
        throw input_error("scenario must be in {1..5}");
      }
      return cmd_simulate(scenario, n, seed, out);
    }
    if (fit->parsed()) return cmd_fit(data_file, config_file, out, standardize);
    if (summarize->parsed()) return cmd_summarize(draws_dir, out);
    if (study->parsed()) {
      if (scenario < 1 || scenario > 5) {
        throw input_error("scenario must be in {1..5}");
      }
      return cmd_study(scenario, replicates, config_file, out, n, jobs);
    }
    if (priorprob->parsed()) {
      const bool have_alpha = alpha_opt->count() > 0;
      const bool have_rho = rho1_opt->count() > 0 && rho2_opt->count() > 0;
      return cmd_priorprob(alpha_mean, have_alpha, rho1, rho2, have_rho, L,
                           grid, out);
    }
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
