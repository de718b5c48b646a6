#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "casbah/gibbs.hpp"
#include "casbah/model.hpp"
#include "casbah/sim.hpp"

namespace casbah::io {

// All emitted CSVs: header row, UTF-8, LF endings, numbers at %.10g.
std::string format_double(double v);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;  // throws input_error if missing
  double num(std::size_t row, int col_idx) const;
  long integer(std::size_t row, int col_idx) const;
};

Csv read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Datasets travel as data.csv with columns id,t,p,y,x1..xp (extra covariate
// names allowed via the config). Validation names the offending row/column.
struct NamedDataset {
  ObservedDataset data;
  std::vector<std::string> covariate_names;
};
NamedDataset read_dataset(const std::filesystem::path& path,
                          std::vector<std::string> covariate_names = {});
void write_dataset(const std::filesystem::path& path, const ObservedDataset& data,
                   const std::vector<std::string>& covariate_names);

void write_truth(const std::filesystem::path& path, const sim::SyntheticTruth& truth);

// Generating constants of a scenario in the flat key=value grammar, written
// next to simulated data as provenance.
void write_scenario_spec(const std::filesystem::path& path,
                         const sim::ScenarioSpec& spec);

// Flat key=value run configuration ('#' comments). Keys match the
// hyperparameter and chain-config field names.
struct RunConfig {
  Hyperparams hp;
  gibbs::GibbsConfig chain;
  std::vector<std::string> covariates;  // empty: autodetect x* columns
  bool standardize = false;
};
RunConfig parse_config(const std::filesystem::path& path);
RunConfig default_config();
// CASBAH_SEED environment variable overrides the config seed.
void apply_env_seed(RunConfig& config);

// Draw persistence: atoms.csv, theta.csv, lambda.csv, labels.csv,
// imputed.csv, a normalized copy of the data (data.csv) and a meta file.
void write_draws(const std::filesystem::path& dir,
                 const gibbs::PosteriorDraws& draws,
                 const ObservedDataset& data,
                 const std::vector<std::string>& covariate_names,
                 const RunConfig& config, double wall_seconds);

struct LoadedDraws {
  gibbs::PosteriorDraws draws;
  ObservedDataset data;
  std::vector<std::string> covariate_names;
};
LoadedDraws read_draws(const std::filesystem::path& dir);

}  // namespace casbah::io
