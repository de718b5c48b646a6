#include "casbah/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "casbah/errors.hpp"
#include "casbah/version.hpp"

namespace casbah::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int Csv::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw input_error("missing column '" + name + "'");
}

double Csv::num(std::size_t row, int col_idx) const {
  const std::string& cell = rows[row][col_idx];
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    std::ostringstream oss;
    oss << "non-numeric value '" << cell << "' at row " << row + 1 << ", column "
        << header[col_idx];
    throw input_error(oss.str());
  }
  return v;
}

long Csv::integer(std::size_t row, int col_idx) const {
  const double v = num(row, col_idx);
  const long r = static_cast<long>(v);
  if (static_cast<double>(r) != v) {
    std::ostringstream oss;
    oss << "non-integer value '" << rows[row][col_idx] << "' at row " << row + 1
        << ", column " << header[col_idx];
    throw input_error(oss.str());
  }
  return r;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path.string());
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      csv.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != csv.header.size()) {
        std::ostringstream oss;
        oss << path.string() << ": row " << csv.rows.size() + 1 << " has "
            << cells.size() << " cells, expected " << csv.header.size();
        throw input_error(oss.str());
      }
      csv.rows.push_back(std::move(cells));
    }
  }
  if (first) throw input_error(path.string() + ": empty file");
  return csv;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw input_error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i] << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
  if (!out) throw input_error("write failed for " + path.string());
}

NamedDataset read_dataset(const fs::path& path,
                          std::vector<std::string> covariate_names) {
  Csv csv = read_csv(path);
  if (covariate_names.empty()) {
    for (const auto& name : csv.header) {
      if (!name.empty() && name[0] == 'x' && name != "x") {
        covariate_names.push_back(name);
      }
    }
    if (covariate_names.empty()) {
      throw input_error(path.string() + ": no covariate columns (x1..xp) found");
    }
  }
  const int tc = csv.col("t");
  const int pc = csv.col("p");
  const int yc = csv.col("y");
  std::vector<int> xc;
  for (const auto& name : covariate_names) xc.push_back(csv.col(name));

  const int n = static_cast<int>(csv.rows.size());
  NamedDataset out;
  out.covariate_names = covariate_names;
  out.data.x.resize(n, static_cast<int>(xc.size()));
  out.data.t.resize(n);
  out.data.p_obs.resize(n);
  out.data.y_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    const long tv = csv.integer(i, tc);
    if (tv != 0 && tv != 1) {
      std::ostringstream oss;
      oss << path.string() << ": treatment must be 0 or 1 at row " << i + 1;
      throw input_error(oss.str());
    }
    out.data.t[i] = static_cast<int>(tv);
    out.data.p_obs[i] = csv.num(i, pc);
    out.data.y_obs[i] = csv.num(i, yc);
    for (std::size_t j = 0; j < xc.size(); ++j) {
      out.data.x(i, static_cast<int>(j)) = csv.num(i, xc[j]);
    }
  }
  return out;
}

void write_dataset(const fs::path& path, const ObservedDataset& data,
                   const std::vector<std::string>& covariate_names) {
  std::vector<std::string> header = {"id", "t", "p", "y"};
  for (const auto& name : covariate_names) header.push_back(name);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(data.n());
  for (int i = 0; i < data.n(); ++i) {
    std::vector<std::string> row = {std::to_string(i + 1),
                                    std::to_string(data.t[i]),
                                    format_double(data.p_obs[i]),
                                    format_double(data.y_obs[i])};
    for (int j = 0; j < data.p(); ++j) row.push_back(format_double(data.x(i, j)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_truth(const fs::path& path, const sim::SyntheticTruth& truth) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(truth.stratum.size());
  for (std::size_t i = 0; i < truth.stratum.size(); ++i) {
    rows.push_back({format_double(truth.p0[i]), format_double(truth.p1[i]),
                    format_double(truth.y0[i]), format_double(truth.y1[i]),
                    std::to_string(truth.stratum[i])});
  }
  write_csv(path, {"p0", "p1", "y0", "y1", "stratum"}, rows);
}

void write_scenario_spec(const fs::path& path, const sim::ScenarioSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write " + path.string());
  const auto join = [](const Eigen::VectorXd& v) {
    std::string s;
    for (int i = 0; i < v.size(); ++i) {
      s += (i ? "," : "") + format_double(v[i]);
    }
    return s;
  };
  out << "scenario=" << spec.id << "\n"
      << "n=" << spec.n << "\n"
      << "n_covariates=" << spec.n_covariates << "\n"
      << "treatment_coef=" << join(spec.treatment_coef) << "\n"
      << "atom_means=" << join(spec.atom_means) << "\n"
      << "atom_vars=" << join(spec.atom_vars) << "\n"
      << "theta0=" << join(spec.theta0) << "\n"
      << "theta1=" << join(spec.theta1) << "\n"
      << "lambda0=" << format_double(spec.lambda0) << "\n"
      << "lambda1=" << format_double(spec.lambda1) << "\n";
  for (std::size_t k = 0; k < spec.strata.size(); ++k) {
    out << "stratum" << k + 1 << "_atoms=" << spec.strata[k].atom0 + 1 << ","
        << spec.strata[k].atom1 + 1 << "\n"
        << "stratum" << k + 1 << "_utility=" << format_double(spec.alloc_intercept[k]);
    for (int j = 0; j < spec.alloc_coef.cols(); ++j) {
      out << "," << format_double(spec.alloc_coef(k, j));
    }
    out << "\n";
  }
}

RunConfig default_config() { return RunConfig{}; }

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw input_error("config: non-numeric value for " + key + ": '" + value + "'");
  }
  return v;
}
}  // namespace

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open config " + path.string());
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream oss;
      oss << "config " << path.string() << " line " << lineno
          << ": expected key=value";
      throw input_error(oss.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "L") cfg.hp.L = static_cast<int>(parse_num(key, value));
    else if (key == "mu_eta") cfg.hp.mu_eta = parse_num(key, value);
    else if (key == "sigma2_eta") cfg.hp.sigma2_eta = parse_num(key, value);
    else if (key == "gamma1") cfg.hp.gamma1 = parse_num(key, value);
    else if (key == "gamma2") cfg.hp.gamma2 = parse_num(key, value);
    else if (key == "xi") cfg.hp.xi = parse_num(key, value);
    else if (key == "omega2") cfg.hp.omega2 = parse_num(key, value);
    else if (key == "mu_theta") cfg.hp.mu_theta = parse_num(key, value);
    else if (key == "sigma2_theta") cfg.hp.sigma2_theta = parse_num(key, value);
    else if (key == "mu_lambda") cfg.hp.mu_lambda = parse_num(key, value);
    else if (key == "sigma2_lambda") cfg.hp.sigma2_lambda = parse_num(key, value);
    else if (key == "iterations") cfg.chain.iterations = static_cast<int>(parse_num(key, value));
    else if (key == "burn_in") cfg.chain.burn_in = static_cast<int>(parse_num(key, value));
    else if (key == "thin") cfg.chain.thin = static_cast<int>(parse_num(key, value));
    else if (key == "tmvn_sweeps") cfg.chain.tmvn_sweeps = static_cast<int>(parse_num(key, value));
    else if (key == "seed") cfg.chain.seed = static_cast<std::uint64_t>(parse_num(key, value));
    else if (key == "standardize") cfg.standardize = parse_num(key, value) != 0.0;
    else if (key == "covariates") {
      cfg.covariates.clear();
      std::istringstream ss(value);
      std::string name;
      while (std::getline(ss, name, ',')) {
        name = trim(name);
        if (!name.empty()) cfg.covariates.push_back(name);
      }
    } else {
      throw input_error("config: unknown key '" + key + "'");
    }
  }
  cfg.hp.validate();
  cfg.chain.validate();
  return cfg;
}

void apply_env_seed(RunConfig& config) {
  if (const char* env = std::getenv("CASBAH_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw input_error("CASBAH_SEED must be an unsigned integer");
    }
    config.chain.seed = v;
  }
}

void write_draws(const fs::path& dir, const gibbs::PosteriorDraws& draws,
                 const ObservedDataset& data,
                 const std::vector<std::string>& covariate_names,
                 const RunConfig& config, double wall_seconds) {
  fs::create_directories(dir);
  const int kept = static_cast<int>(draws.draws.size());

  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(kept) * draws.L);
    for (int r = 0; r < kept; ++r) {
      const auto& d = draws.draws[r];
      for (int l = 0; l < draws.L; ++l) {
        rows.push_back({std::to_string(r + 1), std::to_string(l + 1),
                        format_double(d.eta[l]), format_double(d.sigma2[l])});
      }
    }
    write_csv(dir / "atoms.csv", {"iter", "l", "eta", "sigma2"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(kept);
    for (int r = 0; r < kept; ++r) {
      const auto& d = draws.draws[r];
      rows.push_back({std::to_string(r + 1), format_double(d.theta0[0]),
                      format_double(d.theta0[1]), format_double(d.theta1[0]),
                      format_double(d.theta1[1]), format_double(d.theta1[2]),
                      format_double(d.theta1[3])});
    }
    write_csv(dir / "theta.csv",
              {"iter", "theta00", "theta01", "theta10", "theta11", "theta12",
               "theta13"},
              rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(kept);
    for (int r = 0; r < kept; ++r) {
      rows.push_back({std::to_string(r + 1),
                      format_double(draws.draws[r].lambda0),
                      format_double(draws.draws[r].lambda1)});
    }
    write_csv(dir / "lambda.csv", {"iter", "lambda0", "lambda1"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(kept) * draws.n);
    for (int r = 0; r < kept; ++r) {
      const auto& d = draws.draws[r];
      for (int i = 0; i < draws.n; ++i) {
        rows.push_back({std::to_string(r + 1), std::to_string(i + 1),
                        std::to_string(d.s0[i]), std::to_string(d.s1[i]),
                        std::to_string(d.stratum[i])});
      }
    }
    write_csv(dir / "labels.csv", {"iter", "unit", "s0", "s1", "stratum"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(kept) * draws.n);
    for (int r = 0; r < kept; ++r) {
      const auto& d = draws.draws[r];
      for (int i = 0; i < draws.n; ++i) {
        rows.push_back({std::to_string(r + 1), std::to_string(i + 1),
                        format_double(d.p_missing[i]),
                        format_double(d.y_missing[i])});
      }
    }
    write_csv(dir / "imputed.csv", {"iter", "unit", "p_miss", "y_miss"}, rows);
  }
  write_dataset(dir / "data.csv", data, covariate_names);

  std::ofstream meta(dir / "meta", std::ios::binary);
  if (!meta) throw input_error("cannot write " + (dir / "meta").string());
  meta << "version=" << kVersion << "\n"
       << "seed=" << config.chain.seed << "\n"
       << "iterations=" << config.chain.iterations << "\n"
       << "burn_in=" << config.chain.burn_in << "\n"
       << "thin=" << config.chain.thin << "\n"
       << "tmvn_sweeps=" << config.chain.tmvn_sweeps << "\n"
       << "L=" << config.hp.L << "\n"
       << "mu_eta=" << format_double(config.hp.mu_eta) << "\n"
       << "sigma2_eta=" << format_double(config.hp.sigma2_eta) << "\n"
       << "gamma1=" << format_double(config.hp.gamma1) << "\n"
       << "gamma2=" << format_double(config.hp.gamma2) << "\n"
       << "xi=" << format_double(config.hp.xi) << "\n"
       << "omega2=" << format_double(config.hp.omega2) << "\n"
       << "mu_theta=" << format_double(config.hp.mu_theta) << "\n"
       << "sigma2_theta=" << format_double(config.hp.sigma2_theta) << "\n"
       << "mu_lambda=" << format_double(config.hp.mu_lambda) << "\n"
       << "sigma2_lambda=" << format_double(config.hp.sigma2_lambda) << "\n"
       << "standardize=" << (config.standardize ? 1 : 0) << "\n"
       << "n=" << draws.n << "\n"
       << "p=" << draws.p << "\n"
       << "kept=" << kept << "\n"
       << "wall_seconds=" << format_double(wall_seconds) << "\n";
}

LoadedDraws read_draws(const fs::path& dir) {
  if (!fs::exists(dir / "labels.csv")) {
    throw input_error("draws directory " + dir.string() +
                      " is empty or missing labels.csv");
  }
  LoadedDraws out;
  NamedDataset named = read_dataset(dir / "data.csv");
  out.data = std::move(named.data);
  out.covariate_names = std::move(named.covariate_names);

  Csv atoms = read_csv(dir / "atoms.csv");
  Csv theta = read_csv(dir / "theta.csv");
  Csv lambda = read_csv(dir / "lambda.csv");
  Csv labels = read_csv(dir / "labels.csv");
  Csv imputed = read_csv(dir / "imputed.csv");

  const int kept = static_cast<int>(theta.rows.size());
  if (kept == 0) throw input_error("draws directory has zero kept iterations");
  const int n = out.data.n();
  if (static_cast<int>(labels.rows.size()) != kept * n ||
      static_cast<int>(imputed.rows.size()) != kept * n ||
      atoms.rows.size() % kept != 0) {
    throw input_error("draw files are inconsistent with data.csv");
  }
  const int L = static_cast<int>(atoms.rows.size()) / kept;

  out.draws.n = n;
  out.draws.p = out.data.p();
  out.draws.L = L;
  out.draws.draws.resize(kept);
  for (int r = 0; r < kept; ++r) {
    auto& d = out.draws.draws[r];
    d.eta.resize(L);
    d.sigma2.resize(L);
    d.s0.resize(n);
    d.s1.resize(n);
    d.stratum.resize(n);
    d.p_missing.resize(n);
    d.y_missing.resize(n);
  }
  {
    const int c_eta = atoms.col("eta"), c_s = atoms.col("sigma2");
    const int c_iter = atoms.col("iter"), c_l = atoms.col("l");
    for (std::size_t row = 0; row < atoms.rows.size(); ++row) {
      const int r = static_cast<int>(atoms.integer(row, c_iter)) - 1;
      const int l = static_cast<int>(atoms.integer(row, c_l)) - 1;
      out.draws.draws[r].eta[l] = atoms.num(row, c_eta);
      out.draws.draws[r].sigma2[l] = atoms.num(row, c_s);
    }
  }
  {
    const int cols[6] = {theta.col("theta00"), theta.col("theta01"),
                         theta.col("theta10"), theta.col("theta11"),
                         theta.col("theta12"), theta.col("theta13")};
    const int c_iter = theta.col("iter");
    for (std::size_t row = 0; row < theta.rows.size(); ++row) {
      const int r = static_cast<int>(theta.integer(row, c_iter)) - 1;
      auto& d = out.draws.draws[r];
      d.theta0[0] = theta.num(row, cols[0]);
      d.theta0[1] = theta.num(row, cols[1]);
      for (int k = 0; k < 4; ++k) d.theta1[k] = theta.num(row, cols[2 + k]);
    }
  }
  {
    const int c0 = lambda.col("lambda0"), c1 = lambda.col("lambda1");
    const int c_iter = lambda.col("iter");
    for (std::size_t row = 0; row < lambda.rows.size(); ++row) {
      const int r = static_cast<int>(lambda.integer(row, c_iter)) - 1;
      out.draws.draws[r].lambda0 = lambda.num(row, c0);
      out.draws.draws[r].lambda1 = lambda.num(row, c1);
    }
  }
  {
    const int c_iter = labels.col("iter"), c_unit = labels.col("unit");
    const int c_s0 = labels.col("s0"), c_s1 = labels.col("s1");
    const int c_str = labels.col("stratum");
    for (std::size_t row = 0; row < labels.rows.size(); ++row) {
      const int r = static_cast<int>(labels.integer(row, c_iter)) - 1;
      const int i = static_cast<int>(labels.integer(row, c_unit)) - 1;
      auto& d = out.draws.draws[r];
      d.s0[i] = static_cast<int>(labels.integer(row, c_s0));
      d.s1[i] = static_cast<int>(labels.integer(row, c_s1));
      d.stratum[i] = static_cast<int>(labels.integer(row, c_str));
    }
  }
  {
    const int c_iter = imputed.col("iter"), c_unit = imputed.col("unit");
    const int c_p = imputed.col("p_miss"), c_y = imputed.col("y_miss");
    for (std::size_t row = 0; row < imputed.rows.size(); ++row) {
      const int r = static_cast<int>(imputed.integer(row, c_iter)) - 1;
      const int i = static_cast<int>(imputed.integer(row, c_unit)) - 1;
      out.draws.draws[r].p_missing[i] = imputed.num(row, c_p);
      out.draws.draws[r].y_missing[i] = imputed.num(row, c_y);
    }
  }
  return out;
}

}  // namespace casbah::io
