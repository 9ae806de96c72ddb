#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pflm/estimator.hpp"
#include "pflm/minimax.hpp"
#include "pflm/risk.hpp"

namespace pflm {

enum class ExperimentKind { fit, rate, concentration, bounds, minimax };

const char* kind_name(ExperimentKind kind);

// Inputs of the lower-bound certificate; lives beside the model spec since
// the certificate is parameter-only and never touches a dataset.
struct MinimaxParams {
  int n = 1000;
  double r = 1.0;
  double b1 = 1.0;
  double b2 = 1.0;
  double sigma2 = 1.0;
  double rho = 0.1;
};

// One config file drives one experiment. Everything an output depends on
// lives here except the worker count, which by the determinism contract
// must not change a single byte of any artifact.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::rate;
  ModelSpec model;
  BoundConfig bound;
  bool fit_c_eff = false;  // "c_eff": "fit" resolves against the true spectrum
  double grid_a = 0.0;
  double grid_b = 1.0;
  int grid_m = 101;
  std::vector<int> n_grid;  // strictly increasing
  int reps = 1;
  // fixed penalty for every n; unset means lambda_schedule(omega, theta, n)
  std::optional<double> lambda_override;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int workers = 1;
  MinimaxParams minimax;
};

// JSON with strict field checking: unknown keys, type mismatches, and
// invalid values raise ConfigError. Syntax errors carry source:line:column.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& source_name);
ExperimentConfig load_config(const std::string& path);

struct RateRow {
  int n = 0;
  int p = 0;
  int rep = 0;
  double lambda = 0.0;
  std::uint64_t dataset_seed = 0;
  RiskBreakdown risk;
  double residual = 0.0;
  bool converged = false;
};

struct RateSummary {
  int n = 0;
  double lambda = 0.0;
  int converged = 0;
  int excluded = 0;
  double excess_mean = 0.0, excess_se = 0.0;
  double alpha_part_mean = 0.0, alpha_part_se = 0.0;
  double functional_mean = 0.0, functional_se = 0.0;
  double alpha_err_mean = 0.0, alpha_err_se = 0.0;
  double tfhalf_mean = 0.0, tfhalf_se = 0.0;
};

// log-log slope of each summary mean against n; NaN with fewer than two
// usable points.
struct RateSlopes {
  double excess_risk = 0.0;
  double alpha_part = 0.0;
  double functional_part = 0.0;
  double alpha_err = 0.0;
  double tfhalf_err = 0.0;
};

struct RateResult {
  std::vector<RateRow> rows;  // (n, rep) order, unconverged ones included
  std::vector<RateSummary> summary;
  RateSlopes slopes;
  int unconverged = 0;
};

RateResult run_rate_experiment(const ExperimentConfig& cfg);
std::string rate_csv(const RateResult& result);

// One suite per entry of the n-grid, in order.
std::vector<ConcentrationReport> run_concentration_experiment(
    const ExperimentConfig& cfg);
std::string concentration_csv(const std::vector<ConcentrationReport>& runs);

struct BoundsPerN {
  BoundReport report;
  BoundValue value;
  // empirical check of the three high-probability events over cfg.reps
  int reps = 0;
  int converged = 0;
  double freq_bound = 0.0;
  double freq_alpha_radius = 0.0;
  double freq_f_radius = 0.0;
  double mean_excess = 0.0;
};

struct BoundsResult {
  std::vector<BoundsPerN> per_n;
};

BoundsResult run_bounds_experiment(const ExperimentConfig& cfg);
std::string bounds_json(const BoundsResult& result,
                        const ExperimentConfig& cfg);

LowerBoundCert run_minimax_experiment(const ExperimentConfig& cfg);
std::string minimax_json(const LowerBoundCert& cert,
                         const ExperimentConfig& cfg);

struct FitRunResult {
  int n = 0;
  PflmFit fit;
  RiskBreakdown risk;
};

FitRunResult run_fit_experiment(const ExperimentConfig& cfg);
std::string fit_json(const FitRunResult& result, const ExperimentConfig& cfg);

struct PlotSeries {
  struct Point {
    double x = 0.0;
    double y = 0.0;
    double se = 0.0;
  };
  std::string name;
  std::vector<Point> points;
};

// Recovers plottable series from a CSV this tool wrote, keyed by its
// schema line. Rate files yield one series per risk component with the
// summary means; concentration files one series per event row with a
// binomial standard error. Unknown schemas are rejected.
std::vector<PlotSeries> plot_series_from_csv(const std::string& csv_text);
std::string plot_series_text(const PlotSeries& series);

// Path of the artifact run_experiment writes for this config.
std::string artifact_path(const ExperimentConfig& cfg);

// Runs the configured experiment and writes its artifact under
// cfg.out_dir; returns the written paths.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg);

// Reads a CSV artifact and writes one <stem>_<series>.dat file per
// nonempty series next to it; returns the written paths (empty, with a
// warning on err, when there is nothing to plot).
std::vector<std::string> emit_plot_data(const std::string& csv_path,
                                        const std::string& out_dir,
                                        std::ostream& err);

// Full command-line front end (subcommands fit/rate/concentration/bounds/
// minimax/plotdata). Returns the process exit code: 0 success, 1 runtime
// failure, 2 configuration or usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace pflm
