#include "pflm/experiments.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>

#include "pflm/errors.hpp"
#include "pflm/parallel.hpp"
#include "pflm/rng.hpp"

namespace pflm {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kRateSchema = "# pflm rate 1";
constexpr const char* kConcSchema = "# pflm concentration 1";
constexpr const char* kRateHeader =
    "n,p,rep,lambda,excess_risk,alpha_part,functional_part,alpha_err,"
    "tfhalf_err,seed";
constexpr const char* kSummaryHeader =
    "n,lambda,reps,excluded,excess_risk_mean,excess_risk_se,alpha_part_mean,"
    "alpha_part_se,functional_part_mean,functional_part_se,alpha_err_mean,"
    "alpha_err_se,tfhalf_err_mean,tfhalf_err_se";
constexpr const char* kConcHeader = "lemma,n,reps,delta,frequency,threshold";

// Round-trip decimal formatting; "na" stands for NaN so CSV consumers never
// see a platform-dependent nan spelling.
std::string fmt(double v) {
  if (std::isnan(v)) return "na";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_number(const std::string& token) {
  if (token == "na") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(token, &used);
  if (used != token.size())
    throw InvalidArgument("malformed numeric field '" + token + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

// ---------------------------------------------------------------------------
// config parsing

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Strict view of one JSON object: every key must be consumed exactly once,
// and type mismatches are reported with the full field path.
class ObjectReader {
 public:
  ObjectReader(const ojson& obj, std::string path)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object())
      throw ConfigError(path_ + ": expected a JSON object");
  }

  const ojson* take(const char* key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  T get(const char* key, T fallback) {
    const ojson* v = take(key);
    return v == nullptr ? fallback : as<T>(*v, key);
  }

  template <typename T>
  T require(const char* key) {
    const ojson* v = take(key);
    if (v == nullptr)
      throw ConfigError(path_ + ": missing required field '" + key + "'");
    return as<T>(*v, key);
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (used_.find(item.key()) == used_.end())
        throw ConfigError(path_ + ": unknown field '" + item.key() + "'");
  }

  std::string field(const char* key) const { return path_ + "." + key; }

  template <typename T>
  T as(const ojson& v, const char* key) const {
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field(key) + ": wrong JSON type (" +
                        std::string(v.type_name()) + ")");
    }
  }

 private:
  const ojson& obj_;
  std::string path_;
  std::set<std::string> used_;
};

Eigen::VectorXd number_array(const ojson& v, const std::string& where) {
  if (!v.is_array())
    throw ConfigError(where + ": expected an array of numbers");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError(where + "[" + std::to_string(i) + "]: not a number");
    out[static_cast<int>(i)] = v[i].get<double>();
  }
  return out;
}

KernelSpec parse_kernel(const ojson& v, const std::string& where) {
  ObjectReader r(v, where);
  const std::string type = r.require<std::string>("type");
  KernelSpec kernel;
  if (type == "synthetic") {
    SyntheticSpectrum s;
    s.scale = r.get<double>("scale", s.scale);
    s.exponent = r.get<double>("exponent", s.exponent);
    s.modes = r.get<int>("modes", s.modes);
    kernel = s;
  } else if (type == "brownian") {
    kernel = BrownianKernel{};
  } else if (type == "gaussian") {
    GaussianKernel g;
    g.length_scale = r.get<double>("length_scale", g.length_scale);
    kernel = g;
  } else {
    throw ConfigError(where +
                      ".type: expected synthetic, brownian or gaussian, got '" +
                      type + "'");
  }
  r.finish();
  return kernel;
}

Eigen::VectorXd parse_mu(const ojson& v, const std::string& where) {
  if (v.is_array()) return number_array(v, where);
  ObjectReader r(v, where);
  const int count = r.require<int>("count");
  const double decay = r.require<double>("decay");
  const double scale = r.get<double>("scale", 1.0);
  if (count < 1) throw ConfigError(where + ".count: must be >= 1");
  if (!(decay > 0.0)) throw ConfigError(where + ".decay: must be > 0");
  if (!(scale > 0.0)) throw ConfigError(where + ".scale: must be > 0");
  r.finish();
  Eigen::VectorXd mu(count);
  for (int k = 1; k <= count; ++k)
    mu[k - 1] = scale * std::pow(static_cast<double>(k), -decay);
  return mu;
}

ModelSpec parse_model(const ojson& v, const std::string& where) {
  ObjectReader r(v, where);
  ModelSpec model;
  if (const ojson* a = r.take("alpha0"))
    model.alpha0 = number_array(*a, r.field("alpha0"));
  if (const ojson* f = r.take("f0_coeffs"))
    model.f0_coeffs = number_array(*f, r.field("f0_coeffs"));
  if (const ojson* k = r.take("kernel"))
    model.kernel = parse_kernel(*k, r.field("kernel"));
  if (const ojson* m = r.take("mu")) model.mu = parse_mu(*m, r.field("mu"));
  model.laplace_scale = r.get<double>("laplace_scale", model.laplace_scale);
  model.sigma = r.get<double>("sigma", model.sigma);
  const std::string noise = r.get<std::string>("noise", "gaussian");
  if (noise == "gaussian") {
    model.noise = NoiseKind::gaussian;
  } else if (noise == "bounded") {
    model.noise = NoiseKind::bounded;
  } else {
    throw ConfigError(r.field("noise") + ": expected gaussian or bounded");
  }
  r.finish();
  return model;
}

void parse_bound(const ojson& v, const std::string& where,
                 ExperimentConfig& cfg) {
  ObjectReader r(v, where);
  BoundConfig& b = cfg.bound;
  b.delta1 = r.get<double>("delta1", b.delta1);
  b.delta2 = r.get<double>("delta2", b.delta2);
  b.delta3 = r.get<double>("delta3", b.delta3);
  b.delta4 = r.get<double>("delta4", b.delta4);
  b.delta5 = r.get<double>("delta5", b.delta5);
  b.omega = r.get<double>("omega", b.omega);
  b.theta = r.get<double>("theta", b.theta);
  if (const ojson* c = r.take("c_eff")) {
    if (c->is_string() && c->get<std::string>() == "fit") {
      cfg.fit_c_eff = true;
    } else if (c->is_number()) {
      b.c_eff = c->get<double>();
    } else {
      throw ConfigError(r.field("c_eff") + ": expected a number or \"fit\"");
    }
  }
  r.finish();
}

MinimaxParams parse_minimax(const ojson& v, const std::string& where) {
  ObjectReader r(v, where);
  MinimaxParams mm;
  mm.n = r.get<int>("n", mm.n);
  mm.r = r.get<double>("r", mm.r);
  mm.b1 = r.get<double>("b1", mm.b1);
  mm.b2 = r.get<double>("b2", mm.b2);
  mm.sigma2 = r.get<double>("sigma2", mm.sigma2);
  mm.rho = r.get<double>("rho", mm.rho);
  r.finish();
  return mm;
}

// Mirrors the lower_bound preconditions so an invalid certificate request
// fails at config-load time (exit code 2), not at run time.
void check_minimax(const MinimaxParams& mm) {
  if (!(mm.r > 0.0)) throw ConfigError("minimax.r: must be > 0");
  if (!(mm.b1 > 0.0) || !(mm.b2 > 0.0) || !(mm.b1 <= mm.b2))
    throw ConfigError("minimax: needs 0 < b1 <= b2");
  if (!(mm.sigma2 > 0.0)) throw ConfigError("minimax.sigma2: must be > 0");
  if (!(mm.rho > 0.0 && mm.rho < 0.125))
    throw ConfigError("minimax.rho: must lie in (0, 1/8)");
  const double K = 0.5 / mm.sigma2;
  const double n_floor = mm.rho * std::log(2.0) / (8.0 * mm.b2 * K);
  if (mm.n < 1 || static_cast<double>(mm.n) < n_floor)
    throw ConfigError("minimax.n: must be >= rho log2 / (8 b2 K_sigma2) = " +
                      fmt(n_floor));
}

ExperimentKind parse_kind(const std::string& name) {
  if (name == "fit") return ExperimentKind::fit;
  if (name == "rate") return ExperimentKind::rate;
  if (name == "concentration") return ExperimentKind::concentration;
  if (name == "bounds") return ExperimentKind::bounds;
  if (name == "minimax") return ExperimentKind::minimax;
  throw ConfigError(
      "kind: expected fit, rate, concentration, bounds or minimax, got '" +
      name + "'");
}

}  // namespace

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::fit: return "fit";
    case ExperimentKind::rate: return "rate";
    case ExperimentKind::concentration: return "concentration";
    case ExperimentKind::bounds: return "bounds";
    case ExperimentKind::minimax: return "minimax";
  }
  throw InvalidArgument("kind_name: unknown experiment kind");
}

ExperimentConfig parse_config(const std::string& text,
                              const std::string& source_name) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    throw ConfigError(source_name + ":" + std::to_string(line) + ":" +
                      std::to_string(col) + ": " + e.what());
  }
  ObjectReader r(root, source_name);

  const int schema = r.get<int>("schema_version", 1);
  if (schema != 1)
    throw ConfigError(source_name + ".schema_version: unsupported version " +
                      std::to_string(schema));

  ExperimentConfig cfg;
  cfg.kind = parse_kind(r.require<std::string>("kind"));
  cfg.seed = r.get<std::uint64_t>("seed", 0);
  cfg.workers = r.get<int>("workers", 1);
  cfg.out_dir = r.get<std::string>("out", ".");
  cfg.reps = r.get<int>("reps", 1);

  if (const ojson* g = r.take("grid")) {
    ObjectReader gr(*g, r.field("grid"));
    cfg.grid_a = gr.get<double>("a", cfg.grid_a);
    cfg.grid_b = gr.get<double>("b", cfg.grid_b);
    cfg.grid_m = gr.get<int>("m", cfg.grid_m);
    gr.finish();
  }
  if (const ojson* ng = r.take("n_grid")) {
    if (!ng->is_array()) throw ConfigError(r.field("n_grid") + ": expected an array");
    for (const auto& v : *ng) {
      if (!v.is_number_integer())
        throw ConfigError(r.field("n_grid") + ": entries must be integers");
      cfg.n_grid.push_back(v.get<int>());
    }
  }
  if (const ojson* l = r.take("lambda")) {
    if (!l->is_number())
      throw ConfigError(r.field("lambda") + ": expected a number");
    cfg.lambda_override = l->get<double>();
  }
  if (const ojson* m = r.take("model"))
    cfg.model = parse_model(*m, r.field("model"));
  if (const ojson* b = r.take("bound")) parse_bound(*b, r.field("bound"), cfg);
  if (const ojson* mm = r.take("minimax"))
    cfg.minimax = parse_minimax(*mm, r.field("minimax"));
  r.finish();

  // semantic validation: every invalid configuration must be caught here so
  // the CLI can map it to exit code 2
  if (cfg.reps < 1) throw ConfigError("reps: must be >= 1");
  if (cfg.kind == ExperimentKind::concentration && cfg.reps < 100)
    throw ConfigError("reps: concentration suites need reps >= 100");
  if (cfg.workers < 1) throw ConfigError("workers: must be >= 1");
  if (cfg.lambda_override && !(*cfg.lambda_override >= 0.0))
    throw ConfigError("lambda: must be >= 0");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 1) throw ConfigError("n_grid: entries must be >= 1");
    if (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1])
      throw ConfigError("n_grid: must be strictly increasing");
  }
  if (cfg.kind != ExperimentKind::minimax && cfg.n_grid.empty())
    throw ConfigError("n_grid: required and non-empty for kind '" +
                      std::string(kind_name(cfg.kind)) + "'");
  try {
    make_uniform_grid(cfg.grid_a, cfg.grid_b, cfg.grid_m);
  } catch (const Error& e) {
    throw ConfigError("grid: " + std::string(e.what()));
  }
  try {
    validate_model(cfg.model);
  } catch (const Error& e) {
    throw ConfigError("model: " + std::string(e.what()));
  }
  // discrete cosine orthogonality needs every used mode below m-1
  int modes = static_cast<int>(
      std::max(cfg.model.mu.size(), cfg.model.f0_coeffs.size()));
  if (const auto* syn = std::get_if<SyntheticSpectrum>(&cfg.model.kernel))
    modes = std::max(modes, syn->modes);
  if (modes > cfg.grid_m - 2)
    throw ConfigError("grid.m: too coarse for the model's basis modes (need m >= " +
                      std::to_string(modes + 2) + ")");
  try {
    validate_bound_config(cfg.bound);
  } catch (const Error& e) {
    throw ConfigError("bound: " + std::string(e.what()));
  }
  if (cfg.kind == ExperimentKind::minimax) check_minimax(cfg.minimax);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

// ---------------------------------------------------------------------------
// experiment drivers

namespace {

struct Resolved {
  GridPtr grid;
  PopulationOps pop;
  BoundConfig bound;
};

Resolved resolve(const ExperimentConfig& cfg) {
  Resolved res;
  res.grid = make_uniform_grid(cfg.grid_a, cfg.grid_b, cfg.grid_m);
  res.pop = population_operators(cfg.model, res.grid);
  res.bound = cfg.bound;
  if (cfg.fit_c_eff) res.bound.c_eff = fit_c_eff(res.pop.T, res.bound.theta);
  return res;
}

double lambda_for(const ExperimentConfig& cfg, int n) {
  return cfg.lambda_override
             ? *cfg.lambda_override
             : lambda_schedule(cfg.bound.omega, cfg.bound.theta, n);
}

void require_kind(const ExperimentConfig& cfg, ExperimentKind kind,
                  const char* who) {
  if (cfg.kind != kind)
    throw InvalidArgument(std::string(who) + ": config kind is '" +
                          kind_name(cfg.kind) + "', expected '" +
                          kind_name(kind) + "'");
}

struct Stat {
  double mean = 0.0;
  double se = 0.0;
};

Stat mean_se(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.se = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                     static_cast<double>(xs.size()));
  }
  return s;
}

double loglog_slope(const std::vector<double>& xs,
                    const std::vector<double>& ys) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::isfinite(ys[i]) && ys[i] > 0.0) {
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
    }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(lx.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

}  // namespace

RateResult run_rate_experiment(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::rate, "run_rate_experiment");
  const Resolved res = resolve(cfg);

  RateResult out;
  std::vector<double> ns;
  std::vector<double> m_excess, m_alpha_part, m_functional, m_alpha_err,
      m_tfhalf;
  for (const int n : cfg.n_grid) {
    const double lambda = lambda_for(cfg, n);
    std::vector<RateRow> slot(cfg.reps);
    parallel_for_index(cfg.reps, cfg.workers, [&](int rep) {
      RateRow row;
      row.n = n;
      row.p = cfg.model.p();
      row.rep = rep;
      row.lambda = lambda;
      row.dataset_seed = mix_key(cfg.seed, static_cast<std::uint64_t>(rep),
                                 static_cast<std::uint64_t>(Role::instance));
      const Dataset data = gen_dataset(cfg.model, res.pop, n, row.dataset_seed);
      const PflmFit fit = fit_joint(data, res.pop.Khalf, lambda);
      row.residual = fit.residual;
      row.converged = fit.residual <= 1e-6;
      row.risk = excess_risk(fit, cfg.model, res.pop);
      slot[rep] = std::move(row);
    });

    RateSummary s;
    s.n = n;
    s.lambda = lambda;
    std::vector<double> excess, alpha_part, functional, alpha_err, tfhalf;
    for (RateRow& row : slot) {
      if (row.converged) {
        excess.push_back(row.risk.total);
        alpha_part.push_back(row.risk.alpha_part);
        functional.push_back(row.risk.functional_part);
        alpha_err.push_back(row.risk.alpha_err);
        tfhalf.push_back(row.risk.tfhalf_err);
      } else {
        ++s.excluded;
        ++out.unconverged;
      }
      out.rows.push_back(std::move(row));
    }
    s.converged = static_cast<int>(excess.size());
    if (s.converged == 0) continue;  // nothing to summarize at this n
    const Stat e = mean_se(excess), a = mean_se(alpha_part),
               f = mean_se(functional), ae = mean_se(alpha_err),
               t = mean_se(tfhalf);
    s.excess_mean = e.mean;
    s.excess_se = e.se;
    s.alpha_part_mean = a.mean;
    s.alpha_part_se = a.se;
    s.functional_mean = f.mean;
    s.functional_se = f.se;
    s.alpha_err_mean = ae.mean;
    s.alpha_err_se = ae.se;
    s.tfhalf_mean = t.mean;
    s.tfhalf_se = t.se;
    out.summary.push_back(s);
    ns.push_back(static_cast<double>(n));
    m_excess.push_back(e.mean);
    m_alpha_part.push_back(a.mean);
    m_functional.push_back(f.mean);
    m_alpha_err.push_back(ae.mean);
    m_tfhalf.push_back(t.mean);
  }
  out.slopes.excess_risk = loglog_slope(ns, m_excess);
  out.slopes.alpha_part = loglog_slope(ns, m_alpha_part);
  out.slopes.functional_part = loglog_slope(ns, m_functional);
  out.slopes.alpha_err = loglog_slope(ns, m_alpha_err);
  out.slopes.tfhalf_err = loglog_slope(ns, m_tfhalf);
  return out;
}

std::string rate_csv(const RateResult& result) {
  std::ostringstream out;
  out << kRateSchema << "\n" << kRateHeader << "\n";
  for (const RateRow& row : result.rows) {
    if (!row.converged) continue;  // excluded; counted in the summary
    out << row.n << ',' << row.p << ',' << row.rep << ',' << fmt(row.lambda)
        << ',' << fmt(row.risk.total) << ',' << fmt(row.risk.alpha_part)
        << ',' << fmt(row.risk.functional_part) << ','
        << fmt(row.risk.alpha_err) << ',' << fmt(row.risk.tfhalf_err) << ','
        << row.dataset_seed << "\n";
  }
  out << "# summary\n" << kSummaryHeader << "\n";
  for (const RateSummary& s : result.summary) {
    out << s.n << ',' << fmt(s.lambda) << ',' << s.converged << ','
        << s.excluded << ',' << fmt(s.excess_mean) << ',' << fmt(s.excess_se)
        << ',' << fmt(s.alpha_part_mean) << ',' << fmt(s.alpha_part_se) << ','
        << fmt(s.functional_mean) << ',' << fmt(s.functional_se) << ','
        << fmt(s.alpha_err_mean) << ',' << fmt(s.alpha_err_se) << ','
        << fmt(s.tfhalf_mean) << ',' << fmt(s.tfhalf_se) << "\n";
  }
  out << "# slopes\nseries,slope\n";
  out << "excess_risk," << fmt(result.slopes.excess_risk) << "\n";
  out << "alpha_part," << fmt(result.slopes.alpha_part) << "\n";
  out << "functional_part," << fmt(result.slopes.functional_part) << "\n";
  out << "alpha_err," << fmt(result.slopes.alpha_err) << "\n";
  out << "tfhalf_err," << fmt(result.slopes.tfhalf_err) << "\n";
  return out.str();
}

std::vector<ConcentrationReport> run_concentration_experiment(
    const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::concentration,
               "run_concentration_experiment");
  const Resolved res = resolve(cfg);
  std::vector<ConcentrationReport> runs;
  runs.reserve(cfg.n_grid.size());
  for (const int n : cfg.n_grid)
    runs.push_back(concentration_suite(cfg.model, res.grid, n, cfg.reps,
                                       res.bound, cfg.seed, cfg.workers));
  return runs;
}

std::string concentration_csv(const std::vector<ConcentrationReport>& runs) {
  std::ostringstream out;
  out << kConcSchema << "\n";
  const double n1 = runs.empty()
                        ? std::numeric_limits<double>::quiet_NaN()
                        : runs.front().n1;
  bool all_held = true;
  for (const auto& run : runs) all_held = all_held && run.inequalities_all_held;
  out << "# n1 " << fmt(n1) << "\n";
  out << "# inequalities_all_held " << (all_held ? "true" : "false") << "\n";
  out << kConcHeader << "\n";
  for (const auto& run : runs)
    for (const SuiteRow& row : run.rows)
      out << row.lemma << ',' << row.n << ',' << row.reps << ','
          << fmt(row.delta) << ',' << fmt(row.frequency) << ','
          << fmt(row.threshold) << "\n";
  return out.str();
}

BoundsResult run_bounds_experiment(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::bounds, "run_bounds_experiment");
  const Resolved res = resolve(cfg);

  BoundsResult out;
  for (const int n : cfg.n_grid) {
    BoundsPerN per;
    per.report =
        bound_constants(res.bound, cfg.model, res.pop, res.pop.f0_norm, n);
    per.value = bound_value(per.report, n);
    per.reps = cfg.reps;

    struct Obs {
      bool converged = false;
      double excess = 0.0;
      double alpha_err = 0.0;
      double tfhalf_err = 0.0;
    };
    std::vector<Obs> slot(cfg.reps);
    parallel_for_index(cfg.reps, cfg.workers, [&](int rep) {
      const std::uint64_t seed =
          mix_key(cfg.seed, static_cast<std::uint64_t>(rep),
                  static_cast<std::uint64_t>(Role::instance));
      const Dataset data = gen_dataset(cfg.model, res.pop, n, seed);
      const PflmFit fit =
          fit_joint(data, res.pop.Khalf, per.report.lambda_n);
      Obs obs;
      obs.converged = fit.residual <= 1e-6;
      const RiskBreakdown risk = excess_risk(fit, cfg.model, res.pop);
      obs.excess = risk.total;
      obs.alpha_err = risk.alpha_err;
      obs.tfhalf_err = risk.tfhalf_err;
      slot[rep] = obs;
    });

    int held_bound = 0, held_alpha = 0, held_f = 0;
    double excess_sum = 0.0;
    for (const Obs& obs : slot) {
      if (!obs.converged) continue;
      ++per.converged;
      excess_sum += obs.excess;
      if (obs.excess <= per.value.bound) ++held_bound;
      if (obs.alpha_err <= per.value.alpha_radius) ++held_alpha;
      if (obs.tfhalf_err <= per.value.f_radius) ++held_f;
    }
    const double c = static_cast<double>(per.converged);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    per.freq_bound = per.converged ? held_bound / c : nan;
    per.freq_alpha_radius = per.converged ? held_alpha / c : nan;
    per.freq_f_radius = per.converged ? held_f / c : nan;
    per.mean_excess = per.converged ? excess_sum / c : nan;
    out.per_n.push_back(std::move(per));
  }
  return out;
}

LowerBoundCert run_minimax_experiment(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::minimax, "run_minimax_experiment");
  const MinimaxParams& mm = cfg.minimax;
  return lower_bound(mm.n, mm.r, mm.b1, mm.b2, mm.sigma2, mm.rho, cfg.seed);
}

FitRunResult run_fit_experiment(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::fit, "run_fit_experiment");
  const Resolved res = resolve(cfg);
  FitRunResult out;
  out.n = cfg.n_grid.front();
  const std::uint64_t seed =
      mix_key(cfg.seed, 0, static_cast<std::uint64_t>(Role::instance));
  const Dataset data = gen_dataset(cfg.model, res.pop, out.n, seed);
  out.fit = fit_joint(data, res.pop.Khalf, lambda_for(cfg, out.n));
  out.risk = excess_risk(out.fit, cfg.model, res.pop);
  return out;
}

// ---------------------------------------------------------------------------
// reports

namespace {

ojson json_vector(const Eigen::VectorXd& v) {
  ojson arr = ojson::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string bounds_json(const BoundsResult& result,
                        const ExperimentConfig& cfg) {
  if (result.per_n.empty())
    throw InvalidArgument("bounds_json: empty result");
  const BoundReport& base = result.per_n.front().report;
  ojson j;
  j["schema_version"] = 1;
  j["kind"] = "bounds";
  j["seed"] = cfg.seed;
  j["p"] = base.p;
  j["theta"] = base.theta;
  j["omega"] = base.omega;
  j["c_eff"] = base.c_eff;
  j["kappa"] = base.kappa;
  j["lambda_max"] = base.lambda_max;
  j["f0_norm"] = base.f0_norm;
  j["sigma"] = base.sigma;
  j["delta_sum"] = base.delta_sum;
  ojson c;
  c["c1"] = base.c1;
  c["c2"] = base.c2;
  c["c3"] = base.c3;
  c["c4"] = base.c4;
  c["c5"] = base.c5;
  c["c6"] = base.c6;
  c["c7"] = base.c7;
  c["c8"] = base.c8;
  c["c9"] = base.c9;
  c["C1"] = base.C1;
  c["C2"] = base.C2;
  c["C3"] = base.C3;
  j["constants"] = std::move(c);
  j["N1"] = base.N1;
  j["N2_printed"] = base.N2_printed;
  j["N2_proof"] = base.N2_proof;
  j["n0"] = base.n0;
  ojson per = ojson::array();
  for (const BoundsPerN& row : result.per_n) {
    ojson e;
    e["n"] = row.report.n;
    e["lambda_n"] = row.report.lambda_n;
    e["eff_dim"] = row.report.eff_dim;
    e["B_n"] = row.report.B_n;
    e["bound"] = row.value.bound;
    e["alpha_radius"] = row.value.alpha_radius;
    e["f_radius"] = row.value.f_radius;
    e["below_n0"] = row.value.below_n0;
    ojson v;
    v["reps"] = row.reps;
    v["converged"] = row.converged;
    v["freq_bound"] = row.freq_bound;
    v["freq_alpha_radius"] = row.freq_alpha_radius;
    v["freq_f_radius"] = row.freq_f_radius;
    v["mean_excess"] = row.mean_excess;
    e["validation"] = std::move(v);
    per.push_back(std::move(e));
  }
  j["per_n"] = std::move(per);
  return dump(j);
}

std::string minimax_json(const LowerBoundCert& cert,
                         const ExperimentConfig& cfg) {
  ojson j;
  j["schema_version"] = 1;
  j["kind"] = "minimax";
  j["seed"] = cfg.seed;
  j["r"] = cert.r;
  j["b1"] = cert.b1;
  j["b2"] = cert.b2;
  j["sigma2"] = cert.sigma2;
  j["K_sigma2"] = cert.K_sigma2;
  j["rho"] = cert.rho;
  j["n"] = cert.n;
  j["M"] = cert.M;
  j["N"] = cert.N;
  j["min_hamming"] = cert.min_hamming;
  j["kl_budget_lhs"] = cert.kl_budget_lhs;
  j["kl_budget_rhs"] = cert.kl_budget_rhs;
  j["kl_budget_ok"] = cert.kl_budget_ok;
  j["separation"] = cert.separation;
  j["lower_bound"] = cert.lower_bound;
  j["probability_floor"] = cert.probability_floor;
  return dump(j);
}

std::string fit_json(const FitRunResult& result, const ExperimentConfig& cfg) {
  ojson j;
  j["schema_version"] = 1;
  j["kind"] = "fit";
  j["seed"] = cfg.seed;
  j["n"] = result.n;
  j["p"] = cfg.model.p();
  ojson g;
  g["a"] = cfg.grid_a;
  g["b"] = cfg.grid_b;
  g["m"] = cfg.grid_m;
  j["grid"] = std::move(g);
  j["lambda"] = result.fit.lambda;
  j["solver"] = result.fit.solver == SolverTag::joint ? "joint" : "coupled";
  j["residual"] = result.fit.residual;
  j["converged"] = result.fit.residual <= 1e-6;
  j["alpha_hat"] = json_vector(result.fit.alpha_hat);
  ojson risk;
  risk["total"] = result.risk.total;
  risk["alpha_part"] = result.risk.alpha_part;
  risk["functional_part"] = result.risk.functional_part;
  risk["alpha_err"] = result.risk.alpha_err;
  risk["tfhalf_err"] = result.risk.tfhalf_err;
  risk["upper_bound"] = result.risk.upper_bound;
  j["excess_risk"] = std::move(risk);
  j["f_hat"] = json_vector(result.fit.f_hat.values);
  j["beta_hat"] = json_vector(result.fit.beta_hat.values);
  return dump(j);
}

// ---------------------------------------------------------------------------
// plot data

namespace {

std::vector<PlotSeries> rate_plot_series(const std::vector<std::string>& lines) {
  std::size_t i = 0;
  while (i < lines.size() && lines[i] != "# summary") ++i;
  if (i == lines.size() || i + 1 >= lines.size() ||
      lines[i + 1] != kSummaryHeader)
    throw InvalidArgument("rate CSV: missing or unrecognized summary section");
  i += 2;

  const char* names[5] = {"excess_risk", "alpha_part", "functional_part",
                          "alpha_err", "tfhalf_err"};
  std::vector<PlotSeries> series(5);
  for (int s = 0; s < 5; ++s) series[s].name = names[s];
  for (; i < lines.size() && !lines[i].empty() && lines[i][0] != '#'; ++i) {
    const std::vector<std::string> cols = split(lines[i], ',');
    if (cols.size() != 14)
      throw InvalidArgument("rate CSV: summary row with " +
                            std::to_string(cols.size()) + " columns");
    const double x = parse_number(cols[0]);
    for (int s = 0; s < 5; ++s) {
      const double y = parse_number(cols[4 + 2 * s]);
      const double se = parse_number(cols[5 + 2 * s]);
      if (std::isfinite(y)) series[s].points.push_back({x, y, se});
    }
  }
  return series;
}

std::vector<PlotSeries> concentration_plot_series(
    const std::vector<std::string>& lines) {
  std::size_t i = 1;
  while (i < lines.size() && !lines[i].empty() && lines[i][0] == '#') ++i;
  if (i == lines.size() || lines[i] != kConcHeader)
    throw InvalidArgument("concentration CSV: unrecognized header");
  ++i;

  std::vector<PlotSeries> series;
  for (; i < lines.size() && !lines[i].empty(); ++i) {
    const std::vector<std::string> cols = split(lines[i], ',');
    if (cols.size() != 6)
      throw InvalidArgument("concentration CSV: row with " +
                            std::to_string(cols.size()) + " columns");
    const double freq = parse_number(cols[4]);
    if (!std::isfinite(freq)) continue;  // not applicable at this n
    const double n = parse_number(cols[1]);
    const double reps = parse_number(cols[2]);
    const double se =
        reps > 0.0 ? std::sqrt(std::max(0.0, freq * (1.0 - freq) / reps))
                   : 0.0;
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const PlotSeries& s) { return s.name == cols[0]; });
    if (it == series.end()) {
      series.push_back(PlotSeries{cols[0], {}});
      it = series.end() - 1;
    }
    it->points.push_back({n, freq, se});
  }
  return series;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
      c = '_';
  return out;
}

}  // namespace

std::vector<PlotSeries> plot_series_from_csv(const std::string& csv_text) {
  const std::vector<std::string> lines = split_lines(csv_text);
  if (lines.empty())
    throw InvalidArgument("plot data: empty input");
  if (lines[0] == kRateSchema) return rate_plot_series(lines);
  if (lines[0] == kConcSchema) return concentration_plot_series(lines);
  throw InvalidArgument(
      "plot data: unknown CSV schema (first line is not a pflm schema tag)");
}

std::string plot_series_text(const PlotSeries& series) {
  std::ostringstream out;
  out << "# " << series.name << ": x y se\n";
  for (const PlotSeries::Point& pt : series.points)
    out << fmt(pt.x) << ' ' << fmt(pt.y) << ' ' << fmt(pt.se) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// artifact plumbing

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string artifact_path(const ExperimentConfig& cfg) {
  const bool csv = cfg.kind == ExperimentKind::rate ||
                   cfg.kind == ExperimentKind::concentration;
  const std::filesystem::path dir(cfg.out_dir);
  return (dir / (std::string(kind_name(cfg.kind)) + (csv ? ".csv" : ".json")))
      .string();
}

std::vector<std::string> run_experiment(const ExperimentConfig& cfg) {
  std::string content;
  switch (cfg.kind) {
    case ExperimentKind::rate:
      content = rate_csv(run_rate_experiment(cfg));
      break;
    case ExperimentKind::concentration:
      content = concentration_csv(run_concentration_experiment(cfg));
      break;
    case ExperimentKind::bounds:
      content = bounds_json(run_bounds_experiment(cfg), cfg);
      break;
    case ExperimentKind::minimax:
      content = minimax_json(run_minimax_experiment(cfg), cfg);
      break;
    case ExperimentKind::fit:
      content = fit_json(run_fit_experiment(cfg), cfg);
      break;
  }
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = artifact_path(cfg);
  write_file(path, content);
  return {path};
}

std::vector<std::string> emit_plot_data(const std::string& csv_path,
                                        const std::string& out_dir,
                                        std::ostream& err) {
  const std::string text = read_file(csv_path);
  const std::vector<std::string> lines = split_lines(text);
  const std::vector<PlotSeries> series = plot_series_from_csv(text);
  // schema tag doubles as the output stem
  const std::vector<std::string> tag = split(lines[0], ' ');
  const std::string stem = tag.size() > 2 ? tag[2] : "series";

  bool any = false;
  for (const PlotSeries& s : series) any = any || !s.points.empty();
  if (!any) {
    err << "warning: no plottable rows in " << csv_path << "\n";
    return {};
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const PlotSeries& s : series) {
    if (s.points.empty()) continue;
    const std::filesystem::path path =
        std::filesystem::path(out_dir) / (stem + "_" + sanitize(s.name) + ".dat");
    write_file(path.string(), plot_series_text(s));
    written.push_back(path.string());
  }
  return written;
}

// ---------------------------------------------------------------------------
// command line

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"partially functional linear model experiment harness"};
  app.name("pflm");
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
  };
  const char* names[6] = {"fit",    "rate",    "concentration",
                          "bounds", "minimax", "plotdata"};
  const char* descs[6] = {
      "fit one synthetic dataset and report the estimate",
      "excess-risk decay over an n-grid",
      "concentration-event frequency suite",
      "risk-bound constants with empirical validation",
      "minimax lower-bound certificate",
      "emit plot-ready series from a CSV artifact"};
  std::array<SubArgs, 6> sub_args;
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", sub_args[i].config,
                    "experiment config JSON path")
        ->required();
    sub->add_option("--seed", sub_args[i].seed, "override the config seed");
    sub->add_option("--out", sub_args[i].out_dir,
                    "override the config output directory");
    sub->add_option("--workers", sub_args[i].workers,
                    "override the config worker count");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  int which = 0;
  for (int i = 0; i < 6; ++i)
    if (app.get_subcommand(names[i])->parsed()) which = i;
  const SubArgs& sa = sub_args[which];
  const std::string sub_name = names[which];

  try {
    ExperimentConfig cfg = load_config(sa.config);
    if (sa.seed) cfg.seed = *sa.seed;
    if (sa.out_dir) cfg.out_dir = *sa.out_dir;
    if (sa.workers) {
      if (*sa.workers < 1) throw ConfigError("--workers: must be >= 1");
      cfg.workers = *sa.workers;
    }

    std::vector<std::string> written;
    if (sub_name == "plotdata") {
      if (cfg.kind != ExperimentKind::rate &&
          cfg.kind != ExperimentKind::concentration)
        throw ConfigError("plotdata needs a rate or concentration config, "
                          "got kind '" +
                          std::string(kind_name(cfg.kind)) + "'");
      written = emit_plot_data(artifact_path(cfg), cfg.out_dir, err);
    } else {
      if (sub_name != kind_name(cfg.kind))
        throw ConfigError("config kind '" +
                          std::string(kind_name(cfg.kind)) +
                          "' does not match subcommand '" + sub_name + "'");
      written = run_experiment(cfg);
    }
    for (const std::string& path : written) out << "wrote " << path << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pflm
