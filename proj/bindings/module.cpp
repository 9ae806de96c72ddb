#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "pflm/experiments.hpp"

namespace py = pybind11;
using namespace pflm;

namespace {

// Thin wrappers: GridPtr is a shared_ptr-to-const, which pybind11 cannot
// hold directly, and the python surface wants plain arrays anyway.
struct PyGrid {
  GridPtr g;
};

struct PyDataset {
  Dataset data;
};

struct PyFit {
  PflmFit fit;
};

struct PyPopulation {
  ModelSpec spec;
  PyGrid grid;
  PopulationOps ops;
};

ModelSpec make_model(std::optional<Eigen::VectorXd> alpha0,
                     std::optional<Eigen::VectorXd> f0_coeffs,
                     const std::string& kernel, double scale, double exponent,
                     int modes, double length_scale,
                     std::optional<Eigen::VectorXd> mu, double laplace_scale,
                     double sigma, const std::string& noise) {
  ModelSpec spec;
  if (alpha0) spec.alpha0 = *alpha0;
  if (f0_coeffs) spec.f0_coeffs = *f0_coeffs;
  if (kernel == "synthetic") {
    spec.kernel = SyntheticSpectrum{scale, exponent, modes};
  } else if (kernel == "brownian") {
    spec.kernel = BrownianKernel{};
  } else if (kernel == "gaussian") {
    spec.kernel = GaussianKernel{length_scale};
  } else {
    throw InvalidArgument("kernel: expected synthetic, brownian or gaussian");
  }
  if (mu) spec.mu = *mu;
  spec.laplace_scale = laplace_scale;
  spec.sigma = sigma;
  if (noise == "gaussian") {
    spec.noise = NoiseKind::gaussian;
  } else if (noise == "bounded") {
    spec.noise = NoiseKind::bounded;
  } else {
    throw InvalidArgument("noise: expected gaussian or bounded");
  }
  validate_model(spec);
  return spec;
}

py::dict risk_dict(const RiskBreakdown& r) {
  py::dict d;
  d["total"] = r.total;
  d["alpha_part"] = r.alpha_part;
  d["functional_part"] = r.functional_part;
  d["upper_bound"] = r.upper_bound;
  d["alpha_err"] = r.alpha_err;
  d["tfhalf_err"] = r.tfhalf_err;
  return d;
}

py::dict report_dict(const BoundReport& r, const BoundValue& v) {
  py::dict d;
  d["c1"] = r.c1;
  d["c2"] = r.c2;
  d["c3"] = r.c3;
  d["c4"] = r.c4;
  d["c5"] = r.c5;
  d["c6"] = r.c6;
  d["c7"] = r.c7;
  d["c8"] = r.c8;
  d["c9"] = r.c9;
  d["C1"] = r.C1;
  d["C2"] = r.C2;
  d["C3"] = r.C3;
  d["N1"] = r.N1;
  d["N2_printed"] = r.N2_printed;
  d["N2_proof"] = r.N2_proof;
  d["n0"] = r.n0;
  d["lambda_n"] = r.lambda_n;
  d["eff_dim"] = r.eff_dim;
  d["B_n"] = r.B_n;
  d["kappa"] = r.kappa;
  d["theta"] = r.theta;
  d["omega"] = r.omega;
  d["c_eff"] = r.c_eff;
  d["f0_norm"] = r.f0_norm;
  d["sigma"] = r.sigma;
  d["delta_sum"] = r.delta_sum;
  d["p"] = r.p;
  d["n"] = r.n;
  d["bound"] = v.bound;
  d["alpha_radius"] = v.alpha_radius;
  d["f_radius"] = v.f_radius;
  d["below_n0"] = v.below_n0;
  return d;
}

py::dict cert_dict(const LowerBoundCert& c) {
  py::dict d;
  d["r"] = c.r;
  d["b1"] = c.b1;
  d["b2"] = c.b2;
  d["sigma2"] = c.sigma2;
  d["K_sigma2"] = c.K_sigma2;
  d["rho"] = c.rho;
  d["n"] = c.n;
  d["M"] = c.M;
  d["N"] = c.N;
  d["min_hamming"] = c.min_hamming;
  d["kl_budget_lhs"] = c.kl_budget_lhs;
  d["kl_budget_rhs"] = c.kl_budget_rhs;
  d["kl_budget_ok"] = c.kl_budget_ok;
  d["separation"] = c.separation;
  d["lower_bound"] = c.lower_bound;
  d["probability_floor"] = c.probability_floor;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pflm, m) {
  m.doc() = "partially functional linear model: estimation, risk bounds, "
            "minimax certificates";

  py::register_exception<Error>(m, "PflmError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgumentError",
                                          PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<PyGrid>(m, "Grid")
      .def_property_readonly("a", [](const PyGrid& g) { return g.g->a(); })
      .def_property_readonly("b", [](const PyGrid& g) { return g.g->b(); })
      .def_property_readonly("size",
                             [](const PyGrid& g) { return g.g->size(); })
      .def_property_readonly("points",
                             [](const PyGrid& g) { return g.g->points(); })
      .def_property_readonly("weights",
                             [](const PyGrid& g) { return g.g->weights(); })
      .def("__len__", [](const PyGrid& g) { return g.g->size(); })
      .def("__repr__", [](const PyGrid& g) {
        return "Grid([" + std::to_string(g.g->a()) + ", " +
               std::to_string(g.g->b()) + "], m=" +
               std::to_string(g.g->size()) + ")";
      });

  m.def("make_uniform_grid",
        [](double a, double b, int n) { return PyGrid{make_uniform_grid(a, b, n)}; },
        py::arg("a") = 0.0, py::arg("b") = 1.0, py::arg("m") = 101);

  m.def("cosine_basis",
        [](int k, const PyGrid& g) { return cosine_basis(k, g.g).values; },
        py::arg("k"), py::arg("grid"));

  py::class_<ModelSpec>(m, "Model")
      .def(py::init(&make_model), py::arg("alpha0") = py::none(),
           py::arg("f0_coeffs") = py::none(), py::arg("kernel") = "synthetic",
           py::arg("scale") = 1.0, py::arg("exponent") = 2.0,
           py::arg("modes") = 50, py::arg("length_scale") = 0.25,
           py::arg("mu") = py::none(), py::arg("laplace_scale") = 1.0,
           py::arg("sigma") = 0.5, py::arg("noise") = "gaussian")
      .def_property_readonly("p", &ModelSpec::p)
      .def_readonly("alpha0", &ModelSpec::alpha0)
      .def_readonly("f0_coeffs", &ModelSpec::f0_coeffs)
      .def_readonly("mu", &ModelSpec::mu)
      .def_readonly("sigma", &ModelSpec::sigma)
      .def_readonly("laplace_scale", &ModelSpec::laplace_scale);

  py::class_<PyDataset>(m, "Dataset")
      .def_property_readonly("X",
                             [](const PyDataset& d) { return d.data.X; })
      .def_property_readonly("Y",
                             [](const PyDataset& d) { return d.data.Y; })
      .def_property_readonly("z",
                             [](const PyDataset& d) { return d.data.z; })
      .def_property_readonly("n",
                             [](const PyDataset& d) { return d.data.n(); })
      .def_property_readonly(
          "seed", [](const PyDataset& d) { return d.data.seed; });

  m.def("gen_dataset",
        [](const ModelSpec& spec, const PyGrid& grid, int n,
           std::uint64_t seed) {
          return PyDataset{gen_dataset(spec, grid.g, n, seed)};
        },
        py::arg("model"), py::arg("grid"), py::arg("n"), py::arg("seed"));

  py::class_<PyFit>(m, "Fit")
      .def_property_readonly(
          "alpha", [](const PyFit& f) { return f.fit.alpha_hat; })
      .def_property_readonly(
          "f", [](const PyFit& f) { return f.fit.f_hat.values; })
      .def_property_readonly(
          "beta", [](const PyFit& f) { return f.fit.beta_hat.values; })
      .def_property_readonly("lam",
                             [](const PyFit& f) { return f.fit.lambda; })
      .def_property_readonly(
          "residual", [](const PyFit& f) { return f.fit.residual; })
      .def_property_readonly(
          "converged", [](const PyFit& f) { return f.fit.residual <= 1e-6; })
      .def_property_readonly("solver", [](const PyFit& f) {
        return f.fit.solver == SolverTag::joint ? "joint" : "coupled";
      });

  py::class_<PyPopulation>(m, "Population")
      .def(py::init([](const ModelSpec& spec, const PyGrid& grid) {
             return PyPopulation{spec, grid,
                                 population_operators(spec, grid.g)};
           }),
           py::arg("model"), py::arg("grid"))
      .def_property_readonly(
          "f0_norm", [](const PyPopulation& p) { return p.ops.f0_norm; })
      .def_property_readonly(
          "kappa", [](const PyPopulation& p) { return p.ops.kappa; })
      .def_property_readonly(
          "beta0", [](const PyPopulation& p) { return p.ops.beta0.values; })
      .def_property_readonly(
          "tau",
          [](const PyPopulation& p) { return p.ops.T.eigenvalues(); })
      .def("fit",
           [](const PyPopulation& p, const PyDataset& d, double lam) {
             return PyFit{fit_joint(d.data, p.ops.Khalf, lam)};
           },
           py::arg("data"), py::arg("lam"))
      .def("excess_risk",
           [](const PyPopulation& p, const PyFit& f) {
             return risk_dict(excess_risk(f.fit, p.spec, p.ops));
           },
           py::arg("fit"))
      .def("effective_dimension",
           [](const PyPopulation& p, double lam) {
             return effective_dimension(p.ops.T, lam);
           },
           py::arg("lam"))
      .def("bound_report",
           [](const PyPopulation& p, int n, double omega, double theta,
              std::optional<double> c_eff, double delta1, double delta2,
              double delta3, double delta4, double delta5) {
             BoundConfig cfg;
             cfg.omega = omega;
             cfg.theta = theta;
             cfg.delta1 = delta1;
             cfg.delta2 = delta2;
             cfg.delta3 = delta3;
             cfg.delta4 = delta4;
             cfg.delta5 = delta5;
             cfg.c_eff = c_eff ? *c_eff : fit_c_eff(p.ops.T, theta);
             const BoundReport report =
                 bound_constants(cfg, p.spec, p.ops, p.ops.f0_norm, n);
             return report_dict(report, bound_value(report, n));
           },
           py::arg("n"), py::arg("omega") = 1.0, py::arg("theta") = 0.25,
           py::arg("c_eff") = py::none(), py::arg("delta1") = 0.1,
           py::arg("delta2") = 0.1, py::arg("delta3") = 0.1,
           py::arg("delta4") = 0.1, py::arg("delta5") = 0.1);

  m.def("lambda_schedule", &lambda_schedule, py::arg("omega"),
        py::arg("theta"), py::arg("n"));

  m.def("effective_dimension",
        [](const Eigen::VectorXd& eigenvalues, double lam) {
          return effective_dimension(eigenvalues, lam);
        },
        py::arg("eigenvalues"), py::arg("lam"));

  m.def("theta_from_decay", &theta_from_decay, py::arg("r"));

  m.def("lower_bound",
        [](int n, double r, double b1, double b2, double sigma2, double rho,
           std::uint64_t seed) {
          return cert_dict(lower_bound(n, r, b1, b2, sigma2, rho, seed));
        },
        py::arg("n"), py::arg("r"), py::arg("b1") = 1.0, py::arg("b2") = 1.0,
        py::arg("sigma2") = 1.0, py::arg("rho") = 0.1, py::arg("seed") = 0);

  m.def("vg_packing",
        [](int M, std::uint64_t seed) {
          const Packing pack = vg_packing(M, seed);
          Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> theta(
              pack.Theta.size(), M);
          for (std::size_t i = 0; i < pack.Theta.size(); ++i)
            for (int j = 0; j < M; ++j) theta(i, j) = pack.Theta[i][j];
          py::dict d;
          d["M"] = pack.M;
          d["N"] = pack.N;
          d["min_hamming"] = pack.min_hamming;
          d["theta"] = theta;
          return d;
        },
        py::arg("M"), py::arg("seed") = 0);

  m.def("validate_config",
        [](const std::string& text, const std::string& name) {
          return std::string(kind_name(parse_config(text, name).kind));
        },
        py::arg("text"), py::arg("name") = "<python>");

  m.def("run_experiment_json",
        [](const std::string& text, std::optional<std::string> out_dir,
           std::optional<std::uint64_t> seed, std::optional<int> workers) {
          ExperimentConfig cfg = parse_config(text, "<python>");
          if (out_dir) cfg.out_dir = *out_dir;
          if (seed) cfg.seed = *seed;
          if (workers) cfg.workers = *workers;
          return run_experiment(cfg);
        },
        py::arg("text"), py::arg("out_dir") = py::none(),
        py::arg("seed") = py::none(), py::arg("workers") = py::none());
}
