#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iqbart/ald.hpp"
#include "iqbart/dgp.hpp"
#include "iqbart/error.hpp"
#include "iqbart/forest.hpp"
#include "iqbart/io.hpp"
#include "iqbart/metrics.hpp"
#include "iqbart/model.hpp"

namespace py = pybind11;
using namespace iqbart;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    Matrix m(static_cast<std::size_t>(a.shape(0)), 1);
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
  }
  if (a.ndim() != 2) throw InputError("expected a 1-d or 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

py::array_t<double> to_array(const Matrix& m) {
  return py::array_t<double>(
      std::vector<py::ssize_t>{static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)}, m.data.data());
}

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

SamplerConfig make_config(int trees, int burn_in, int draws, int particles, double learning_rate, int max_depth,
                          std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.prior.num_trees = trees;
  cfg.burn_in = burn_in;
  cfg.draws = draws;
  cfg.num_particles = particles;
  cfg.learning_rate = learning_rate;
  cfg.max_depth = max_depth;
  cfg.seed = seed;
  return cfg;
}

AugmentationScheme make_scheme(const std::string& kind, int r) {
  AugmentationScheme s = scheme_from_json({{"kind", kind}, {"r", r}});
  if (s.kind == AugmentationKind::Single) s.r = 1;
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_iqbart, m) {
  m.doc() = "Implicit quantile BART";
  m.attr("__version__") = code_version();

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("check_loss", &check_loss, py::arg("u"), py::arg("tau"));
  m.def(
      "sample_quantile", [](const Array& y, double tau) { return sample_quantile(to_vector(y), QuantileLevel{tau}); },
      py::arg("y"), py::arg("tau"));
  m.def(
      "posterior_mean_quantile",
      [](const Array& y, double tau, double lam) { return posterior_mean_quantile(to_vector(y), QuantileLevel{tau}, lam); },
      py::arg("y"), py::arg("tau"), py::arg("lam"),
      "Posterior mean of the tau-quantile under the ALD likelihood with scale lam and a flat prior.");
  m.def("rearrange", &rearrange_nondecreasing, py::arg("values"));

  m.def(
      "simulate",
      [](const std::string& dgp, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        const Dataset d = sample_joint(DGPSpec::parse(dgp), n, rng);
        return py::make_tuple(to_array(d.x), to_array(d.y));
      },
      py::arg("dgp"), py::arg("n"), py::arg("seed") = 0,
      "Draw n rows from a synthetic process: difficult, mixture, lstar or bivariate. Returns (x, y).");
  m.def(
      "true_quantiles",
      [](const std::string& dgp, const Array& x, const Array& taus) {
        const auto spec = DGPSpec::parse(dgp);
        return to_array(true_quantile_curve(spec, to_vector(x), to_vector(taus), OracleQuantile::default_for(spec)));
      },
      py::arg("dgp"), py::arg("x"), py::arg("taus"));

  m.def(
      "wasserstein",
      [](const Array& a, const Array& b, bool sup) {
        return wasserstein(to_vector(a), to_vector(b), sup ? WassersteinOrder::Infinity : WassersteinOrder::One);
      },
      py::arg("true_values"), py::arg("est_values"), py::arg("sup") = false);
  m.def(
      "crps",
      [](const std::function<double(double)>& q, double y, std::size_t k) { return crps(q, y, k); },
      py::arg("quantile_fn"), py::arg("y"), py::arg("n_scores") = 100);
  m.def(
      "interval_score",
      [](double y, double lower, double upper, double alpha) {
        return interval_score(y, {lower, upper, alpha});
      },
      py::arg("y"), py::arg("lower"), py::arg("upper"), py::arg("alpha"));
  m.def(
      "msis",
      [](const Array& history, double y, double lower, double upper, double alpha) {
        return msis(to_vector(history), y, {lower, upper, alpha});
      },
      py::arg("history"), py::arg("y"), py::arg("lower"), py::arg("upper"), py::arg("alpha"));
  m.def(
      "kde_critical_bandwidth", [](const Array& s) { return kde_critical_bandwidth(to_vector(s)); },
      py::arg("samples"));

  py::class_<QuantileModel>(m, "QuantileModel")
      .def_static(
          "fit",
          [](const Array& x, const Array& y, int r, const std::string& augmentation, int trees, int burn_in, int draws,
             int particles, double learning_rate, int max_depth, std::uint64_t seed) {
            const Matrix xm = to_matrix(x);
            const auto yv = to_vector(y);
            const auto scheme = make_scheme(augmentation, r);
            const auto cfg = make_config(trees, burn_in, draws, particles, learning_rate, max_depth, seed);
            py::gil_scoped_release release;
            return fit_quantile_model(xm, yv, scheme, cfg);
          },
          py::arg("x"), py::arg("y"), py::arg("r") = 5, py::arg("augmentation") = "fully_augmented",
          py::arg("trees") = 200, py::arg("burn_in") = 500, py::arg("draws") = 500, py::arg("particles") = 10,
          py::arg("learning_rate") = 1.0, py::arg("max_depth") = -1, py::arg("seed") = 0)
      .def_static(
          "from_json", [](const std::string& text) { return model_from_json(nlohmann::json::parse(text)); },
          py::arg("text"))
      .def("to_json", [](const QuantileModel& self) { return model_json(self).dump(); })
      .def_property_readonly("num_draws", &QuantileModel::num_draws)
      .def_property_readonly("d", [](const QuantileModel& self) { return self.d; })
      .def(
          "plug_in",
          [](const QuantileModel& self, const Array& x, const Array& taus) {
            return to_array(rearrange_nondecreasing(plug_in_curve(self, to_vector(x), to_vector(taus))));
          },
          py::arg("x"), py::arg("taus"), "Rearranged posterior-mean quantile curve over ascending taus.")
      .def(
          "predictive",
          [](const QuantileModel& self, const Array& x, const Array& taus, std::size_t n_mc, std::uint64_t seed) {
            const auto xv = to_vector(x), tv = to_vector(taus);
            if (n_mc == 0) return to_array(predictive_quantiles_exact(self, xv, tv));
            Rng rng(seed);
            return to_array(predictive_quantiles(self, xv, tv, n_mc, rng));
          },
          py::arg("x"), py::arg("taus"), py::arg("n_mc") = 0, py::arg("seed") = 0,
          "Posterior-predictive quantiles; n_mc = 0 evaluates the predictive mixture exactly.")
      .def(
          "sample",
          [](const QuantileModel& self, const Array& x, std::size_t n, std::uint64_t seed) {
            Rng rng(seed);
            return to_array(sample_predictive(self, to_vector(x), n, rng));
          },
          py::arg("x"), py::arg("n"), py::arg("seed") = 0)
      .def(
          "credible_interval",
          [](const QuantileModel& self, const Array& x, double tau, double level) {
            const auto ci = credible_interval(self, to_vector(x), QuantileLevel{tau}, level);
            return py::make_tuple(ci.lower, ci.upper);
          },
          py::arg("x"), py::arg("tau"), py::arg("level") = 0.95);
}
