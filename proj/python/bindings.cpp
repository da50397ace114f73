#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>

#include "evreg/datasets.hpp"
#include "evreg/error.hpp"
#include "evreg/fit.hpp"
#include "evreg/hots.hpp"
#include "evreg/sim.hpp"

namespace py = pybind11;
using namespace evreg;

namespace {

ModelSpec make_spec(const std::string& location, const std::string& dispersion, const std::string& family,
                    const std::string& link) {
  ModelSpec m;
  m.tail = parse_tail(family);
  m.location = parse_formula(location);
  m.dispersion = parse_formula(dispersion);
  m.dispersion_link = Link{parse_link(link)};
  m.validate();
  return m;
}

Dataset make_data(const std::vector<double>& y, const std::map<std::string, std::vector<double>>& covariates) {
  Dataset d(y);
  for (const auto& [name, values] : covariates) d.add_column(name, values);
  return d;
}

py::dict fit_dict(const ModelSpec& m, const FitResult& f) {
  py::dict out;
  out["parameters"] = m.parameter_names();
  out["theta"] = f.theta_hat;
  out["se"] = f.se;
  out["loglik"] = f.loglik_hat;
  out["converged"] = f.converged;
  out["iterations"] = f.iterations;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Gumbel regression with adjusted signed likelihood ratio tests";

  py::register_exception<DataError>(mod, "DataError", PyExc_ValueError);
  py::register_exception<SyntaxError>(mod, "FormulaError", PyExc_ValueError);
  py::register_exception<DomainError>(mod, "DomainError", PyExc_ValueError);
  py::register_exception<EvaluationError>(mod, "EvaluationError", PyExc_ArithmeticError);

  mod.def(
      "niwot",
      [] {
        std::map<std::string, std::vector<double>> cols;
        for (const auto& r : datasets::niwot_rows()) {
          cols["year"].push_back(r.year);
          cols["temperature"].push_back(r.temperature);
          cols["wind"].push_back(r.wind);
        }
        return cols;
      },
      "Bundled Niwot Ridge data as a dict of columns.");

  mod.def(
      "fit",
      [](const std::vector<double>& y, const std::map<std::string, std::vector<double>>& covariates,
         const std::string& location, const std::string& dispersion, const std::string& family,
         const std::string& link) {
        const ModelSpec m = make_spec(location, dispersion, family, link);
        const BoundModel bm(m, make_data(y, covariates));
        return fit_dict(m, fit_full(bm));
      },
      py::arg("y"), py::arg("covariates"), py::arg("location"), py::arg("dispersion") = "1",
      py::arg("family") = "max", py::arg("dispersion_link") = "identity");

  mod.def(
      "test",
      [](const std::vector<double>& y, const std::map<std::string, std::vector<double>>& covariates,
         const std::string& location, const std::string& param, double null_value, const std::string& direction,
         const std::string& stats, const std::string& dispersion, const std::string& family,
         const std::string& link) {
        const ModelSpec m = make_spec(location, dispersion, family, link);
        const BoundModel bm(m, make_data(y, covariates));
        const HypothesisSpec hyp{m.resolve_parameter(param), null_value, parse_direction(direction)};
        const TestReport rep = run_tests(bm, hyp, parse_statistic_list(stats));
        py::dict values, pvalues, errors;
        for (const auto& [s, res] : rep.statistics) {
          const std::string name(to_string(s));
          if (res.ok()) {
            values[name.c_str()] = *res.value;
            pvalues[name.c_str()] = *res.p_value;
          } else {
            errors[name.c_str()] = res.error;
          }
        }
        py::dict out;
        out["R"] = rep.r;
        out["statistics"] = values;
        out["p_values"] = pvalues;
        out["errors"] = errors;
        out["theta_hat"] = rep.theta_hat;
        out["theta_tilde"] = rep.theta_tilde;
        return out;
      },
      py::arg("y"), py::arg("covariates"), py::arg("location"), py::arg("param"), py::arg("null") = 0.0,
      py::arg("direction") = "greater", py::arg("stats") = "all", py::arg("dispersion") = "1",
      py::arg("family") = "max", py::arg("dispersion_link") = "identity");

  mod.def(
      "simulate_size",
      [](const std::string& design_text, std::optional<std::size_t> reps, unsigned threads) {
        sim::SimDesign d = sim::parse_design(std::string_view(design_text));
        if (reps) d.reps = *reps;
        sim::SimResult r;
        {
          py::gil_scoped_release release;
          r = sim::run_size(d, {std::max(1u, threads), {}});
        }
        py::dict rates;
        for (const auto& [s, sum] : r.statistics) {
          std::vector<double> v;
          for (std::size_t j = 0; j < r.alphas.size(); ++j) v.push_back(sum.count() ? sum.rate(j) : std::nan(""));
          rates[std::string(to_string(s)).c_str()] = v;
        }
        py::dict out;
        out["alphas"] = r.alphas;
        out["rates"] = rates;
        out["failures"] = r.failures;
        out["csv"] = sim::rates_csv(r);
        return out;
      },
      py::arg("design"), py::arg("reps") = py::none(), py::arg("threads") = 1,
      "Null rejection rates for a design given as text.");
}
