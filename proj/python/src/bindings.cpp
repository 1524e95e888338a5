#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "edgecache/cache.hpp"
#include "edgecache/errors.hpp"
#include "edgecache/preference.hpp"
#include "edgecache/sim.hpp"
#include "experiment.hpp"

namespace py = pybind11;
using namespace edgecache;

namespace {

PreferenceModel with_weights(const std::vector<double>& w) {
  PreferenceModel m(w.size());
  m.w = w;
  return m;
}

const char* outcome_name(AdmitOutcome o) {
  switch (o) {
    case AdmitOutcome::AdmittedFreeSlot: return "admitted";
    case AdmitOutcome::AdmittedWithEviction: return "replaced";
    case AdmitOutcome::Rejected: return "rejected";
  }
  return "rejected";
}

py::dict report_dict(const MetricsReport& m) {
  py::list periods;
  for (const auto& p : m.per_period) {
    py::dict row;
    row["t"] = p.t;
    row["D"] = p.D;
    row["U"] = p.U;
    row["F"] = p.F;
    row["hits"] = p.hits;
    row["H"] = p.H;
    row["H_optimal"] = p.H_optimal;
    periods.append(row);
  }
  py::list regret;
  for (const auto& r : m.regret) {
    py::dict row;
    row["D"] = r.D;
    row["t"] = r.t;
    row["R"] = r.R;
    regret.append(row);
  }
  py::dict d;
  d["policy"] = m.policy;
  d["capacity"] = m.capacity;
  d["total_requests"] = m.total_requests;
  d["total_hits"] = m.total_hits;
  d["overall_H"] = m.overall_H;
  d["overall_H_weighted"] = m.overall_H_weighted;
  d["overall_H_optimal"] = m.overall_H_optimal;
  d["periods"] = periods;
  d["regret"] = regret;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learning-based edge caching simulator";

  // Later registrations are tried first, so the base goes in before the subclasses.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<JoinError>(m, "JoinError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<DimensionError>(m, "DimensionError", base);

  m.def("sigmoid", &sigmoid, py::arg("v"));
  m.def(
      "predict_prob",
      [](const std::vector<double>& w, const std::vector<double>& x) {
        return predict_prob(with_weights(w), x);
      },
      py::arg("w"), py::arg("x"));
  m.def(
      "logistic_loss",
      [](const std::vector<double>& w, const std::vector<double>& x, int y) {
        return logistic_loss(with_weights(w), x, y);
      },
      py::arg("w"), py::arg("x"), py::arg("y"));
  m.def(
      "gradient",
      [](const std::vector<double>& w, const std::vector<double>& x, int y) {
        return gradient(with_weights(w), x, y);
      },
      py::arg("w"), py::arg("x"), py::arg("y"));
  m.def(
      "proximal_weight",
      [](double z, double q, double alpha, double beta, double lambda1, double lambda2) {
        return proximal_weight(z, q, Hyperparams{alpha, beta, lambda1, lambda2});
      },
      py::arg("z"), py::arg("q"), py::arg("alpha") = 0.1, py::arg("beta") = 1.0,
      py::arg("lambda1") = 1e-3, py::arg("lambda2") = 1e-3);

  py::class_<PreferenceModel>(m, "PreferenceModel")
      .def(py::init([](std::size_t dimension, double alpha, double beta, double lambda1,
                       double lambda2, double gamma) {
             Hyperparams hp{alpha, beta, lambda1, lambda2};
             hp.validate();
             return PreferenceModel(dimension, hp, gamma);
           }),
           py::arg("dimension"), py::arg("alpha") = 0.1, py::arg("beta") = 1.0,
           py::arg("lambda1") = 1e-3, py::arg("lambda2") = 1e-3, py::arg("gamma") = 0.2)
      .def_readonly("w", &PreferenceModel::w)
      .def_readonly("z", &PreferenceModel::z)
      .def_readonly("q", &PreferenceModel::q)
      .def_property_readonly("dimension", &PreferenceModel::dimension)
      .def(
          "predict", [](const PreferenceModel& self, const std::vector<double>& x) {
            return predict_prob(self, x);
          },
          py::arg("x"))
      .def(
          "update",
          [](PreferenceModel& self, const std::vector<double>& x, int y) {
            ftrl_update(self, Sample{FeatureVector(x), y});
          },
          py::arg("x"), py::arg("y"), "One FTRL-Proximal step.")
      .def(
          "observe",
          [](PreferenceModel& self, const std::vector<double>& x, int y) {
            return observe_and_maybe_retrain(self, Sample{FeatureVector(x), y});
          },
          py::arg("x"), py::arg("y"), "Feeds the loss monitor; returns True after a retrain.");

  py::class_<CacheState>(m, "CacheState")
      .def(py::init<std::size_t>(), py::arg("capacity"))
      .def("__len__", &CacheState::size)
      .def("__contains__",
           [](const CacheState& self, std::int64_t id) { return self.lookup(ContentId{id}); })
      .def_property_readonly("capacity", &CacheState::capacity)
      .def(
          "admit_or_reject",
          [](CacheState& self, std::int64_t id, double p_hat, Timestamp now,
             std::size_t active_users) {
            const auto d = self.admit_or_reject(ContentId{id}, p_hat, now, active_users);
            std::optional<std::int64_t> evicted;
            if (d.evicted) evicted = to_int(*d.evicted);
            return std::make_tuple(std::string(outcome_name(d.outcome)), evicted);
          },
          py::arg("content"), py::arg("p_hat"), py::arg("now"), py::arg("active_users"))
      .def("peek_least",
           [](const CacheState& self) -> std::optional<std::tuple<std::int64_t, double, Timestamp>> {
             const auto e = self.peek_least();
             if (!e) return std::nullopt;
             return std::make_tuple(to_int(e->id), e->p_cur, e->t_f);
           })
      .def("entries", [](const CacheState& self) {
        std::vector<std::tuple<std::int64_t, double, Timestamp>> out;
        for (const auto& e : self.entries()) out.emplace_back(to_int(e.id), e.p_cur, e.t_f);
        return out;
      });

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(e.what());
        }
        auto spec = cli::ExperimentSpec::from_json(doc);
        spec.validate();
        std::vector<RunResult> results;
        {
          py::gil_scoped_release release;
          const auto prepared = cli::prepare(spec);
          results = cli::run_jobs(spec, prepared, cli::jobs_of(spec));
        }
        py::list out;
        for (const auto& r : results) out.append(report_dict(r.metrics));
        return out;
      },
      py::arg("config_json"),
      "Runs every (policy, capacity) job of a JSON config in memory and returns the metrics.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::main(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command line; returns (exit_code, stdout, stderr).");
}
