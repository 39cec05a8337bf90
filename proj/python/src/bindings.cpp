#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ssgd/analyzer.hpp"
#include "ssgd/errors.hpp"
#include "ssgd/harness.hpp"
#include "ssgd/io.hpp"
#include "ssgd/power_profile.hpp"
#include "ssgd/problem.hpp"
#include "ssgd/simulator.hpp"
#include "ssgd/time_models.hpp"

namespace py = pybind11;
using namespace ssgd;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

TimeModel make_model(const std::optional<std::vector<double>>& taus,
                     const std::optional<std::vector<DelayDistribution>>& delays,
                     const std::optional<std::vector<PowerProfile>>& profiles) {
  const int given = int(taus.has_value()) + int(delays.has_value()) + int(profiles.has_value());
  if (given != 1) throw ContractError("give exactly one of taus, delays or profiles");
  if (taus) return FixedTimes(*taus);
  if (delays) return RandomDelays{*delays};
  return PowerProfiles{*profiles};
}

py::dict trajectory_dict(const Trajectory& t) {
  std::vector<double> time, f, g;
  std::vector<std::int64_t> iter;
  for (const auto& r : t.records) {
    time.push_back(r.time);
    iter.push_back(r.iteration);
    f.push_back(r.objective);
    g.push_back(r.grad_sq_norm);
  }
  py::dict d;
  d["time"] = time;
  d["iter"] = iter;
  d["f"] = f;
  d["grad_sq_norm"] = g;
  d["iterations"] = t.iterations;
  d["gradients_computed"] = t.gradients_computed;
  d["gradients_used"] = t.gradients_used;
  d["gradients_discarded"] = t.gradients_discarded;
  d["diverged"] = t.diverged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulator and complexity analyzer for synchronous and asynchronous SGD";
  m.attr("__version__") = SSGD_VERSION;

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<OutOfRegimeError>(m, "OutOfRegimeError", PyExc_ValueError);
  py::register_exception<StalledError>(m, "StalledError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<QuadraticProblem>(m, "QuadraticProblem")
      .def(py::init<std::size_t, double>(), py::arg("dim"), py::arg("p"))
      .def_property_readonly("dim", &QuadraticProblem::dim)
      .def_property_readonly("p", &QuadraticProblem::noise_probability)
      .def("initial_point", &QuadraticProblem::initial_point)
      .def("objective", [](const QuadraticProblem& q, const std::vector<double>& x) { return q.objective(x); })
      .def("gradient", [](const QuadraticProblem& q, const std::vector<double>& x) { return q.gradient(x); })
      .def("stochastic_gradient",
           [](const QuadraticProblem& q, const std::vector<double>& x, bool heads) {
             return q.stochastic_gradient(x, heads);
           },
           py::arg("x"), py::arg("heads"))
      .def("variance", [](const QuadraticProblem& q, const std::vector<double>& x) { return q.variance(x); })
      .def("minimizer", &QuadraticProblem::minimizer)
      .def_property_readonly("optimal_value", &QuadraticProblem::optimal_value)
      .def_property_readonly("initial_gap", &QuadraticProblem::initial_gap)
      .def_property_readonly("smoothness", &QuadraticProblem::smoothness);
  m.def("prog", [](const std::vector<double>& x) { return prog(x); });

  py::class_<PowerProfile>(m, "PowerProfile")
      .def(py::init([](double step, std::vector<double> values, const std::string& interp) {
             return PowerProfile(step, std::move(values),
                                 interp == "step" ? Interpolation::kStep : Interpolation::kLinear);
           }),
           py::arg("step"), py::arg("values"), py::arg("interpolation") = "linear")
      .def_property_readonly("step", &PowerProfile::step)
      .def_property_readonly("values", [](const PowerProfile& p) {
        return std::vector<double>(p.values().begin(), p.values().end());
      })
      .def("power_at", &PowerProfile::power_at)
      .def("integrate", &PowerProfile::integrate)
      .def("gradients_completed", &PowerProfile::gradients_completed)
      .def("time_to_complete", &PowerProfile::time_to_complete, py::arg("t0"), py::arg("units") = 1.0);
  m.def("constant_profile", &constant_profile);
  m.def("chaotic_profiles", &generate_chaotic_profiles, py::arg("n"), py::arg("step"),
        py::arg("horizon"), py::arg("seed"));
  m.def("periodic_profiles", &generate_periodic_profiles, py::arg("n"), py::arg("step"),
        py::arg("horizon"), py::arg("seed"));
  m.def("profiles_to_csv", [](const std::vector<PowerProfile>& p) { return profiles_to_csv(p); });
  m.def("profiles_from_csv", [](const std::string& s) { return profiles_from_csv(s); });

  py::class_<DelayDistribution>(m, "DelayDistribution")
      .def_static("constant", &DelayDistribution::constant)
      .def_static("uniform", &DelayDistribution::uniform)
      .def_static("truncated_normal", &DelayDistribution::truncated_normal)
      .def_static("exponential", &DelayDistribution::exponential)
      .def_static("shifted_exponential", &DelayDistribution::shifted_exponential)
      .def_static("gamma", &DelayDistribution::gamma)
      .def_static("chi_square", &DelayDistribution::chi_square)
      .def("mean", &DelayDistribution::mean)
      .def("sample", [](const DelayDistribution& d, std::size_t count, std::uint64_t seed) {
        Rng rng = make_stream(seed, 0, Stream::kDelay);
        std::vector<double> out(count);
        for (double& x : out) x = d.sample(rng);
        return out;
      }, py::arg("count"), py::arg("seed") = 0)
      .def("__repr__", &DelayDistribution::describe);
  m.def("estimate_R", [](const std::vector<double>& s) { return estimate_R(s); });

  m.def(
      "simulate",
      [](const std::string& algorithm, double stepsize, std::optional<std::vector<double>> taus,
         std::optional<std::vector<DelayDistribution>> delays,
         std::optional<std::vector<PowerProfile>> profiles, std::size_t m, std::size_t batch,
         double time_budget, std::int64_t max_iterations, std::uint64_t seed, std::size_t dim,
         double p, std::optional<double> staleness_clip, std::size_t max_records) {
        SimConfig c;
        c.algorithm = parse_algorithm(algorithm);
        c.stepsize = stepsize;
        c.time_model = std::make_shared<const TimeModel>(make_model(taus, delays, profiles));
        c.problem = std::make_shared<const QuadraticProblem>(dim, p);
        c.m = m;
        c.batch = batch;
        c.time_budget = time_budget;
        c.max_iterations = max_iterations;
        c.seed = seed;
        c.staleness_clip = staleness_clip;
        c.max_records = max_records;
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = simulate(c);
        }
        py::dict d = trajectory_dict(t);
        d["optimal_value"] = c.problem->optimal_value();
        return d;
      },
      py::arg("algorithm"), py::arg("stepsize"), py::kw_only(), py::arg("taus") = py::none(),
      py::arg("delays") = py::none(), py::arg("profiles") = py::none(), py::arg("m") = 0,
      py::arg("batch") = 0, py::arg("time_budget") = std::numeric_limits<double>::infinity(),
      py::arg("max_iterations") = 0, py::arg("seed") = 0, py::arg("dim") = 1000,
      py::arg("p") = 0.01, py::arg("staleness_clip") = py::none(), py::arg("max_records") = 10000);

  py::class_<RateConstants>(m, "RateConstants")
      .def(py::init([](double L, double delta, double sigma2, double eps, std::optional<double> R) {
             RateConstants c{L, delta, sigma2, eps, R};
             c.validate();
             return c;
           }),
           py::kw_only(), py::arg("L") = 1.0, py::arg("delta") = 1.0, py::arg("sigma2") = 0.0,
           py::arg("eps") = 1.0, py::arg("R") = py::none())
      .def_readwrite("L", &RateConstants::L)
      .def_readwrite("delta", &RateConstants::delta)
      .def_readwrite("sigma2", &RateConstants::sigma2)
      .def_readwrite("eps", &RateConstants::eps)
      .def_readwrite("R", &RateConstants::R)
      .def_static("from_problem", &RateConstants::from_problem);

  m.def("iteration_count", &iteration_count);
  m.def("t_sync", [](const std::vector<double>& taus, const RateConstants& c) {
    const Minimizer r = t_sync(FixedTimes(taus), c);
    return py::make_tuple(r.value, r.m);
  });
  m.def("t_optimal", [](const std::vector<double>& taus, const RateConstants& c) {
    const Minimizer r = t_optimal(FixedTimes(taus), c);
    return py::make_tuple(r.value, r.m);
  });
  m.def("log_gap_certificate", [](const std::vector<double>& taus, const RateConstants& c) {
    return log_gap_certificate(FixedTimes(taus), c);
  });
  m.def("optimal_m", [](const std::vector<double>& taus, const RateConstants& c) {
    return optimal_m(FixedTimes(taus), c);
  });
  m.def("random_noise_term", &random_noise_term);
  m.def("partial_participation_bound",
        [](double v, double p, std::size_t n, const RateConstants& c) {
          const ParticipationBound b = partial_participation_bound(v, p, n, c);
          return py::dict(py::arg("seconds") = b.seconds, py::arg("iterations") = b.iterations,
                          py::arg("m_min") = b.m_min, py::arg("m_max") = b.m_max);
        });
  m.def("complexity_report_json", [](const std::vector<double>& taus, const RateConstants& c) {
    return dump(to_json(complexity_report(FixedTimes(taus), c)));
  });
  m.def("lower_bound_sequence",
        [](const std::vector<PowerProfile>& p, const RateConstants& c, double c1, double c2) {
          return lower_bound_sequence(p, c, c1, c2);
        },
        py::arg("profiles"), py::arg("consts"), py::arg("c1") = 16.0, py::arg("c2") = 1.0);
  m.def("upper_bound_sequence",
        [](const std::vector<PowerProfile>& p, const RateConstants& c, std::size_t mm,
           double units) { return upper_bound_sequence(p, c, mm, units); },
        py::arg("profiles"), py::arg("consts"), py::arg("m"), py::arg("units") = 2.0);
  m.def("gap_ratio",
        [](const std::vector<PowerProfile>& p, const RateConstants& c, std::size_t mm, double c1,
           double c2, double units) { return gap_ratio(p, c, mm, c1, c2, units); },
        py::arg("profiles"), py::arg("consts"), py::arg("m"), py::arg("c1") = 16.0,
        py::arg("c2") = 1.0, py::arg("units") = 2.0);

  m.def("load_spec_json", [](const std::string& path) { return dump(to_json(load_spec(path))); });
  m.def(
      "run_sweep",
      [](const std::string& spec_path, const std::string& out_dir) {
        const ExperimentSpec spec = load_spec(spec_path);
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = run_sweep(spec);
          emit_report(r, out_dir.empty() ? spec.output_dir : out_dir);
        }
        return read_text_file(std::filesystem::path(out_dir.empty() ? spec.output_dir : out_dir) /
                              "summary.json");
      },
      py::arg("spec_path"), py::arg("out_dir") = "");
  m.def("run_gap_json", [](const std::string& spec_path) {
    const ExperimentSpec spec = load_spec(spec_path);
    GapStudy s;
    {
      py::gil_scoped_release release;
      s = run_gap_study(spec);
    }
    return dump(to_json(s));
  });
  m.def("analyze_json", [](const std::string& spec_path) {
    return dump(to_json(run_analysis(load_spec(spec_path))));
  });
}
