// Python face of the library: distribution laws are passed as the same
// strings the command line takes (e.g. "pareto(shape=2.5, scale=0.6)"), and
// results come back as plain dicts and lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tailq/asymptotics.hpp"
#include "tailq/distribution.hpp"
#include "tailq/errors.hpp"
#include "tailq/estimate.hpp"
#include "tailq/experiment.hpp"
#include "tailq/model.hpp"
#include "tailq/random.hpp"
#include "tailq/simulate.hpp"

namespace py = pybind11;
using namespace tailq;

namespace {

ModelParams make_params(const std::string& arrival, const std::string& service,
                        double feedback_p) {
    return {parse_distribution(arrival), parse_distribution(service), feedback_p};
}

py::dict constants_dict(const DerivedConstants& c) {
    py::dict d;
    d["a"] = c.a;
    d["b"] = c.b;
    d["lambda"] = c.lambda;
    d["p"] = c.p;
    d["q"] = c.q;
    d["r"] = c.r;
    d["rho"] = c.rho;
    d["b_h"] = c.b_h;
    d["m_inf"] = c.m_inf;
    d["stable"] = c.stable;
    return d;
}

double resolve_prefactor(const ModelParams& params, const DerivedConstants& c,
                         const std::optional<double>& prefactor) {
    if (prefactor) return *prefactor;
    if (std::holds_alternative<Exponential>(params.arrival)) return poisson_prefactor(c);
    throw DomainError("prefactor is required for non-Poisson arrivals");
}

double resolve_busy_count(const ModelParams& params, const DerivedConstants& c,
                          const std::optional<double>& e_tau_h) {
    if (e_tau_h) return *e_tau_h;
    if (std::holds_alternative<Exponential>(params.arrival))
        return poisson_mean_busy_count(c);
    throw DomainError("e_tau_h is required for non-Poisson arrivals");
}

}  // namespace

PYBIND11_MODULE(_tailq, m) {
    m.doc() = "simulation and tail analytics for the single-server feedback queue";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ParseError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def(
        "canonical_law",
        [](const std::string& text) { return format_distribution(parse_distribution(text)); },
        py::arg("law"), "parse a distribution string and return its canonical form");
    m.def(
        "law_mean", [](const std::string& text) { return mean(parse_distribution(text)); },
        py::arg("law"));
    m.def(
        "law_tail",
        [](const std::string& text, double x) { return tail(parse_distribution(text), x); },
        py::arg("law"), py::arg("x"));
    m.def(
        "law_integrated_tail",
        [](const std::string& text, double x) {
            return integrated_tail(parse_distribution(text), x);
        },
        py::arg("law"), py::arg("x"));
    m.def(
        "law_inverse_survival",
        [](const std::string& text, double u) {
            return inverse_survival(parse_distribution(text), u);
        },
        py::arg("law"), py::arg("u"));
    m.def(
        "sample_law",
        [](const std::string& text, std::size_t n, std::uint64_t seed,
           std::uint64_t stream) {
            const DistributionSpec d = parse_distribution(text);
            RandomStream rs(seed, stream);
            std::vector<double> out(n);
            for (double& v : out) v = sample(d, rs);
            return out;
        },
        py::arg("law"), py::arg("n"), py::arg("seed") = 1, py::arg("stream") = 0,
        "n draws from the law using the counter-based stream (seed, stream)");

    m.def(
        "derive",
        [](const std::string& arrival, const std::string& service, double feedback_p) {
            return constants_dict(derive_constants(make_params(arrival, service, feedback_p)));
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"),
        "derived model constants: rates, feedback load r, utilization rho");

    m.def(
        "fluid_multiplier",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           int k) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            return fluid_multiplier(derive_constants(params), k);
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("k"),
        "m_k: a service jump of size y delays the k-th later completion to about "
        "(1+m_k) y");

    m.def(
        "first_sojourn_tail",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           double x, std::optional<double> prefactor) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            return first_sojourn_tail(params, c, resolve_prefactor(params, c, prefactor), x);
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("x"),
        py::arg("prefactor") = std::nullopt);

    m.def(
        "stationary_sojourn_tail",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           double x) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            return stationary_sojourn_tail(params, c, x);
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("x"));

    m.def(
        "completion_time_tail",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           int k, const std::vector<double>& prefactors, double x) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            return completion_time_tail(params, c, k, prefactors, x);
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("k"),
        py::arg("prefactors"), py::arg("x"));

    m.def(
        "busy_period_tail",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           double x, std::optional<double> e_tau_h) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            return busy_period_tail(params, c, resolve_busy_count(params, c, e_tau_h), x);
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("x"),
        py::arg("e_tau_h") = std::nullopt);

    m.def(
        "busy_count_tail",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           double x, std::optional<double> e_tau_h) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            return busy_count_tail(params, c, resolve_busy_count(params, c, e_tau_h), x);
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("x"),
        py::arg("e_tau_h") = std::nullopt);

    m.def(
        "simulate_tagged",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           std::uint64_t seed, std::uint64_t stream) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            RandomStream rs(seed, stream);
            TaggedTrace tr;
            simulate_tagged_first(params, c, rs, tr);
            py::dict d;
            d["K"] = tr.K;
            d["sojourn"] = tr.sojourn;
            d["U"] = tr.U;
            d["T"] = tr.T;
            d["X"] = tr.X;
            d["events"] = tr.events;
            return d;
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("seed") = 1,
        py::arg("stream") = 0,
        "one customer from arrival at an empty queue to its final departure");

    m.def(
        "simulate_busy",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           std::uint64_t seed, std::uint64_t stream) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            RandomStream rs(seed, stream);
            BusyRecord rec;
            simulate_busy_period(params, c, rs, rec);
            py::dict d;
            d["length"] = rec.length;
            d["customers"] = rec.customers;
            d["services"] = rec.services;
            d["max_single_service"] = rec.max_single_service;
            d["max_compound_service"] = rec.max_compound_service;
            d["events"] = rec.events;
            return d;
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("seed") = 1,
        py::arg("stream") = 0, "one busy period started by an arrival at an empty system");

    m.def(
        "simulate_cycle",
        [](const std::string& arrival, const std::string& service, double feedback_p,
           std::uint64_t seed, std::uint64_t stream) {
            const ModelParams params = make_params(arrival, service, feedback_p);
            const DerivedConstants c = derive_constants(params);
            require_stable(c);
            RandomStream rs(seed, stream);
            CycleRecord rec;
            simulate_one_cycle(params, c, rs, rec);
            py::dict d;
            d["cycle_length"] = rec.cycle_length;
            d["customers"] = rec.customers;
            d["sojourns"] = rec.sojourns;
            d["events"] = rec.events;
            return d;
        },
        py::arg("arrival"), py::arg("service"), py::arg("feedback_p"), py::arg("seed") = 1,
        py::arg("stream") = 0, "one regeneration cycle with every customer's sojourn");

    m.def(
        "estimate_tail",
        [](const std::vector<double>& values, const std::vector<double>& grid) {
            const TailEstimate est = estimate_tail(values, grid);
            py::dict d;
            d["x"] = est.grid();
            d["n"] = est.n();
            d["hits"] = est.hits();
            d["p_hat"] = est.p_hat();
            d["ci_low"] = est.ci_low();
            d["ci_high"] = est.ci_high();
            return d;
        },
        py::arg("values"), py::arg("grid"),
        "exceedance counts of the values over the ascending threshold grid, with "
        "95% intervals");

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const RunResult result = run_experiment(config_from_json(config_json));
            py::dict d;
            d["files"] = result.files;
            d["dropped"] = result.dropped;
            d["check_performed"] = result.check_performed;
            d["check_passed"] = result.check_passed;
            py::list checks;
            for (const CheckLine& line : result.checks) {
                py::dict one;
                one["check"] = line.text;
                one["pass"] = line.pass;
                checks.append(one);
            }
            d["checks"] = checks;
            return d;
        },
        py::arg("config_json"),
        "run one experiment from a JSON config (or a metadata file's text) and "
        "write its reports");
}
