#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailq/model.hpp"

// Experiment runner: binds the simulators, the asymptote formulas and the
// estimators into reproducible named runs that write plot-ready CSV plus a
// JSON metadata file from which the run can be repeated exactly.

namespace tailq {

inline constexpr const char* kExperimentKinds[] = {
    "validate-means", "busy-tail",       "count-tail",    "sojourn-tail", "finite-tk",
    "stationary-tail", "psbj",           "decomposition", "fluid-check"};

// Threshold grid: an explicit list wins; otherwise geometric with start
// defaulting to 10x the mean service time.
struct GridSpec {
    std::vector<double> points;
    double start = 0;
    double factor = 2.0;
    int count = 12;
};

struct ExperimentConfig {
    std::string kind;
    std::string arrival = "exp(rate=0.2)";
    std::string service = "pareto(shape=2.5, scale=0.6)";
    double feedback_p = 0.5;
    std::uint64_t reps = 100000;  // replications; cycles for the stationary kinds
    std::uint64_t seed = 1;
    int workers = 0;  // 0: all hardware threads; env TAILQ_THREADS overrides
    std::string out = "tailq-out";
    GridSpec grid;
    std::uint64_t event_cap = 100'000'000;
    bool check = false;

    // sojourn-tail: inject E(1 + X_{K-1}) instead of the Poisson closed form
    // or the run's own estimate.
    std::optional<double> prefactor;
    // busy-tail / count-tail / psbj busy mode: inject the mean number of
    // customers per busy period; required for non-Poisson input.
    std::optional<double> e_tau_h;
    int tk_max = 2;       // finite-tk: estimate T_1..T_tk_max
    int means_k_max = 5;  // validate-means: compare E(X_1)..E(X_k)
    std::string psbj_mode = "busy";
    double target_p = 3e-3;         // decomposition: pick x at this tail level
    std::optional<double> decomp_x;  // decomposition: fixed x, skips the pilot
    int k_max = 6, l_max = 6, j_max = 30;  // decomposition cell bounds
    double jump = 0;   // fluid-check: planted service; 0 means 1e4 * b
    int ell_max = 2;   // fluid-check: compare T_1..T_{1+ell_max}
};

// Throws ParseError/DomainError naming the offending key. Does not check
// stability; run_experiment does, so the error carries the computed rho.
void validate_config(const ExperimentConfig& cfg);

std::vector<double> resolve_grid(const GridSpec& g, const DerivedConstants& c);

std::string config_to_json(const ExperimentConfig& cfg);
// Accepts either a bare config object or a full metadata file (its "config"
// member is used). Unknown keys are ParseErrors.
ExperimentConfig config_from_json(const std::string& json_text);

struct CheckLine {
    std::string text;
    bool pass = false;
};

struct RunResult {
    std::vector<std::string> files;  // written files, metadata path last
    std::uint64_t dropped = 0;       // replications lost to the event cap
    bool check_performed = false;
    bool check_passed = true;
    std::vector<CheckLine> checks;
};

// Runs one experiment and writes its report files under cfg.out. Output bytes
// depend only on (config, seed, build), never on the worker count.
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace tailq
