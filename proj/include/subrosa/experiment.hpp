#pragma once

#include <string>
#include <vector>

#include "subrosa/config.hpp"

namespace subrosa {

struct ExperimentReport {
    std::string summary_json;            // metrics, pass/fail, timings
    bool pass = true;
    std::vector<std::string> failures;   // names of failed declared tolerances
};

/// Execute the configured experiment: writes the resolved-config echo, the
/// JSON summary, CSV tables and any requested field files into cfg.out, and
/// returns the report. pass is false iff a declared tolerance failed.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Convergence-study driver: reruns the experiment at `levels` grid/step
/// refinements (doubling each level) and fits the empirical order by least
/// squares on the log-log data.
ExperimentReport run_with_refinement(const ExperimentConfig& cfg, int levels);

/// CLI exit codes: 0 pass, 2 tolerance failure, 3 config error,
/// 4 solver failure, 5 integration failure.
int exit_code_for_exception();

/// Least-squares slope of log(metric) against log(h); the convergence order
/// is the slope (metrics shrink with h).
double fit_order(const std::vector<double>& h, const std::vector<double>& metric);

}  // namespace subrosa
