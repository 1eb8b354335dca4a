#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqagg/core.hpp"
#include "seqagg/interval.hpp"
#include "seqagg/io.hpp"
#include "seqagg/synth.hpp"
#include "seqagg/tuning.hpp"

namespace seqagg {

/// Settings shared by the subcommands. A config file uses the flag names as keys
/// (algorithm, lambda, eta, grid, burn_in, split, clamp, stability_threshold, jobs,
/// out, data, series, radius); flags given on the command line take precedence.
struct RunConfig {
    std::filesystem::path data_dir;
    std::vector<std::string> series;  // empty: every series in the manifest
    std::vector<Algorithm> algorithms;
    std::optional<double> lambda;
    std::optional<double> eta;
    std::optional<HyperGrid> grid;
    std::optional<std::size_t> burn_in;
    double split = 2.0 / 3.0;
    std::optional<Clamp> clamp;
    std::optional<double> stability_threshold;
    double radius = 1.0;  // comparator ball for the Ridge bound check
    std::size_t jobs = 1;
    std::filesystem::path out_dir = "out";

    /// Overwrites the fields named in `kv`; unknown keys are an error.
    void merge(const KeyValues& kv);
    void validate() const;

    /// Fixed hyperparameter for `algorithm`, if one was given.
    std::optional<double> fixed_parameter(Algorithm algorithm) const;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBoundViolated = 3;

/// Per series and algorithm: <label>_<alg>_trace.csv and <label>_<alg>_weights.csv;
/// one rmse_summary.csv row per (series, algorithm). Adaptive tuning unless a fixed
/// lambda / eta is given.
int cmd_forecast_online(const RunConfig& config, std::ostream& log);

/// Per series: <label>_<alg>_interval.csv, <label>_cone.csv and
/// <label>_<alg>_interval.cfg (run metadata). Needs a fixed lambda or eta.
int cmd_forecast_interval(const RunConfig& config, std::ostream& log);

/// Re-reads the traces written by forecast-online, recomputes the RMSE table and
/// checks the regret bound of fixed-parameter EWA and Ridge traces.
/// Returns kExitBoundViolated when any bound fails.
int cmd_evaluate(const RunConfig& config, std::ostream& log);

/// Prints the grid of every requested algorithm. With a data directory, also runs
/// the tuner and writes <label>_<alg>_tune.csv (step,index,hyperparameter).
int cmd_tune(const RunConfig& config, std::ostream& log);

/// Writes a data bundle (manifest plus CSV files) to `out_dir`.
int cmd_synth(const SynthConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; rethrows the first
/// failure in index order once all tasks are done.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace seqagg
