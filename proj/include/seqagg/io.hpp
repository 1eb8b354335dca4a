#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqagg/core.hpp"
#include "seqagg/eval.hpp"
#include "seqagg/interval.hpp"

namespace seqagg {

/// %.17g: enough digits to round-trip any double.
std::string format_number(double x);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// CSV files. Observations: step,time_days,value. Ensembles:
// step,time_days,model_1,...,model_N. Steps run 1..T without gaps.
ObservationSeries load_observations(const std::filesystem::path& path, SeriesId id);
EnsembleMatrix load_ensemble(const std::filesystem::path& path, SeriesId id);
/// Step times of an ensemble file (the matrix itself does not carry them).
std::vector<double> load_step_times(const std::filesystem::path& path);

std::string observations_csv(const ObservationSeries& obs);
std::string ensemble_csv(const EnsembleMatrix& ens, const std::vector<double>& step_times);

/// Flat `key = value` text; '#' starts a comment, blank lines are ignored.
class KeyValues {
public:
    static KeyValues load(const std::filesystem::path& path);
    static KeyValues parse(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;
    void set(const std::string& key, std::string value);
    const std::map<std::string, std::string>& entries() const { return values_; }
    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
};

/// One series of a data bundle. The manifest (series.cfg) lists, per label,
///   <label>.kind, <label>.units, <label>.stability_threshold and optionally
///   <label>.clamp; the data files are <label>_obs.csv and <label>_ens.csv.
struct SeriesEntry {
    SeriesId id;
    double stability_threshold = 150.0;
    std::optional<Clamp> clamp;
    std::filesystem::path observations;
    std::filesystem::path ensemble;
};

inline constexpr const char* kManifestName = "series.cfg";

std::vector<SeriesEntry> read_manifest(const std::filesystem::path& dir);
std::string manifest_text(const std::vector<SeriesEntry>& entries);
std::filesystem::path observations_path(const std::filesystem::path& dir, const std::string& label);
std::filesystem::path ensemble_path(const std::filesystem::path& dir, const std::string& label);

// Output tables.
std::string trace_csv(const AggregationTrace& trace);
std::string weights_csv(const AggregationTrace& trace);

/// The columns of a trace file, as read back by `evaluate`.
struct TraceTable {
    std::vector<std::size_t> steps;
    std::vector<double> forecast;
    std::vector<double> observation;
    std::vector<double> loss;
    std::vector<double> hyperparameter;
};

TraceTable load_trace(const std::filesystem::path& path);

std::string rmse_header();
std::string rmse_row(const RmseReport& report);

std::string interval_csv(const IntervalSeries& series);
std::string cone_csv(const ScenarioCone& cone, std::size_t first_step);

}  // namespace seqagg
