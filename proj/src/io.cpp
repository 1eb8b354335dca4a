#include "seqagg/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/format.h>

namespace seqagg {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& text, const std::string& path, std::size_t line) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (!text.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (text.empty() || ec != std::errc() || ptr != end)
        throw ParseError(path, line, fmt::format("not a number: '{}'", text));
    return v;
}

std::size_t parse_step(const std::string& text, const std::string& path, std::size_t line) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(path, line, fmt::format("not a step number: '{}'", text));
    return v;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based file line of each row
};

Table read_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    Table t;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        if (t.header.empty()) {
            t.header = split_row(line);
            continue;
        }
        t.rows.push_back(split_row(line));
        t.lines.push_back(n);
        if (t.rows.back().size() != t.header.size())
            throw ParseError(path.string(), n,
                             fmt::format("expected {} fields, found {}", t.header.size(), t.rows.back().size()));
    }
    if (t.header.empty()) throw ParseError(path.string(), 1, "missing header");
    return t;
}

// Checks the step column is 1..T and returns the time column.
std::vector<double> steps_and_times(const Table& t, const std::string& path) {
    std::vector<double> times;
    times.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t step = parse_step(t.rows[i][0], path, t.lines[i]);
        if (step != i + 1) throw NonContiguousSteps(path, i + 1);
        times.push_back(parse_double(t.rows[i][1], path, t.lines[i]));
    }
    return times;
}

void expect_column(const Table& t, std::size_t i, const std::string& name, const std::string& path) {
    if (t.header.size() <= i || t.header[i] != name)
        throw ParseError(path, 1, fmt::format("header column {} must be '{}'", i + 1, name));
}

}  // namespace

std::string format_number(double x) { return fmt::format("{:.17g}", x); }

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

ObservationSeries load_observations(const fs::path& path, SeriesId id) {
    const std::string p = path.string();
    const Table t = read_table(path);
    expect_column(t, 0, "step", p);
    expect_column(t, 1, "time_days", p);
    expect_column(t, 2, "value", p);
    if (t.header.size() != 3) throw ParseError(p, 1, "observation file has exactly 3 columns");
    std::vector<double> times = steps_and_times(t, p);
    std::vector<double> values;
    values.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) values.push_back(parse_double(t.rows[i][2], p, t.lines[i]));
    return ObservationSeries(std::move(id), std::move(values), std::move(times));
}

EnsembleMatrix load_ensemble(const fs::path& path, SeriesId id) {
    const std::string p = path.string();
    const Table t = read_table(path);
    expect_column(t, 0, "step", p);
    expect_column(t, 1, "time_days", p);
    const std::size_t n = t.header.size() - 2;
    if (t.header.size() < 3) throw ParseError(p, 1, "ensemble file has no model columns");
    for (std::size_t j = 0; j < n; ++j) expect_column(t, j + 2, fmt::format("model_{}", j + 1), p);
    steps_and_times(t, p);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
            values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                parse_double(t.rows[i][j + 2], p, t.lines[i]);
    return EnsembleMatrix(std::move(id), std::move(values));
}

std::vector<double> load_step_times(const fs::path& path) {
    const Table t = read_table(path);
    expect_column(t, 0, "step", path.string());
    expect_column(t, 1, "time_days", path.string());
    return steps_and_times(t, path.string());
}

std::string observations_csv(const ObservationSeries& obs) {
    std::string out = "step,time_days,value\n";
    for (std::size_t t = 0; t < obs.size(); ++t)
        out += fmt::format("{},{:.17g},{:.17g}\n", t + 1, obs.step_times()[t], obs[t]);
    return out;
}

std::string ensemble_csv(const EnsembleMatrix& ens, const std::vector<double>& step_times) {
    if (step_times.size() != ens.n_steps()) throw LengthMismatch(ens.n_steps(), step_times.size());
    std::string out = "step,time_days";
    for (std::size_t j = 0; j < ens.n_models(); ++j) out += fmt::format(",model_{}", j + 1);
    out += '\n';
    const Eigen::MatrixXd& m = ens.values();
    for (std::size_t t = 0; t < ens.n_steps(); ++t) {
        out += fmt::format("{},{:.17g}", t + 1, step_times[t]);
        for (Eigen::Index j = 0; j < m.rows(); ++j) out += fmt::format(",{:.17g}", m(j, static_cast<Eigen::Index>(t)));
        out += '\n';
    }
    return out;
}

KeyValues KeyValues::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError(origin, n, "expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ParseError(origin, n, "empty key");
        if (kv.has(key)) throw ParseError(origin, n, "duplicate key '" + key + "'");
        kv.values_[key] = trim(body.substr(eq + 1));
    }
    return kv;
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

void KeyValues::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

std::string KeyValues::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

fs::path observations_path(const fs::path& dir, const std::string& label) { return dir / (label + "_obs.csv"); }
fs::path ensemble_path(const fs::path& dir, const std::string& label) { return dir / (label + "_ens.csv"); }

std::vector<SeriesEntry> read_manifest(const fs::path& dir) {
    const fs::path path = dir / kManifestName;
    const KeyValues kv = KeyValues::load(path);
    std::map<std::string, std::map<std::string, std::string>> by_label;
    for (const auto& [key, value] : kv.entries()) {
        const auto dot = key.rfind('.');
        if (dot == std::string::npos || dot == 0)
            throw ParseError(path.string(), 0, "manifest key must be <label>.<field>: '" + key + "'");
        by_label[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
    std::vector<SeriesEntry> out;
    for (const auto& [label, fields] : by_label) {
        auto field = [&](const std::string& name) -> std::string {
            const auto it = fields.find(name);
            if (it == fields.end()) throw ParseError(path.string(), 0, label + ": missing " + name);
            return it->second;
        };
        for (const auto& [name, value] : fields)
            if (name != "kind" && name != "units" && name != "stability_threshold" && name != "clamp")
                throw ParseError(path.string(), 0, label + ": unknown field " + name);
        SeriesEntry e;
        e.id = SeriesId(property_kind_from_string(field("kind")), label, field("units"));
        if (fields.count("stability_threshold"))
            e.stability_threshold = parse_double(fields.at("stability_threshold"), path.string(), 0);
        if (fields.count("clamp")) e.clamp = Clamp::parse(fields.at("clamp"));
        e.observations = observations_path(dir, label);
        e.ensemble = ensemble_path(dir, label);
        out.push_back(std::move(e));
    }
    return out;
}

std::string manifest_text(const std::vector<SeriesEntry>& entries) {
    std::string out;
    for (const SeriesEntry& e : entries) {
        const std::string& l = e.id.well_label;
        out += fmt::format("{}.kind = {}\n{}.units = {}\n{}.stability_threshold = {:.17g}\n", l,
                           to_string(e.id.kind), l, e.id.units, l, e.stability_threshold);
        if (e.clamp) out += fmt::format("{}.clamp = {:.17g}:{:.17g}\n", l, e.clamp->lo, e.clamp->hi);
    }
    return out;
}

std::string trace_csv(const AggregationTrace& trace) {
    std::string out = "step,forecast,observation,loss,hyperparameter\n";
    for (const TraceRecord& r : trace.records())
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.step, r.forecast, r.observation, r.loss,
                           r.hyperparameter);
    return out;
}

std::string weights_csv(const AggregationTrace& trace) {
    std::string out = "step";
    const std::size_t n = trace.empty() ? 0 : trace[0].weights.size();
    for (std::size_t j = 0; j < n; ++j) out += fmt::format(",w_{}", j + 1);
    out += '\n';
    for (const TraceRecord& r : trace.records()) {
        out += fmt::format("{}", r.step);
        for (Eigen::Index j = 0; j < r.weights.weights.size(); ++j) out += fmt::format(",{:.17g}", r.weights.weights[j]);
        out += '\n';
    }
    return out;
}

TraceTable load_trace(const fs::path& path) {
    const std::string p = path.string();
    const Table t = read_table(path);
    const char* names[] = {"step", "forecast", "observation", "loss", "hyperparameter"};
    for (std::size_t i = 0; i < 5; ++i) expect_column(t, i, names[i], p);
    TraceTable out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t step = parse_step(t.rows[i][0], p, t.lines[i]);
        if (step != i + 1) throw NonContiguousSteps(p, i + 1);
        out.steps.push_back(step);
        out.forecast.push_back(parse_double(t.rows[i][1], p, t.lines[i]));
        out.observation.push_back(parse_double(t.rows[i][2], p, t.lines[i]));
        out.loss.push_back(parse_double(t.rows[i][3], p, t.lines[i]));
        out.hyperparameter.push_back(parse_double(t.rows[i][4], p, t.lines[i]));
    }
    return out;
}

std::string rmse_header() {
    return "series,kind,units,algorithm,burn_in,rmse_algorithm,rmse_best_model,best_model,rmse_best_convex,"
           "ratio_to_best_convex,ratio_to_best_model\n";
}

std::string rmse_row(const RmseReport& r) {
    return fmt::format("{},{},{},{},{},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g}\n", r.id.well_label,
                       to_string(r.id.kind), r.id.units, to_string(r.algorithm), r.burn_in, r.rmse_algorithm,
                       r.rmse_best_model, r.best_model_index + 1, r.rmse_best_convex,
                       r.rmse_algorithm / r.rmse_best_convex, r.rmse_algorithm / r.rmse_best_model);
}

std::string interval_csv(const IntervalSeries& s) {
    std::string out = "step,lo,hi,center,sigma_applied,shift\n";
    for (std::size_t k = 0; k < s.size(); ++k)
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.first_step + k, s.intervals[k].lo,
                           s.intervals[k].hi, s.center(k), s.sigma_applied, s.shift);
    return out;
}

std::string cone_csv(const ScenarioCone& cone, std::size_t first_step) {
    std::string out = "step,cone_lo,cone_hi\n";
    for (std::size_t k = 0; k < cone.horizon(); ++k)
        out += fmt::format("{},{:.17g},{:.17g}\n", first_step + k, cone.intervals[k].lo, cone.intervals[k].hi);
    return out;
}

}  // namespace seqagg
