#include "seqagg/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "seqagg/aggregators.hpp"
#include "seqagg/eval.hpp"

namespace seqagg {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(' ');
        const auto b = item.find_last_not_of(' ');
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

double to_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty()) throw std::invalid_argument(key + ": not a number: '" + text + "'");
    return v;
}

std::size_t to_count(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (v < 0 || v != std::floor(v)) throw std::invalid_argument(key + ": not a nonnegative integer: '" + text + "'");
    return static_cast<std::size_t>(v);
}

std::vector<SeriesEntry> selected_series(const RunConfig& config) {
    std::vector<SeriesEntry> all = read_manifest(config.data_dir);
    if (config.series.empty()) return all;
    std::vector<SeriesEntry> out;
    for (const std::string& label : config.series) {
        auto it = std::find_if(all.begin(), all.end(), [&](const SeriesEntry& e) { return e.id.well_label == label; });
        if (it == all.end()) throw Error("series '" + label + "' is not in " + (config.data_dir / kManifestName).string());
        out.push_back(*it);
    }
    return out;
}

ValidatedPair load_pair(const SeriesEntry& e) {
    return validate_pair(load_observations(e.observations, e.id), load_ensemble(e.ensemble, e.id));
}

std::string output_stem(const SeriesEntry& e, Algorithm a) { return e.id.well_label + "_" + to_string(a); }

std::unique_ptr<OnlineForecaster> make_forecaster(const RunConfig& config, Algorithm a, std::size_t n_models) {
    if (a == Algorithm::uniform) return make_fixed_forecaster(a, n_models, 0.0);
    if (const auto fixed = config.fixed_parameter(a)) return make_fixed_forecaster(a, n_models, *fixed);
    return std::make_unique<TunerState>(a, n_models, config.grid ? *config.grid : default_grid(a));
}

std::vector<Algorithm> algorithms_or(const RunConfig& config, std::vector<Algorithm> fallback) {
    return config.algorithms.empty() ? fallback : config.algorithms;
}

}  // namespace

void RunConfig::merge(const KeyValues& kv) {
    for (const auto& [key, value] : kv.entries()) {
        if (key == "data") data_dir = value;
        else if (key == "series") series = split_list(value);
        else if (key == "algorithm") {
            algorithms.clear();
            for (const std::string& a : split_list(value)) algorithms.push_back(algorithm_from_string(a));
        } else if (key == "lambda") lambda = to_double(key, value);
        else if (key == "eta") eta = to_double(key, value);
        else if (key == "grid") grid = HyperGrid::parse(value);
        else if (key == "burn_in") burn_in = to_count(key, value);
        else if (key == "split") split = to_double(key, value);
        else if (key == "clamp") clamp = Clamp::parse(value);
        else if (key == "stability_threshold") stability_threshold = to_double(key, value);
        else if (key == "radius") radius = to_double(key, value);
        else if (key == "jobs") jobs = to_count(key, value);
        else if (key == "out") out_dir = value;
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

void RunConfig::validate() const {
    if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("split must lie in (0, 1)");
    if (lambda && !(*lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (eta && !(*eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (stability_threshold && !(*stability_threshold >= 0.0))
        throw std::invalid_argument("stability threshold must be nonnegative");
    if (jobs == 0) throw std::invalid_argument("jobs must be at least 1");
    if (!data_dir.empty() && !fs::is_directory(data_dir))
        throw std::invalid_argument("data directory does not exist: " + data_dir.string());
}

std::optional<double> RunConfig::fixed_parameter(Algorithm algorithm) const {
    switch (algorithm) {
        case Algorithm::ewa: return eta;
        case Algorithm::ridge:
        case Algorithm::lasso: return lambda;
        case Algorithm::uniform: return 0.0;
    }
    return std::nullopt;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(std::max<std::size_t>(jobs, 1), count);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

int cmd_forecast_online(const RunConfig& config, std::ostream& log) {
    config.validate();
    const std::vector<SeriesEntry> entries = selected_series(config);
    const std::vector<Algorithm> algorithms =
        algorithms_or(config, {Algorithm::ewa, Algorithm::ridge, Algorithm::lasso});
    std::vector<std::string> rows(entries.size());
    std::mutex log_mutex;

    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
        const SeriesEntry& e = entries[i];
        const ValidatedPair pair = load_pair(e);
        const std::size_t burn_in = config.burn_in.value_or(default_burn_in(pair.n_steps()));
        const BestModel best = best_model(pair, burn_in);
        const ConvexOracle oracle = best_convex_oracle(pair, burn_in);
        for (Algorithm a : algorithms) {
            auto forecaster = make_forecaster(config, a, pair.n_models());
            const AggregationTrace trace = run_online(pair, *forecaster);
            const std::string stem = output_stem(e, a);
            write_file_atomic(config.out_dir / (stem + "_trace.csv"), trace_csv(trace));
            write_file_atomic(config.out_dir / (stem + "_weights.csv"), weights_csv(trace));
            RmseReport r;
            r.id = e.id;
            r.algorithm = a;
            r.burn_in = burn_in;
            r.rmse_algorithm = rmse(trace.forecasts(), pair.observations().values(), burn_in);
            r.rmse_best_model = best.rmse;
            r.best_model_index = best.index;
            r.rmse_best_convex = oracle.rmse;
            r.convex_oracle_weights = oracle.weights;
            rows[i] += rmse_row(r);
            std::lock_guard lock(log_mutex);
            log << fmt::format("{} {}: rmse {:.6g} (best model {:.6g}, best convex {:.6g})\n", e.id.well_label,
                               to_string(a), r.rmse_algorithm, r.rmse_best_model, r.rmse_best_convex);
        }
    });

    std::string table = rmse_header();
    for (const std::string& r : rows) table += r;
    write_file_atomic(config.out_dir / "rmse_summary.csv", table);
    return kExitOk;
}

int cmd_forecast_interval(const RunConfig& config, std::ostream& log) {
    config.validate();
    const std::vector<Algorithm> algorithms = algorithms_or(config, {Algorithm::ridge, Algorithm::ewa});
    for (Algorithm a : algorithms) {
        if (a != Algorithm::ridge && a != Algorithm::ewa)
            throw UnsupportedAlgorithm("forecast-interval supports ridge and ewa, not " + to_string(a));
        if (!config.fixed_parameter(a))
            throw std::invalid_argument(fmt::format("forecast-interval needs a fixed {}",
                                                    a == Algorithm::ewa ? "--eta" : "--lambda"));
    }
    const std::vector<SeriesEntry> entries = selected_series(config);
    std::mutex log_mutex;

    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
        const SeriesEntry& e = entries[i];
        const ObservationSeries obs = load_observations(e.observations, e.id);
        const EnsembleMatrix ens = load_ensemble(e.ensemble, e.id);
        const std::size_t total = ens.n_steps();
        const auto learning_steps = static_cast<std::size_t>(std::floor(config.split * static_cast<double>(total)));
        if (learning_steps == 0 || learning_steps >= total)
            throw InsufficientHistory(e.id.well_label + ": split leaves no learning or no prediction steps");
        if (obs.size() < learning_steps) throw LengthMismatch(learning_steps, obs.size());
        for (std::size_t t = 0; t < obs.size(); ++t)
            if (!std::isfinite(obs[t])) throw NonFiniteValue(0, t + 1);
        for (Eigen::Index j = 0; j < ens.values().rows(); ++j)
            for (Eigen::Index t = 0; t < ens.values().cols(); ++t)
                if (!std::isfinite(ens.values()(j, t)))
                    throw NonFiniteValue(static_cast<std::size_t>(j) + 1, static_cast<std::size_t>(t) + 1);

        IntervalProblem problem;
        problem.learning.assign(obs.values().begin(), obs.values().begin() + static_cast<std::ptrdiff_t>(learning_steps));
        problem.forecasts = ens.values();
        if (obs.size() > learning_steps) problem.matching_observation = obs[learning_steps];

        const Clamp clamp = config.clamp ? *config.clamp : e.clamp.value_or(Clamp{});
        const ScenarioCone cone = build_cone(problem.learning, problem.prediction_forecasts(), clamp);
        const double threshold = config.stability_threshold.value_or(e.stability_threshold);
        const NoiseEstimate noise = estimate_noise(problem.learning, threshold);
        const std::size_t first_step = learning_steps + 1;
        write_file_atomic(config.out_dir / (e.id.well_label + "_cone.csv"), cone_csv(cone, first_step));

        for (Algorithm a : algorithms) {
            const double parameter = *config.fixed_parameter(a);
            KeyValues meta;
            IntervalSeries result;
            if (a == Algorithm::ridge) {
                const ModelFilter filter = filter_models(problem.learning, problem.learning_forecasts());
                result = ridge_interval_forecast(problem.select_models(filter.kept), cone, parameter, noise.sigma_max);
                std::string kept;
                for (std::size_t j : filter.kept) kept += (kept.empty() ? "" : ",") + std::to_string(j + 1);
                meta.set("kept_models", kept);
                meta.set("best_learning_rmse", format_number(filter.best_rmse));
                meta.set("zero_rmse_best", filter.zero_rmse_best ? "true" : "false");
            } else {
                result = ewa_interval_forecast(problem, cone, parameter, noise.sigma_max);
            }
            meta.set("series", e.id.well_label);
            meta.set("units", e.id.units);
            meta.set("algorithm", to_string(a));
            meta.set("hyperparameter", format_number(parameter));
            meta.set("learning_steps", std::to_string(learning_steps));
            meta.set("first_step", std::to_string(first_step));
            meta.set("horizon", std::to_string(cone.horizon() - 1));
            meta.set("cone_anchor", format_number(cone.anchor));
            meta.set("slope_down", format_number(cone.slope.down));
            meta.set("slope_up", format_number(cone.slope.up));
            meta.set("stability_threshold", format_number(threshold));
            meta.set("stable_steps", std::to_string(noise.stable_steps.size()));
            meta.set("sigma_max", format_number(noise.sigma_max));
            meta.set("matching", problem.matching_observation ? "applied" : "skipped");
            meta.set("shift", format_number(result.shift));
            meta.set("order", "enlarge_then_shift");

            const std::string stem = output_stem(e, a);
            write_file_atomic(config.out_dir / (stem + "_interval.csv"), interval_csv(result));
            write_file_atomic(config.out_dir / (stem + "_interval.cfg"), meta.to_text());
            std::lock_guard lock(log_mutex);
            log << fmt::format("{} {}: {} interval steps from step {}, sigma_max {:.6g}, shift {:.6g}\n",
                               e.id.well_label, to_string(a), result.size(), first_step, noise.sigma_max,
                               result.shift);
        }
    });
    return kExitOk;
}

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
    config.validate();
    const std::vector<SeriesEntry> entries = selected_series(config);
    const std::vector<Algorithm> algorithms =
        algorithms_or(config, {Algorithm::ewa, Algorithm::ridge, Algorithm::lasso});
    std::vector<std::string> rows(entries.size());
    std::vector<std::string> messages(entries.size());
    std::vector<char> violated(entries.size(), 0);

    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
        const SeriesEntry& e = entries[i];
        const ValidatedPair pair = load_pair(e);
        const std::size_t burn_in = config.burn_in.value_or(default_burn_in(pair.n_steps()));
        for (Algorithm a : algorithms) {
            const fs::path path = config.out_dir / (output_stem(e, a) + "_trace.csv");
            const TraceTable table = load_trace(path);
            if (table.steps.size() != pair.n_steps()) throw LengthMismatch(pair.n_steps(), table.steps.size());
            AggregationTrace trace;
            for (std::size_t t = 0; t < table.steps.size(); ++t) {
                if (table.observation[t] != pair.observations()[t])
                    throw Error(fmt::format("{}: observation at step {} differs from the data", path.string(), t + 1));
                WeightVector w = WeightVector::uniform(pair.n_models(), a, WeightFlavor::linear,
                                                       table.hyperparameter[t], t + 1);
                trace.append(t + 1, std::move(w), table.forecast[t], pair.observations()[t], table.hyperparameter[t]);
            }
            RmseReport r = make_rmse_report(pair, trace, burn_in);
            r.algorithm = a;
            rows[i] += rmse_row(r);

            // The regret bounds hold for a constant hyperparameter.
            const bool constant = std::all_of(table.hyperparameter.begin(), table.hyperparameter.end(),
                                              [&](double h) { return h == table.hyperparameter.front(); });
            if (!constant || table.steps.empty() || (a != Algorithm::ewa && a != Algorithm::ridge)) continue;
            const double parameter = table.hyperparameter.front();
            const BoundReport b = a == Algorithm::ewa ? check_ewa_bound(pair, trace, parameter)
                                                      : check_ridge_bound(pair, trace, parameter, config.radius);
            messages[i] += fmt::format("{} {}: average loss {:.17g}, bound {:.17g}, margin {:.17g} [{}]\n",
                                       e.id.well_label, to_string(a), b.average_loss, b.bound, b.margin,
                                       b.passed ? "ok" : "VIOLATED");
            if (!b.passed) violated[i] = 1;
        }
    });

    std::string table = rmse_header();
    for (const std::string& r : rows) table += r;
    write_file_atomic(config.out_dir / "evaluation_summary.csv", table);
    for (const std::string& m : messages) log << m;
    const bool any = std::any_of(violated.begin(), violated.end(), [](char v) { return v != 0; });
    if (any) log << "regret bound violated\n";
    return any ? kExitBoundViolated : kExitOk;
}

int cmd_tune(const RunConfig& config, std::ostream& log) {
    config.validate();
    const std::vector<Algorithm> algorithms =
        algorithms_or(config, {Algorithm::ewa, Algorithm::ridge, Algorithm::lasso});
    for (Algorithm a : algorithms) {
        if (a == Algorithm::uniform) throw UnsupportedAlgorithm("uniform has no hyperparameter to tune");
        const HyperGrid g = config.grid ? *config.grid : default_grid(a);
        log << fmt::format("{} grid: lo = {:.17g}, hi = {:.17g}, count = {}, log-spaced\n", to_string(a), g.lo, g.hi,
                           g.count);
    }
    if (config.data_dir.empty()) return kExitOk;

    const std::vector<SeriesEntry> entries = selected_series(config);
    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
        const SeriesEntry& e = entries[i];
        const ValidatedPair pair = load_pair(e);
        for (Algorithm a : algorithms) {
            TunerState tuner(a, pair.n_models(), config.grid ? *config.grid : default_grid(a));
            std::string out = "step,index,hyperparameter\n";
            for (std::size_t t = 0; t < pair.n_steps(); ++t) {
                const Eigen::VectorXd column = pair.ensemble().column(t);
                const Selection s = tuner.select_and_forecast(t + 1, column);
                out += fmt::format("{},{},{:.17g}\n", t + 1, s.index + 1, s.hyperparameter);
                tuner.update(pair.observations()[t], column);
            }
            write_file_atomic(config.out_dir / (output_stem(e, a) + "_tune.csv"), out);
        }
    });
    return kExitOk;
}

int cmd_synth(const SynthConfig& config, const fs::path& out_dir, std::ostream& log) {
    const std::vector<SynthSeries> bundle = generate(config);
    std::vector<SeriesEntry> entries;
    for (const SynthSeries& s : bundle) {
        const std::string& label = s.observations.id().well_label;
        SeriesEntry e;
        e.id = s.observations.id();
        e.stability_threshold = s.stability_threshold;
        const RegimeRange range = regime_range(s.regime);
        e.clamp = Clamp{range.lo, range.hi};
        e.observations = observations_path(out_dir, label);
        e.ensemble = ensemble_path(out_dir, label);
        write_file_atomic(e.observations, observations_csv(s.observations));
        write_file_atomic(e.ensemble, ensemble_csv(s.ensemble, s.observations.step_times()));
        entries.push_back(std::move(e));
    }
    write_file_atomic(out_dir / kManifestName, manifest_text(entries));
    log << fmt::format("wrote {} series ({} models, {} steps) to {}\n", bundle.size(), config.n_models,
                       config.n_steps, out_dir.string());
    return kExitOk;
}

}  // namespace seqagg
