// seqagg: sequential aggregation of ensemble forecasts.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "seqagg/commands.hpp"

namespace {

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> data;
    std::optional<std::string> series;
    std::optional<std::string> algorithm;
    std::optional<double> lambda;
    std::optional<double> eta;
    std::optional<std::string> grid;
    std::optional<std::size_t> burn_in;
    std::optional<double> split;
    std::optional<std::string> clamp;
    std::optional<double> stability_threshold;
    std::optional<double> radius;
    std::optional<std::size_t> jobs;
    std::optional<std::string> out;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key = value file; flags override it");
    cmd->add_option("--data", f.data, "data directory with series.cfg");
    cmd->add_option("--series", f.series, "comma-separated labels (default: all)");
    cmd->add_option("--algorithm", f.algorithm, "comma-separated: ewa, ridge, lasso, uniform");
    cmd->add_option("--lambda", f.lambda, "fixed Ridge/Lasso regularization");
    cmd->add_option("--eta", f.eta, "fixed EWA learning rate");
    cmd->add_option("--grid", f.grid, "tuning grid lo:hi:count");
    cmd->add_option("--burn-in", f.burn_in, "steps left out of RMSE (default floor(T/4))");
    cmd->add_option("--split", f.split, "learning fraction (default 2/3)");
    cmd->add_option("--clamp", f.clamp, "scenario bounds lo:hi");
    cmd->add_option("--stability-threshold", f.stability_threshold, "noise-estimate threshold, native units");
    cmd->add_option("--radius", f.radius, "comparator ball radius for the Ridge bound (default 1)");
    cmd->add_option("--jobs", f.jobs, "series processed in parallel");
    cmd->add_option("--out", f.out, "output directory (default out)");
}

seqagg::RunConfig build_config(const Flags& f) {
    seqagg::RunConfig c;
    if (f.config) c.merge(seqagg::KeyValues::load(*f.config));
    seqagg::KeyValues kv;
    auto put = [&](const char* key, const auto& value) {
        if (!value) return;
        if constexpr (std::is_same_v<std::decay_t<decltype(*value)>, std::string>)
            kv.set(key, *value);
        else
            kv.set(key, seqagg::format_number(static_cast<double>(*value)));
    };
    put("data", f.data);
    put("series", f.series);
    put("algorithm", f.algorithm);
    put("lambda", f.lambda);
    put("eta", f.eta);
    put("grid", f.grid);
    put("burn_in", f.burn_in);
    put("split", f.split);
    put("clamp", f.clamp);
    put("stability_threshold", f.stability_threshold);
    put("radius", f.radius);
    put("jobs", f.jobs);
    put("out", f.out);
    c.merge(kv);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential aggregation of ensemble forecasts"};
    app.require_subcommand(1);

    Flags online, interval, evaluate, tune;
    auto* c_online = app.add_subcommand("forecast-online", "one-step-ahead aggregation and RMSE table");
    add_run_flags(c_online, online);
    auto* c_interval = app.add_subcommand("forecast-interval", "multi-step interval forecasts (ridge, ewa)");
    add_run_flags(c_interval, interval);
    auto* c_evaluate = app.add_subcommand("evaluate", "RMSE table and regret-bound checks on written traces");
    add_run_flags(c_evaluate, evaluate);
    auto* c_tune = app.add_subcommand("tune", "show tuning grids; with --data, per-step choices");
    add_run_flags(c_tune, tune);

    seqagg::SynthConfig synth;
    std::string synth_out = "data";
    std::string regime = "smooth_pressure";
    auto* c_synth = app.add_subcommand("synth-gen", "write a synthetic data bundle");
    c_synth->add_option("--seed", synth.seed, "generator seed");
    c_synth->add_option("--models", synth.n_models, "ensemble size");
    c_synth->add_option("--steps", synth.n_steps, "steps per series");
    c_synth->add_option("--count", synth.n_series, "number of series");
    c_synth->add_option("--regime", regime, "smooth_pressure, rate_with_breakthrough or rate_with_shutin");
    c_synth->add_flag("--field-layout", synth.field_layout, "cycle pressure/oil/water series with well names");
    c_synth->add_option("--noise", synth.noise_sigma, "observation noise sigma");
    c_synth->add_option("--bias", synth.ensemble_bias, "ensemble offset from the truth");
    c_synth->add_flag("--truth-model", synth.include_truth_model, "model 1 equals the truth");
    c_synth->add_option("--out", synth_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_online->parsed()) return seqagg::cmd_forecast_online(build_config(online), std::cout);
        if (c_interval->parsed()) return seqagg::cmd_forecast_interval(build_config(interval), std::cout);
        if (c_evaluate->parsed()) return seqagg::cmd_evaluate(build_config(evaluate), std::cout);
        if (c_tune->parsed()) return seqagg::cmd_tune(build_config(tune), std::cout);
        if (c_synth->parsed()) {
            synth.regime = seqagg::regime_from_string(regime);
            return seqagg::cmd_synth(synth, synth_out, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "seqagg: " << e.what() << '\n';
        return seqagg::kExitError;
    }
    return seqagg::kExitError;
}
