#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "seqagg/commands.hpp"

using namespace seqagg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("seqagg_cmd_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

SynthConfig small_bundle() {
    SynthConfig c;
    c.seed = 17;
    c.n_models = 6;
    c.n_steps = 60;
    c.n_series = 3;
    c.field_layout = true;
    c.noise_sigma = 2.0;
    return c;
}

}  // namespace

TEST_CASE("synth command is deterministic") {
    TempDir a, b;
    std::ostringstream log;
    CHECK(cmd_synth(small_bundle(), a.path, log) == kExitOk);
    CHECK(cmd_synth(small_bundle(), b.path, log) == kExitOk);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a.path)) {
        CHECK(slurp(entry.path()) == slurp(b.path / entry.path().filename()));
        ++files;
    }
    CHECK(files == 7);
}

TEST_CASE("forecast-online writes traces and the rmse table") {
    TempDir data, out;
    std::ostringstream log;
    cmd_synth(small_bundle(), data.path, log);
    RunConfig c;
    c.data_dir = data.path;
    c.out_dir = out.path;
    c.grid = HyperGrid::log_spaced(1e-6, 1e6, 7);
    CHECK(cmd_forecast_online(c, log) == kExitOk);
    const std::string table = slurp(out.path / "rmse_summary.csv");
    CHECK(lines(table) == 1 + 3 * 3);
    CHECK(table.find(",15,") != std::string::npos);  // burn-in floor(60 / 4)
    for (const char* stem : {"BHP_I1_ewa", "BHP_I2_ridge", "BHP_I3_lasso"}) {
        CHECK(lines(slurp(out.path / (std::string(stem) + "_trace.csv"))) == 61);
        CHECK(lines(slurp(out.path / (std::string(stem) + "_weights.csv"))) == 61);
    }

    // same inputs, same bytes
    TempDir again;
    c.out_dir = again.path;
    cmd_forecast_online(c, log);
    CHECK(slurp(again.path / "rmse_summary.csv") == table);
    CHECK(slurp(again.path / "BHP_I2_lasso_trace.csv") == slurp(out.path / "BHP_I2_lasso_trace.csv"));
}

TEST_CASE("perfect expert keeps EWA at the best model") {
    TempDir data, out;
    SynthConfig s = small_bundle();
    s.noise_sigma = 0.0;
    s.include_truth_model = true;
    std::ostringstream log;
    cmd_synth(s, data.path, log);
    RunConfig c;
    c.data_dir = data.path;
    c.out_dir = out.path;
    c.algorithms = {Algorithm::ewa};
    c.eta = 1.0;
    c.burn_in = 40;
    cmd_forecast_online(c, log);
    std::istringstream table(slurp(out.path / "rmse_summary.csv"));
    std::string line;
    std::getline(table, line);
    while (std::getline(table, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        CHECK(std::stod(f[6]) == 0.0);
        CHECK(std::stod(f[5]) < 1e-6);
    }
}

TEST_CASE("evaluate passes clean traces and rejects a tampered one") {
    TempDir data, out;
    std::ostringstream log;
    SynthConfig s = small_bundle();
    s.n_series = 1;
    cmd_synth(s, data.path, log);
    RunConfig c;
    c.data_dir = data.path;
    c.out_dir = out.path;
    c.algorithms = {Algorithm::ewa, Algorithm::ridge};
    c.eta = 1e-7;
    c.lambda = 100.0;
    c.radius = 2.0;
    cmd_forecast_online(c, log);
    CHECK(cmd_evaluate(c, log) == kExitOk);
    CHECK(fs::exists(out.path / "evaluation_summary.csv"));

    const fs::path trace = out.path / "BHP_I1_ewa_trace.csv";
    std::istringstream in(slurp(trace));
    std::string text, line;
    std::getline(in, line);
    text = line + "\n";
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        f[1] = format_number(std::stod(f[1]) + 5000.0);
        text += f[0] + "," + f[1] + "," + f[2] + "," + f[3] + "," + f[4] + "\n";
    }
    write_file_atomic(trace, text);
    std::ostringstream bad;
    CHECK(cmd_evaluate(c, bad) == kExitBoundViolated);
    CHECK(bad.str().find("VIOLATED") != std::string::npos);
}

TEST_CASE("forecast-interval outputs") {
    TempDir data, out;
    std::ostringstream log;
    SynthConfig s = small_bundle();
    s.n_series = 1;
    cmd_synth(s, data.path, log);
    RunConfig c;
    c.data_dir = data.path;
    c.out_dir = out.path;
    c.lambda = 10.0;
    c.eta = 1e-6;
    CHECK(cmd_forecast_interval(c, log) == kExitOk);
    for (const char* f : {"BHP_I1_ridge_interval.csv", "BHP_I1_ewa_interval.csv", "BHP_I1_cone.csv",
                          "BHP_I1_ridge_interval.cfg"}) {
        CHECK(fs::exists(out.path / f));
    }
    // 40 learning steps out of 60: steps 41..60
    CHECK(lines(slurp(out.path / "BHP_I1_ridge_interval.csv")) == 21);
    const KeyValues meta = KeyValues::load(out.path / "BHP_I1_ewa_interval.cfg");
    CHECK(meta.get("order") == "enlarge_then_shift");
    CHECK(meta.get("learning_steps") == "40");

    c.algorithms = {Algorithm::lasso};
    CHECK_THROWS_AS(cmd_forecast_interval(c, log), UnsupportedAlgorithm);
    c.algorithms = {Algorithm::ridge};
    c.lambda.reset();
    CHECK_THROWS(cmd_forecast_interval(c, log));
}

TEST_CASE("tune echoes the default grids") {
    std::ostringstream log;
    RunConfig c;
    CHECK(cmd_tune(c, log) == kExitOk);
    const std::string text = log.str();
    CHECK(text.find("ewa grid: lo = 9.9999999999999995e-21, hi = 10000000000, count = 300") != std::string::npos);
    CHECK(text.find("lasso grid: lo = 9.9999999999999995e-21, hi = 10000000000, count = 100") != std::string::npos);
    CHECK(text.find("ridge grid: lo = 1.0000000000000001e-30, hi = 1e+30, count = 100") != std::string::npos);
}

TEST_CASE("config merging and validation") {
    RunConfig c;
    c.merge(KeyValues::parse("algorithm = ridge, ewa\nlambda = 2\nsplit = 0.5\njobs = 3\n"));
    CHECK(c.algorithms == std::vector<Algorithm>{Algorithm::ridge, Algorithm::ewa});
    CHECK(c.fixed_parameter(Algorithm::ridge) == 2.0);
    CHECK_FALSE(c.fixed_parameter(Algorithm::ewa).has_value());
    CHECK(c.jobs == 3);
    CHECK_NOTHROW(c.validate());
    CHECK_THROWS(c.merge(KeyValues::parse("colour = red\n")));
    c.split = 1.0;
    CHECK_THROWS(c.validate());
    c.split = 0.5;
    c.data_dir = "/nonexistent/dir";
    CHECK_THROWS(c.validate());
}

TEST_CASE("parallel_for runs every index and reports failures") {
    std::atomic<int> sum{0};
    parallel_for(100, 4, [&](std::size_t i) { sum += static_cast<int>(i); });
    CHECK(sum == 4950);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw Error("boom"); }), Error);
}
