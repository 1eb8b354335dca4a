#include "seqagg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace seqagg {

namespace {

constexpr double kDaysPerRun = 3652.5;  // ten years over the whole grid

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Layout {
    Regime regime;
    PropertyKind kind;
    std::string label;
    std::string units;
};

Layout layout_for(const SynthConfig& config, std::size_t i) {
    if (config.field_layout) {
        const std::size_t slot = i % 70;
        const std::size_t cycle = i / 70;
        const std::string suffix = cycle == 0 ? "" : fmt::format("_{}", cycle + 1);
        if (slot < 10)
            return {Regime::smooth_pressure, PropertyKind::bottomhole_pressure, fmt::format("BHP_I{}{}", slot + 1, suffix), "psi"};
        if (slot < 30)
            return {Regime::smooth_pressure, PropertyKind::bottomhole_pressure, fmt::format("BHP_P{}{}", slot - 9, suffix), "psi"};
        if (slot < 50)
            return {Regime::rate_with_shutin, PropertyKind::oil_rate, fmt::format("QO_P{}{}", slot - 29, suffix), "bbl/day"};
        return {Regime::rate_with_breakthrough, PropertyKind::water_rate, fmt::format("QW_P{}{}", slot - 49, suffix), "bbl/day"};
    }
    switch (config.regime) {
        case Regime::smooth_pressure:
            return {config.regime, PropertyKind::bottomhole_pressure, fmt::format("BHP_P{}", i + 1), "psi"};
        case Regime::rate_with_breakthrough:
            return {config.regime, PropertyKind::water_rate, fmt::format("QW_P{}", i + 1), "bbl/day"};
        case Regime::rate_with_shutin:
            return {config.regime, PropertyKind::oil_rate, fmt::format("QO_P{}", i + 1), "bbl/day"};
    }
    throw std::invalid_argument("unknown regime");
}

// Shape parameters of one trajectory. The truth draws one set; each model draws a
// perturbed copy, so models differ in timing as well as in level.
struct Shape {
    double level;
    double amplitude;
    double timescale;
    double event;       // breakthrough / shut-in onset, in [0, 1]
    double duration;    // shut-in length, in [0, 1]
    double wiggle;
    double phase;
};

double shape_value(Regime regime, const Shape& s, double u) {
    switch (regime) {
        case Regime::smooth_pressure:
            return s.level - s.amplitude * (1.0 - std::exp(-u / s.timescale)) +
                   s.wiggle * std::sin(2.0 * std::numbers::pi * (1.5 * u + s.phase));
        case Regime::rate_with_breakthrough:
            if (u < s.event) return 0.0;
            // jump at breakthrough, then saturating rise
            return s.amplitude * (0.3 + 0.7 * (1.0 - std::exp(-(u - s.event) / s.timescale))) +
                   s.wiggle * std::sin(2.0 * std::numbers::pi * (2.0 * u + s.phase));
        case Regime::rate_with_shutin:
            if (u >= s.event && u < s.event + s.duration) return 0.0;
            return s.level * std::exp(-u / s.timescale) +
                   s.wiggle * std::sin(2.0 * std::numbers::pi * (2.0 * u + s.phase));
    }
    return 0.0;
}

Shape draw_truth(Regime regime, PortableRng& rng) {
    Shape s{};
    s.phase = rng.uniform();
    switch (regime) {
        case Regime::smooth_pressure:
            s.level = rng.uniform(1800.0, 2400.0);
            s.amplitude = rng.uniform(200.0, 800.0);
            s.timescale = rng.uniform(0.1, 0.5);
            s.wiggle = rng.uniform(10.0, 40.0);
            break;
        case Regime::rate_with_breakthrough:
            s.amplitude = rng.uniform(800.0, 1700.0);
            s.timescale = rng.uniform(0.1, 0.4);
            s.event = rng.uniform(0.2, 0.55);
            s.wiggle = rng.uniform(5.0, 30.0);
            break;
        case Regime::rate_with_shutin:
            s.level = rng.uniform(1200.0, 2000.0);
            s.timescale = rng.uniform(0.6, 2.0);
            s.event = rng.uniform(0.45, 0.75);
            s.duration = rng.uniform(0.05, 0.15);
            s.wiggle = rng.uniform(5.0, 30.0);
            break;
    }
    return s;
}

Shape perturb(Regime regime, const Shape& truth, PortableRng& rng) {
    Shape s = truth;
    s.phase = truth.phase + 0.1 * rng.normal();
    s.wiggle = truth.wiggle * rng.uniform(0.5, 1.5);
    s.timescale = truth.timescale * std::exp(0.25 * rng.normal());
    switch (regime) {
        case Regime::smooth_pressure:
            s.level = truth.level + 60.0 * rng.normal();
            s.amplitude = truth.amplitude * std::exp(0.15 * rng.normal());
            break;
        case Regime::rate_with_breakthrough:
            s.amplitude = truth.amplitude * std::exp(0.2 * rng.normal());
            s.event = std::clamp(truth.event + 0.08 * rng.normal(), 0.05, 0.95);
            break;
        case Regime::rate_with_shutin:
            s.level = truth.level * std::exp(0.1 * rng.normal());
            s.event = std::clamp(truth.event + 0.05 * rng.normal(), 0.05, 0.9);
            s.duration = truth.duration * rng.uniform(0.7, 1.3);
            break;
    }
    return s;
}

}  // namespace

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::smooth_pressure: return "smooth_pressure";
        case Regime::rate_with_breakthrough: return "rate_with_breakthrough";
        case Regime::rate_with_shutin: return "rate_with_shutin";
    }
    return "smooth_pressure";
}

Regime regime_from_string(const std::string& text) {
    if (text == "smooth_pressure") return Regime::smooth_pressure;
    if (text == "rate_with_breakthrough") return Regime::rate_with_breakthrough;
    if (text == "rate_with_shutin") return Regime::rate_with_shutin;
    throw std::invalid_argument("unknown regime: " + text);
}

RegimeRange regime_range(Regime regime) {
    switch (regime) {
        case Regime::smooth_pressure: return {500.0, 3000.0};
        case Regime::rate_with_breakthrough:
        case Regime::rate_with_shutin: return {0.0, 2500.0};
    }
    return {0.0, 0.0};
}

void SynthConfig::validate() const {
    if (n_models < 2) throw std::invalid_argument("synth: need at least 2 models");
    if (n_steps < 40) throw std::invalid_argument("synth: need at least 40 steps");
    if (n_series < 1) throw std::invalid_argument("synth: need at least 1 series");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synth: noise sigma must be nonnegative");
    if (!std::isfinite(ensemble_bias)) throw std::invalid_argument("synth: bias must be finite");
}

PortableRng::PortableRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t PortableRng::next() { return engine_(); }

double PortableRng::uniform() {
    // top 53 bits -> [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double PortableRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double PortableRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::vector<SynthSeries> generate(const SynthConfig& config) {
    config.validate();
    std::vector<SynthSeries> out;
    out.reserve(config.n_series);
    const std::size_t n_steps = config.n_steps;
    std::vector<double> times(n_steps);
    for (std::size_t t = 0; t < n_steps; ++t)
        times[t] = kDaysPerRun * static_cast<double>(t + 1) / static_cast<double>(n_steps);

    for (std::size_t i = 0; i < config.n_series; ++i) {
        const Layout layout = layout_for(config, i);
        const RegimeRange range = regime_range(layout.regime);
        auto clamp = [&](double v) { return std::clamp(v, range.lo, range.hi); };
        PortableRng rng(splitmix(config.seed ^ splitmix(i + 1)));

        const Shape truth_shape = draw_truth(layout.regime, rng);
        std::vector<double> truth(n_steps);
        for (std::size_t t = 0; t < n_steps; ++t) {
            const double u = static_cast<double>(t) / static_cast<double>(n_steps - 1);
            truth[t] = clamp(shape_value(layout.regime, truth_shape, u));
        }

        Eigen::MatrixXd models(static_cast<Eigen::Index>(config.n_models), static_cast<Eigen::Index>(n_steps));
        for (std::size_t j = 0; j < config.n_models; ++j) {
            const bool copy = config.include_truth_model && j == 0;
            const Shape shape = perturb(layout.regime, truth_shape, rng);
            for (std::size_t t = 0; t < n_steps; ++t) {
                const double u = static_cast<double>(t) / static_cast<double>(n_steps - 1);
                const double v = copy ? truth[t] : clamp(shape_value(layout.regime, shape, u) + config.ensemble_bias);
                models(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = v;
            }
        }

        std::vector<double> observed(n_steps);
        for (std::size_t t = 0; t < n_steps; ++t) {
            const double noise = config.noise_sigma > 0.0 ? config.noise_sigma * rng.normal() : 0.0;
            observed[t] = clamp(truth[t] + noise);
        }

        SeriesId id(layout.kind, layout.label, layout.units);
        out.push_back(SynthSeries{ObservationSeries(id, std::move(observed), times),
                                  EnsembleMatrix(id, std::move(models)), layout.regime, 150.0});
    }
    return out;
}

}  // namespace seqagg
