#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seqagg/core.hpp"

namespace seqagg {

enum class Regime { smooth_pressure, rate_with_breakthrough, rate_with_shutin };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& text);

/// Every generated value (observations and forecasts) lies in this range.
struct RegimeRange {
    double lo;
    double hi;
};
RegimeRange regime_range(Regime regime);

struct SynthConfig {
    std::uint64_t seed = 1;
    std::size_t n_models = 20;
    std::size_t n_steps = 127;
    std::size_t n_series = 1;
    Regime regime = Regime::smooth_pressure;
    /// Cycle pressure / water-rate / oil-rate series with well names laid out like
    /// a 10-injector, 20-producer field (BHP_I1..10, BHP_P1..20, QO_P1..20, QW_P1..20).
    bool field_layout = false;
    double noise_sigma = 0.0;
    /// Systematic offset of every simulated trajectory from the truth.
    double ensemble_bias = 0.0;
    /// Model 1 is an exact copy of the latent truth.
    bool include_truth_model = false;

    void validate() const;
};

struct SynthSeries {
    ObservationSeries observations;
    EnsembleMatrix ensemble;
    Regime regime;
    /// Native-unit stability threshold for the noise estimate.
    double stability_threshold;
};

/// Deterministic given the config. The engine's output sequence is fixed by the
/// C++ standard; uniforms and normals are derived from it here (Box-Muller) rather
/// than through <random> distributions, whose algorithms vary between libraries.
std::vector<SynthSeries> generate(const SynthConfig& config);

/// Portable normal/uniform source used by the generator.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed);
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);
    double normal();
    std::uint64_t next();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace seqagg
