#pragma once

#include "fundbasket/dataset.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace fundbasket::synth {

struct SynthConfig {
    int n_funds = 200;
    int n_items = 500;
    int n_quarters = 7;
    Quarter start{2020, 1};

    /// Portfolio size ~ lognormal(size_log_mean, size_log_std), clamped to
    /// [1, max_size_fraction * n_items].
    double size_log_mean = 4.2341065045972597;  // ln(69)
    double size_log_std = 0.8;
    double max_size_fraction = 0.5;

    /// Per-fund turnover propensity ~ Beta(a, b); mean a / (a + b) = 6%.
    double turnover_a = 1.2;
    double turnover_b = 18.8;

    /// Zipf exponent of item attractiveness.
    double popularity_exponent = 1.1;

    /// Number of fund styles and how strongly a style favours its items.
    int latent_dim = 8;
    double style_affinity = 12.0;
    /// Extra pull toward items already held by funds of the same style.
    double coholding_affinity = 4.0;

    std::uint64_t seed = 42;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Reads `key = value` pairs (names as the fields above, plus `start`).
/// Unknown keys are rejected.
SynthConfig config_from_pairs(const std::map<std::string, std::string>& pairs, SynthConfig base = {});

/// Deterministic given `cfg.seed`.
PanelDataset generate(const SynthConfig& cfg);

}  // namespace fundbasket::synth
