#include "fundbasket/synth.hpp"

#include "fundbasket/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fundbasket::synth {

void SynthConfig::validate() const {
    if (n_funds < 1 || n_items < 1) throw ConfigError("synth: n_funds and n_items must be positive");
    if (n_quarters < 7) throw ConfigError("synth: n_quarters must be >= 7");
    if (!(size_log_std > 0) || !(max_size_fraction > 0) || max_size_fraction > 1)
        throw ConfigError("synth: size parameters must be positive");
    if (std::exp(size_log_mean) > n_items)
        throw ConfigError(fmt::format("synth: median basket size {:.0f} exceeds n_items {}", std::exp(size_log_mean),
                                      n_items));
    if (!(turnover_a > 0) || !(turnover_b > 0)) throw ConfigError("synth: turnover beta parameters must be positive");
    if (!(popularity_exponent > 0)) throw ConfigError("synth: popularity_exponent must be positive");
    if (latent_dim < 1) throw ConfigError("synth: latent_dim must be >= 1");
    if (style_affinity < 0 || coholding_affinity < 0) throw ConfigError("synth: affinities must be >= 0");
}

SynthConfig config_from_pairs(const std::map<std::string, std::string>& pairs, SynthConfig cfg) {
    for (const auto& [key, value] : pairs) {
        try {
            if (key == "n_funds") cfg.n_funds = std::stoi(value);
            else if (key == "n_items") cfg.n_items = std::stoi(value);
            else if (key == "n_quarters") cfg.n_quarters = std::stoi(value);
            else if (key == "start") cfg.start = Quarter::parse(value);
            else if (key == "size_log_mean") cfg.size_log_mean = std::stod(value);
            else if (key == "size_log_std") cfg.size_log_std = std::stod(value);
            else if (key == "max_size_fraction") cfg.max_size_fraction = std::stod(value);
            else if (key == "turnover_a") cfg.turnover_a = std::stod(value);
            else if (key == "turnover_b") cfg.turnover_b = std::stod(value);
            else if (key == "popularity_exponent") cfg.popularity_exponent = std::stod(value);
            else if (key == "latent_dim") cfg.latent_dim = std::stoi(value);
            else if (key == "style_affinity") cfg.style_affinity = std::stod(value);
            else if (key == "coholding_affinity") cfg.coholding_affinity = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else throw ConfigError("synth: unknown key '" + key + "'");
        } catch (const std::logic_error&) {
            throw ConfigError("synth: invalid value '" + value + "' for " + key);
        }
    }
    return cfg;
}

namespace {

using Rng = std::mt19937_64;

/// Weighted sampling of `n` distinct candidates without replacement
/// (Efraimidis-Spirakis exponential keys).
std::vector<int> weighted_sample(const std::vector<int>& candidates, const std::vector<double>& weights, int n,
                                 Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, int>> keyed;
    keyed.reserve(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (!(weights[k] > 0)) continue;
        const double u = std::max(unif(rng), 1e-300);
        keyed.emplace_back(std::log(u) / weights[k], candidates[k]);
    }
    n = std::min<int>(n, static_cast<int>(keyed.size()));
    std::partial_sort(keyed.begin(), keyed.begin() + n, keyed.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out.push_back(keyed[static_cast<std::size_t>(k)].second);
    return out;
}

double draw_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x + y > 0 ? x / (x + y) : 0.0;
}

struct Holding {
    int item;
    double value;
};

}  // namespace

PanelDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> style_dist(0, cfg.latent_dim - 1);

    const auto n_items = static_cast<std::size_t>(cfg.n_items);
    const auto n_funds = static_cast<std::size_t>(cfg.n_funds);

    // Popularity rank is a random permutation of item ids, so identifiers
    // carry no information about attractiveness.
    std::vector<int> rank(n_items);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    std::vector<double> popularity(n_items);
    std::vector<int> item_style(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        popularity[i] = std::pow(static_cast<double>(rank[i] + 1), -cfg.popularity_exponent);
        item_style[i] = style_dist(rng);
    }

    std::vector<int> fund_style(n_funds);
    std::vector<double> propensity(n_funds);
    for (std::size_t u = 0; u < n_funds; ++u) {
        fund_style[u] = style_dist(rng);
        propensity[u] = draw_beta(cfg.turnover_a, cfg.turnover_b, rng);
    }

    const int max_size = std::max(1, static_cast<int>(cfg.max_size_fraction * cfg.n_items));
    auto affinity = [&](std::size_t u, std::size_t i) {
        return popularity[i] * (1.0 + (item_style[i] == fund_style[u] ? cfg.style_affinity : 0.0));
    };
    auto position_value = [&](double scale) { return scale * std::exp(0.8 * normal(rng)); };

    std::vector<int> all_items(n_items);
    std::iota(all_items.begin(), all_items.end(), 0);

    // First quarter.
    std::vector<std::vector<Holding>> holdings(n_funds);
    for (std::size_t u = 0; u < n_funds; ++u) {
        const double raw = std::exp(cfg.size_log_mean + cfg.size_log_std * normal(rng));
        const int size = std::clamp(static_cast<int>(std::lround(raw)), 1, max_size);
        std::vector<double> w(n_items);
        for (std::size_t i = 0; i < n_items; ++i) w[i] = affinity(u, i);
        for (int item : weighted_sample(all_items, w, size, rng)) holdings[u].push_back({item, position_value(1.0)});
    }

    PanelBuilder builder;
    auto emit = [&](Quarter q) {
        builder.add_quarter(q);
        for (std::size_t u = 0; u < n_funds; ++u) {
            double total = 0.0;
            for (const auto& h : holdings[u]) total += h.value;
            for (const auto& h : holdings[u])
                builder.add(fmt::format("SYNF{:05d}", u), fmt::format("SYN{:06d}", h.item), q, h.value / total,
                            fmt::format("S{:04d}", h.item));
        }
    };
    Quarter q = cfg.start;
    emit(q);

    for (int t = 1; t < cfg.n_quarters; ++t) {
        // Share of each style's funds holding each item last quarter.
        std::vector<std::vector<double>> style_share(static_cast<std::size_t>(cfg.latent_dim),
                                                     std::vector<double>(n_items, 0.0));
        std::vector<double> style_count(static_cast<std::size_t>(cfg.latent_dim), 0.0);
        for (std::size_t u = 0; u < n_funds; ++u) {
            const auto s = static_cast<std::size_t>(fund_style[u]);
            style_count[s] += 1.0;
            for (const auto& h : holdings[u]) style_share[s][static_cast<std::size_t>(h.item)] += 1.0;
        }
        for (std::size_t s = 0; s < style_share.size(); ++s)
            for (auto& v : style_share[s]) v = style_count[s] > 0 ? v / style_count[s] : 0.0;

        for (std::size_t u = 0; u < n_funds; ++u) {
            auto& held = holdings[u];
            for (auto& h : held) h.value *= std::exp(0.1 * normal(rng));

            const int n_held = static_cast<int>(held.size());
            std::binomial_distribution<int> n_drop_dist(n_held, propensity[u]);
            const int n_drop = std::min(n_drop_dist(rng), n_held - 1);
            if (n_drop <= 0) continue;

            // Small positions are trimmed first.
            std::vector<int> idx(held.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::vector<double> drop_w(held.size());
            for (std::size_t k = 0; k < held.size(); ++k) drop_w[k] = 1.0 / (held[k].value * held[k].value);
            auto dropped = weighted_sample(idx, drop_w, n_drop, rng);
            std::vector<bool> is_dropped(held.size(), false);
            for (int k : dropped) is_dropped[static_cast<std::size_t>(k)] = true;

            std::vector<bool> excluded(n_items, false);
            for (const auto& h : held) excluded[static_cast<std::size_t>(h.item)] = true;
            std::vector<Holding> kept;
            for (std::size_t k = 0; k < held.size(); ++k)
                if (!is_dropped[k]) kept.push_back(held[k]);

            std::vector<int> candidates;
            std::vector<double> w;
            const auto& share = style_share[static_cast<std::size_t>(fund_style[u])];
            for (std::size_t i = 0; i < n_items; ++i) {
                if (excluded[i]) continue;
                candidates.push_back(static_cast<int>(i));
                w.push_back(affinity(u, i) * (1.0 + cfg.coholding_affinity * share[i]));
            }
            for (int item : weighted_sample(candidates, w, n_drop, rng)) kept.push_back({item, position_value(0.5)});
            held = std::move(kept);
        }
        q = q.next();
        emit(q);
    }
    return builder.build();
}

}  // namespace fundbasket::synth
