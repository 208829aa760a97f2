#include "fundbasket/stats.hpp"

#include "fundbasket/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fundbasket {

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return std::nan("");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

Distribution describe(std::span<const double> values) {
    Distribution d;
    d.count = values.size();
    if (values.empty()) {
        d.mean = d.std = d.min = d.p25 = d.p50 = d.p75 = d.max = std::nan("");
        return d;
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    d.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    if (sorted.size() > 1) {
        double ss = 0.0;
        for (double v : sorted) ss += (v - d.mean) * (v - d.mean);
        d.std = std::sqrt(ss / static_cast<double>(sorted.size() - 1));
    } else {
        d.std = std::nan("");
    }
    d.min = sorted.front();
    d.max = sorted.back();
    d.p25 = percentile_sorted(sorted, 0.25);
    d.p50 = percentile_sorted(sorted, 0.50);
    d.p75 = percentile_sorted(sorted, 0.75);
    return d;
}

PortfolioStats summary_stats(const PanelDataset& panel, Quarter quarter) {
    auto pos = panel.quarter_position(quarter);
    if (!pos) throw DataError("summary_stats: quarter " + quarter.str() + " not in panel");

    std::vector<double> sizes;
    std::vector<double> allocs;
    for (FundIndex u = 0; u < panel.n_funds(); ++u) {
        const auto* b = panel.basket_at(u, *pos);
        if (!b) continue;
        const double n = static_cast<double>(b->size());
        sizes.push_back(n);
        allocs.push_back(100.0 * std::accumulate(b->weights.begin(), b->weights.end(), 0.0) / n);
    }
    return {quarter, describe(sizes), describe(allocs)};
}

TurnoverStats turnover_stats(const PanelDataset& panel, Quarter quarter) {
    auto pos = panel.quarter_position(quarter);
    auto prev = panel.quarter_position(quarter.prev());
    if (!pos || !prev) throw DataError("turnover_stats: " + quarter.str() + " or its predecessor not in panel");

    TurnoverStats out;
    out.quarter = quarter;
    for (FundIndex u = 0; u < panel.n_funds(); ++u) {
        const auto* now = panel.basket_at(u, *pos);
        const auto* before = panel.basket_at(u, *prev);
        if (!now || !before) continue;
        std::size_t added = 0;
        for (auto i : now->items) added += !before->contains(i);
        out.per_fund_pct.push_back(100.0 * static_cast<double>(added) / static_cast<double>(now->size()));
    }
    out.turnover_pct = describe(out.per_fund_pct);
    return out;
}

PresenceStats presence_stats(const PanelDataset& panel, Quarter quarter, int window) {
    auto pos = panel.quarter_position(quarter);
    if (!pos) throw DataError("presence_stats: quarter " + quarter.str() + " not in panel");
    const auto mask = explore_mask(panel, quarter, window);

    std::vector<std::size_t> overall(static_cast<std::size_t>(panel.n_items()), 0);
    std::vector<std::size_t> novel(overall.size(), 0);
    PresenceStats out;
    out.quarter = quarter;
    for (FundIndex u = 0; u < panel.n_funds(); ++u) {
        const auto* b = panel.basket_at(u, *pos);
        if (!b) continue;
        ++out.n_funds;
        for (auto i : b->items) {
            ++overall[static_cast<std::size_t>(i)];
            if (mask.is_novel(u, i)) ++novel[static_cast<std::size_t>(i)];
        }
    }

    auto ranking = [&](const std::vector<std::size_t>& counts) {
        std::vector<PresenceEntry> entries;
        for (ItemIndex i = 0; i < panel.n_items(); ++i) {
            const auto c = counts[static_cast<std::size_t>(i)];
            if (c == 0) continue;
            entries.push_back({i, panel.vocab().label(i),
                               100.0 * static_cast<double>(c) / static_cast<double>(out.n_funds)});
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const PresenceEntry& a, const PresenceEntry& b) { return a.pct > b.pct; });
        return entries;
    };
    out.overall = ranking(overall);
    out.explore = ranking(novel);
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string row_md(const std::string& name, const Distribution& d, int digits) {
    return fmt::format("| {} | {:.{}f} | {:.{}f} | {:.{}f} | {:.{}f} | {:.{}f} | {:.{}f} | {:.{}f} |\n", name, d.mean,
                       digits, d.std, digits, d.min, digits, d.p25, digits, d.p50, digits, d.p75, digits, d.max,
                       digits);
}

std::string row_tsv(const std::string& name, const Distribution& d) {
    return fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", name, d.count, d.mean, d.std, d.min, d.p25, d.p50,
                       d.p75, d.max);
}

}  // namespace

std::string portfolio_stats_markdown(const PortfolioStats& stats) {
    std::string out = fmt::format("Portfolio summary statistics for {}\n\n", stats.quarter.str());
    out += "|  | mean | std | min | 25% | 50% | 75% | max |\n";
    out += "|---|---:|---:|---:|---:|---:|---:|---:|\n";
    out += row_md("Portfolio Size", stats.size, 1);
    out += row_md("% Mean Alloc.", stats.mean_alloc_pct, 2);
    return out;
}

std::string portfolio_stats_tsv(const PortfolioStats& stats) {
    std::string out = "statistic\tcount\tmean\tstd\tmin\tp25\tp50\tp75\tmax\n";
    out += row_tsv("portfolio_size", stats.size);
    out += row_tsv("mean_alloc_pct", stats.mean_alloc_pct);
    return out;
}

std::string presence_markdown(const PresenceStats& stats, std::size_t top_n) {
    std::string out = fmt::format("Overall and explore presence of stocks in portfolios for {}\n\n", stats.quarter.str());
    out += "|  | Top Overall | % | Top Explore | % |\n|---|---|---:|---|---:|\n";
    const auto rows = std::min(top_n, std::max(stats.overall.size(), stats.explore.size()));
    for (std::size_t r = 0; r < rows; ++r) {
        std::string o_label, o_pct, e_label, e_pct;
        if (r < stats.overall.size()) {
            o_label = stats.overall[r].label;
            o_pct = fmt::format("{:.1f}", stats.overall[r].pct);
        }
        if (r < stats.explore.size()) {
            e_label = stats.explore[r].label;
            e_pct = fmt::format("{:.1f}", stats.explore[r].pct);
        }
        out += fmt::format("| {} | {} | {} | {} | {} |\n", r + 1, o_label, o_pct, e_label, e_pct);
    }
    return out;
}

std::string presence_tsv(const PresenceStats& stats, std::size_t top_n) {
    std::string out = "ranking\trank\tlabel\tpct\n";
    auto emit = [&](const char* name, const std::vector<PresenceEntry>& entries) {
        for (std::size_t r = 0; r < std::min(top_n, entries.size()); ++r)
            out += fmt::format("{}\t{}\t{}\t{}\n", name, r + 1, entries[r].label, entries[r].pct);
    };
    emit("overall", stats.overall);
    emit("explore", stats.explore);
    return out;
}

std::string turnover_markdown(std::span<const TurnoverStats> stats) {
    std::string out = "Summary statistics for portfolio turnover\n\n| ";
    std::string sep = "|---";
    for (const auto& s : stats) {
        out += fmt::format("| {} ", s.quarter.str());
        sep += "|---:";
    }
    out += "|\n" + sep + "|\n";
    const std::pair<const char*, double Distribution::*> rows[] = {
        {"mean", &Distribution::mean}, {"std", &Distribution::std}, {"min", &Distribution::min},
        {"25%", &Distribution::p25},   {"50%", &Distribution::p50}, {"75%", &Distribution::p75},
        {"max", &Distribution::max}};
    for (const auto& [name, field] : rows) {
        out += fmt::format("| {} ", name);
        for (const auto& s : stats) out += fmt::format("| {:.1f}% ", s.turnover_pct.*field);
        out += "|\n";
    }
    return out;
}

std::string turnover_tsv(std::span<const TurnoverStats> stats) {
    std::string out = "statistic\tcount\tmean\tstd\tmin\tp25\tp50\tp75\tmax\n";
    for (const auto& s : stats) out += row_tsv(s.quarter.str(), s.turnover_pct);
    return out;
}

}  // namespace fundbasket
