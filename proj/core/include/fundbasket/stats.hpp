#pragma once

#include "fundbasket/dataset.hpp"

#include <span>
#include <string>
#include <vector>

namespace fundbasket {

/// pandas-style describe(): sample std (n-1), linearly interpolated quartiles.
struct Distribution {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
    double max = 0.0;
};

Distribution describe(std::span<const double> values);

/// Linear-interpolation percentile of already sorted values, q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);

struct PortfolioStats {
    Quarter quarter;
    Distribution size;
    /// Per-fund mean allocation per stock, in percent.
    Distribution mean_alloc_pct;
};

PortfolioStats summary_stats(const PanelDataset& panel, Quarter quarter);

struct TurnoverStats {
    Quarter quarter;
    /// |B_t \ B_{t-1}| / |B_t| in percent, for funds present in both quarters.
    std::vector<double> per_fund_pct;
    Distribution turnover_pct;
};

TurnoverStats turnover_stats(const PanelDataset& panel, Quarter quarter);

struct PresenceEntry {
    ItemIndex item = 0;
    std::string label;
    double pct = 0.0;
};

struct PresenceStats {
    Quarter quarter;
    std::size_t n_funds = 0;
    /// Sorted by descending share, ties by ascending item index.
    std::vector<PresenceEntry> overall;
    std::vector<PresenceEntry> explore;
};

/// Overall % = share of funds present at `quarter` holding the stock.
/// Explore % = share of the same population holding it as a novel item.
PresenceStats presence_stats(const PanelDataset& panel, Quarter quarter, int window = 4);

std::string portfolio_stats_markdown(const PortfolioStats& stats);
std::string portfolio_stats_tsv(const PortfolioStats& stats);
std::string presence_markdown(const PresenceStats& stats, std::size_t top_n = 10);
std::string presence_tsv(const PresenceStats& stats, std::size_t top_n = 10);
std::string turnover_markdown(std::span<const TurnoverStats> stats);
std::string turnover_tsv(std::span<const TurnoverStats> stats);

}  // namespace fundbasket
