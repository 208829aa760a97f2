#include "fundbasket/errors.hpp"
#include "fundbasket/eval.hpp"
#include "fundbasket/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fundbasket::eval {

std::string_view to_string(TaskKind t) {
    switch (t) {
        case TaskKind::NBR: return "NBR";
        case TaskKind::NNBR: return "NNBR";
        case TaskKind::NBRR: return "NBRR";
    }
    return "?";
}

std::string_view to_string(Metric m) {
    return m == Metric::Recall ? "recall" : "ndcg";
}

TaskKind parse_task(std::string_view text) {
    std::string lower;
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "nbr") return TaskKind::NBR;
    if (lower == "nnbr") return TaskKind::NNBR;
    if (lower == "nbrr") return TaskKind::NBRR;
    throw ConfigError("unknown task '" + std::string(text) + "' (expected nbr, nnbr or nbrr)");
}

Metric parse_metric(std::string_view text) {
    if (text == "recall") return Metric::Recall;
    if (text == "ndcg") return Metric::Ndcg;
    throw DataError("unknown metric '" + std::string(text) + "'");
}

std::vector<ItemIndex> rank_topk(std::span<const double> scores, int k, std::span<const std::uint8_t> candidates) {
    if (k < 1) throw ConfigError("rank_topk: K must be >= 1");
    std::vector<ItemIndex> pool;
    pool.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (candidates.empty() || candidates[i]) pool.push_back(static_cast<ItemIndex>(i));

    auto better = [&](ItemIndex a, ItemIndex b) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sb = scores[static_cast<std::size_t>(b)];
        return sa > sb || (sa == sb && a < b);
    };
    const auto keep = std::min(pool.size(), static_cast<std::size_t>(k));
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), better);
    pool.resize(keep);
    return pool;
}

double recall_at_k(std::span<const ItemIndex> predicted, std::span<const ItemIndex> targets) {
    if (targets.empty()) throw DataError("recall_at_k: empty target set");
    std::size_t hits = 0;
    for (auto i : predicted) hits += std::binary_search(targets.begin(), targets.end(), i);
    return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double ndcg_at_k(std::span<const ItemIndex> predicted, std::span<const ItemIndex> targets, int k) {
    if (targets.empty()) throw DataError("ndcg_at_k: empty target set");
    const auto depth = std::min(predicted.size(), static_cast<std::size_t>(k));
    double dcg = 0.0;
    for (std::size_t r = 0; r < depth; ++r)
        if (std::binary_search(targets.begin(), targets.end(), predicted[r]))
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double idcg = 0.0;
    const auto ideal = std::min(targets.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

FilteredTask task_filter(std::span<const ItemIndex> targets, FundIndex fund, const ExploreMask& mask, TaskKind task) {
    FilteredTask out;
    if (task == TaskKind::NBR) {
        out.targets.assign(targets.begin(), targets.end());
        return out;
    }
    const bool want_novel = task == TaskKind::NNBR;
    for (auto i : targets)
        if (mask.is_novel(fund, i) == want_novel) out.targets.push_back(i);

    out.candidates.assign(static_cast<std::size_t>(mask.n_items()), want_novel ? 1 : 0);
    for (auto i : mask.repeat_items(fund)) out.candidates[static_cast<std::size_t>(i)] = want_novel ? 0 : 1;
    return out;
}

std::vector<FilteredTask> task_filter(const std::vector<std::vector<ItemIndex>>& targets, const ExploreMask& mask,
                                      TaskKind task) {
    if (static_cast<std::int32_t>(targets.size()) != mask.n_funds())
        throw DataError("task_filter: target and mask shapes differ");
    std::vector<FilteredTask> out;
    out.reserve(targets.size());
    for (std::size_t u = 0; u < targets.size(); ++u)
        out.push_back(task_filter(targets[u], static_cast<FundIndex>(u), mask, task));
    return out;
}

std::optional<Interval> bootstrap_ci(std::span<const double> values, double level, int resamples, std::uint64_t seed) {
    if (values.size() < 2 || resamples < 1) return std::nullopt;
    std::mt19937_64 rng(seed);
    const auto n = values.size();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) sum += values[static_cast<std::size_t>(rng() % n)];
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    return Interval{percentile_sorted(means, tail), percentile_sorted(means, 1.0 - tail)};
}

}  // namespace fundbasket::eval
