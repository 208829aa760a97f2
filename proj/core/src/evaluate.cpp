#include "fundbasket/errors.hpp"
#include "fundbasket/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <numeric>

namespace fundbasket::eval {

const MetricSeries* EvalOutcome::find(TaskKind task, Metric metric, int k) const {
    for (const auto& s : series)
        if (s.task == task && s.metric == metric && s.k == k) return &s;
    return nullptr;
}

EvalOutcome evaluate(const models::Scorer& scorer, const PanelDataset& panel, const SplitSpec& split, Quarter target,
                     const EvalOptions& options) {
    split.validate();
    if (!scorer.fitted()) throw ModelError(std::string(scorer.name()) + ": evaluate called before fit");
    if (!(split.history.last < target))
        throw ConfigError("evaluation target " + target.str() + " is not after the history " + split.history.str());
    if (scorer.data_hash() != panel.slice(split.history).content_hash())
        throw ModelError(std::string(scorer.name()) + ": model was not fitted on the split history");
    if (options.ks.empty() || options.tasks.empty()) throw ConfigError("evaluate: no K or task requested");
    for (int k : options.ks)
        if (k < 1) throw ConfigError("evaluate: K must be >= 1");

    const auto pos = panel.quarter_position(target);
    if (!pos) throw DataError("evaluation target " + target.str() + " not in panel");
    const auto mask = explore_mask(panel, target, options.repeat_window);
    const auto population = panel.funds_present(target);
    const int max_k = *std::max_element(options.ks.begin(), options.ks.end());

    EvalOutcome out;
    out.model = std::string(scorer.name());
    out.target = target;
    for (auto u : population) out.fund_ids.push_back(panel.vocab().funds.id(u));
    for (auto task : options.tasks)
        for (auto metric : {Metric::Recall, Metric::Ndcg})
            for (int k : options.ks) {
                MetricSeries s;
                s.task = task;
                s.metric = metric;
                s.k = k;
                s.per_fund.resize(population.size());
                out.series.push_back(std::move(s));
            }

    for (std::size_t f = 0; f < population.size(); ++f) {
        const auto u = population[f];
        const auto scores = scorer.score(u);
        const auto& target_items = panel.basket_at(u, *pos)->items;
        for (auto task : options.tasks) {
            const auto filtered = task_filter(target_items, u, mask, task);
            if (filtered.targets.empty()) {
                if (options.empty_target == EmptyTargetMode::Zero)
                    for (auto& s : out.series)
                        if (s.task == task) s.per_fund[f] = 0.0;
                continue;
            }
            const auto ranked = rank_topk(scores, max_k, filtered.candidates);
            for (auto& s : out.series) {
                if (s.task != task) continue;
                const auto depth = std::min(ranked.size(), static_cast<std::size_t>(s.k));
                const std::span<const ItemIndex> top(ranked.data(), depth);
                s.per_fund[f] = s.metric == Metric::Recall ? recall_at_k(top, filtered.targets)
                                                           : ndcg_at_k(top, filtered.targets, s.k);
            }
        }
    }

    for (auto& s : out.series) {
        std::vector<double> values;
        for (const auto& v : s.per_fund)
            if (v) values.push_back(*v);
        s.population = values.size();
        if (!values.empty())
            s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        s.ci = bootstrap_ci(values, options.ci_level, options.resamples, options.seed);
    }
    return out;
}

std::optional<Interval> paired_difference_ci(const EvalOutcome& a, const MetricSeries& sa, const EvalOutcome& b,
                                             const MetricSeries& sb, double level, int resamples, std::uint64_t seed) {
    std::map<std::string, double> left;
    for (std::size_t f = 0; f < a.fund_ids.size(); ++f)
        if (sa.per_fund[f]) left.emplace(a.fund_ids[f], *sa.per_fund[f]);
    std::vector<double> diffs;
    for (std::size_t f = 0; f < b.fund_ids.size(); ++f) {
        if (!sb.per_fund[f]) continue;
        auto it = left.find(b.fund_ids[f]);
        if (it != left.end()) diffs.push_back(it->second - *sb.per_fund[f]);
    }
    return bootstrap_ci(diffs, level, resamples, seed);
}

}  // namespace fundbasket::eval
