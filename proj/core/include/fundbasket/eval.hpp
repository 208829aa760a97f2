#pragma once

#include "fundbasket/dataset.hpp"
#include "fundbasket/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fundbasket::eval {

enum class TaskKind { NBR, NNBR, NBRR };
enum class Metric { Recall, Ndcg };
enum class EmptyTargetMode { Skip, Zero };

std::string_view to_string(TaskKind t);
std::string_view to_string(Metric m);
TaskKind parse_task(std::string_view text);
Metric parse_metric(std::string_view text);

/// Top-K candidate items by descending score, ties by ascending index.
/// `candidates` is a 0/1 mask of length scores.size(); an empty span means
/// every item is a candidate. Returns fewer than K items when there are
/// fewer candidates.
std::vector<ItemIndex> rank_topk(std::span<const double> scores, int k, std::span<const std::uint8_t> candidates = {});

/// |P ∩ T| / |T|. `targets` must be sorted and non-empty.
double recall_at_k(std::span<const ItemIndex> predicted, std::span<const ItemIndex> targets);

/// DCG of the first K predictions over the ideal DCG of min(K, |T|) hits.
double ndcg_at_k(std::span<const ItemIndex> predicted, std::span<const ItemIndex> targets, int k);

struct FilteredTask {
    std::vector<ItemIndex> targets;      // sorted
    std::vector<std::uint8_t> candidates;  // empty = all items
};

/// NBR keeps everything; NNBR restricts targets and candidates to novel
/// items (E = 1); NBRR to repeat items (E = 0).
FilteredTask task_filter(std::span<const ItemIndex> targets, FundIndex fund, const ExploreMask& mask, TaskKind task);

std::vector<FilteredTask> task_filter(const std::vector<std::vector<ItemIndex>>& targets, const ExploreMask& mask,
                                      TaskKind task);

struct Interval {
    double low = 0.0;
    double high = 0.0;
    bool excludes_zero() const { return low > 0.0 || high < 0.0; }
};

/// Percentile bootstrap of the mean. nullopt when fewer than two values.
std::optional<Interval> bootstrap_ci(std::span<const double> values, double level = 0.95, int resamples = 2000,
                                     std::uint64_t seed = 0);

struct MetricSeries {
    TaskKind task = TaskKind::NBR;
    Metric metric = Metric::Recall;
    int k = 20;
    /// Aligned with EvalOutcome::fund_ids; nullopt = ABSTAIN.
    std::vector<std::optional<double>> per_fund;
    std::size_t population = 0;
    std::optional<double> mean;
    std::optional<Interval> ci;
};

struct EvalOutcome {
    std::string model;
    Quarter target;
    std::vector<std::string> fund_ids;
    std::vector<MetricSeries> series;

    const MetricSeries* find(TaskKind task, Metric metric, int k) const;
};

struct EvalOptions {
    std::vector<int> ks = {10, 20};
    std::vector<TaskKind> tasks = {TaskKind::NBR, TaskKind::NNBR, TaskKind::NBRR};
    EmptyTargetMode empty_target = EmptyTargetMode::Skip;
    int repeat_window = 4;
    double ci_level = 0.95;
    int resamples = 2000;
    std::uint64_t seed = 0;
};

/// Scores every fund present at `target` and computes each task x metric x K.
/// Throws ModelError if `scorer` was not fitted on `split.history`.
EvalOutcome evaluate(const models::Scorer& scorer, const PanelDataset& panel, const SplitSpec& split, Quarter target,
                     const EvalOptions& options);

/// Paired bootstrap over funds scored (non-ABSTAIN) in both series.
std::optional<Interval> paired_difference_ci(const EvalOutcome& a, const MetricSeries& sa, const EvalOutcome& b,
                                             const MetricSeries& sb, double level = 0.95, int resamples = 2000,
                                             std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Reports

struct ModelResult {
    std::string model;
    nlohmann::json hyperparameters = nlohmann::json::object();
    std::vector<EvalOutcome> outcomes;
};

struct Report {
    nlohmann::json config = nlohmann::json::object();
    std::vector<ModelResult> models;
};

nlohmann::ordered_json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

/// Appends the models of `other` (config of the first report wins).
void merge(Report& into, const Report& other);

enum class Mark { None, Best, RunnerUp };

struct Column {
    TaskKind task;
    Metric metric;
    int k;
    Quarter target;
    std::string title() const;
};

/// Column order: NBR, NBRR, NNBR; recall then ndcg; ascending K; targets.
std::vector<Column> report_columns(const Report& report);

/// Best is marked when it beats the runner-up significantly (paired
/// bootstrap CI excludes 0); the runner-up is marked when the best is and it
/// beats the third model (or there is no third).
std::vector<std::vector<Mark>> column_marks(const Report& report, const std::vector<Column>& columns,
                                            double level = 0.95, int resamples = 2000, std::uint64_t seed = 0);

std::string report_markdown(const Report& report, double level = 0.95, int resamples = 2000, std::uint64_t seed = 0);
std::string report_tsv(const Report& report);

}  // namespace fundbasket::eval
