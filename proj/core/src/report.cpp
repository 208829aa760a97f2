#include "fundbasket/errors.hpp"
#include "fundbasket/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <set>

namespace fundbasket::eval {

using ojson = nlohmann::ordered_json;

namespace {

ojson optional_number(const std::optional<double>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

std::optional<double> read_optional(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

ojson to_json(const Report& report) {
    ojson j;
    j["format"] = "fundbasket.eval/1";
    j["config"] = report.config;
    auto& models = j["models"] = ojson::array();
    for (const auto& m : report.models) {
        ojson jm;
        jm["model"] = m.model;
        jm["hyperparameters"] = m.hyperparameters;
        auto& outcomes = jm["targets"] = ojson::array();
        for (const auto& o : m.outcomes) {
            ojson jo;
            jo["quarter"] = o.target.str();
            jo["fund_ids"] = o.fund_ids;
            auto& series = jo["series"] = ojson::array();
            for (const auto& s : o.series) {
                ojson js;
                js["task"] = std::string(to_string(s.task));
                js["metric"] = std::string(to_string(s.metric));
                js["k"] = s.k;
                js["population"] = s.population;
                js["abstained"] = s.per_fund.size() - s.population;
                js["mean"] = optional_number(s.mean);
                js["ci"] = s.ci ? ojson::array({s.ci->low, s.ci->high}) : ojson(nullptr);
                auto& per = js["per_fund"] = ojson::array();
                for (const auto& v : s.per_fund) per.push_back(optional_number(v));
                series.push_back(std::move(js));
            }
            outcomes.push_back(std::move(jo));
        }
        models.push_back(std::move(jm));
    }
    return j;
}

Report report_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "fundbasket.eval/1") throw DataError("not a fundbasket evaluation report");
    Report r;
    r.config = j.value("config", nlohmann::json::object());
    try {
        for (const auto& jm : j.at("models")) {
            ModelResult m;
            m.model = jm.at("model").get<std::string>();
            m.hyperparameters = jm.value("hyperparameters", nlohmann::json::object());
            for (const auto& jo : jm.at("targets")) {
                EvalOutcome o;
                o.model = m.model;
                o.target = Quarter::parse(jo.at("quarter").get<std::string>());
                o.fund_ids = jo.at("fund_ids").get<std::vector<std::string>>();
                for (const auto& js : jo.at("series")) {
                    MetricSeries s;
                    s.task = parse_task(js.at("task").get<std::string>());
                    s.metric = parse_metric(js.at("metric").get<std::string>());
                    s.k = js.at("k").get<int>();
                    s.population = js.at("population").get<std::size_t>();
                    s.mean = read_optional(js.at("mean"));
                    if (!js.at("ci").is_null()) s.ci = Interval{js.at("ci")[0].get<double>(), js.at("ci")[1].get<double>()};
                    for (const auto& v : js.at("per_fund")) s.per_fund.push_back(read_optional(v));
                    if (s.per_fund.size() != o.fund_ids.size())
                        throw DataError("report: per_fund length differs from fund_ids");
                    o.series.push_back(std::move(s));
                }
                m.outcomes.push_back(std::move(o));
            }
            r.models.push_back(std::move(m));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed evaluation report: ") + e.what());
    }
    return r;
}

void merge(Report& into, const Report& other) {
    if (into.models.empty() && into.config.empty()) into.config = other.config;
    for (const auto& m : other.models) into.models.push_back(m);
}

std::string Column::title() const {
    return fmt::format("{} {}@{} {}", to_string(task), to_string(metric), k, target.str());
}

std::vector<Column> report_columns(const Report& report) {
    std::set<TaskKind> tasks;
    std::set<int> ks;
    std::set<Quarter> targets;
    for (const auto& m : report.models)
        for (const auto& o : m.outcomes) {
            targets.insert(o.target);
            for (const auto& s : o.series) {
                tasks.insert(s.task);
                ks.insert(s.k);
            }
        }
    std::vector<Column> cols;
    for (auto task : {TaskKind::NBR, TaskKind::NBRR, TaskKind::NNBR}) {
        if (!tasks.count(task)) continue;
        for (auto metric : {Metric::Recall, Metric::Ndcg})
            for (int k : ks)
                for (auto q : targets) cols.push_back({task, metric, k, q});
    }
    return cols;
}

namespace {

struct Cell {
    const EvalOutcome* outcome = nullptr;
    const MetricSeries* series = nullptr;
};

Cell find_cell(const ModelResult& m, const Column& c) {
    for (const auto& o : m.outcomes)
        if (o.target == c.target)
            if (const auto* s = o.find(c.task, c.metric, c.k)) return {&o, s};
    return {};
}

}  // namespace

std::vector<std::vector<Mark>> column_marks(const Report& report, const std::vector<Column>& columns, double level,
                                            int resamples, std::uint64_t seed) {
    std::vector<std::vector<Mark>> marks(report.models.size(), std::vector<Mark>(columns.size(), Mark::None));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        std::vector<std::pair<std::size_t, Cell>> ranked;
        for (std::size_t m = 0; m < report.models.size(); ++m) {
            auto cell = find_cell(report.models[m], columns[c]);
            if (cell.series && cell.series->mean) ranked.emplace_back(m, cell);
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return *a.second.series->mean > *b.second.series->mean; });
        if (ranked.size() < 2) continue;

        auto beats = [&](const Cell& a, const Cell& b) {
            auto ci = paired_difference_ci(*a.outcome, *a.series, *b.outcome, *b.series, level, resamples, seed);
            return ci && ci->low > 0.0;
        };
        if (!beats(ranked[0].second, ranked[1].second)) continue;
        marks[ranked[0].first][c] = Mark::Best;
        if (ranked.size() == 2 || beats(ranked[1].second, ranked[2].second)) marks[ranked[1].first][c] = Mark::RunnerUp;
    }
    return marks;
}

std::string report_markdown(const Report& report, double level, int resamples, std::uint64_t seed) {
    const auto columns = report_columns(report);
    const auto marks = column_marks(report, columns, level, resamples, seed);

    std::string out = "| Model |";
    std::string sep = "|---|";
    for (const auto& c : columns) {
        out += " " + c.title() + " |";
        sep += "---:|";
    }
    out += "\n" + sep + "\n";
    for (std::size_t m = 0; m < report.models.size(); ++m) {
        out += "| " + report.models[m].model + " |";
        for (std::size_t c = 0; c < columns.size(); ++c) {
            auto cell = find_cell(report.models[m], columns[c]);
            std::string text = cell.series && cell.series->mean ? fmt::format("{:.3f}", *cell.series->mean) : "n/a";
            if (marks[m][c] == Mark::Best) text = "**" + text + "**";
            if (marks[m][c] == Mark::RunnerUp) text = "<u>" + text + "</u>";
            out += " " + text + " |";
        }
        out += "\n";
    }
    out += fmt::format("\nBest model in bold and runner-up underlined when the paired {:.0f}% bootstrap CI of the "
                       "difference excludes zero.\n",
                       level * 100.0);
    return out;
}

std::string report_tsv(const Report& report) {
    std::string out = "model\ttarget\ttask\tmetric\tk\tpopulation\tabstained\tmean\tci_low\tci_high\n";
    for (const auto& m : report.models)
        for (const auto& o : m.outcomes)
            for (const auto& s : o.series) {
                out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", m.model, o.target.str(),
                                   to_string(s.task), to_string(s.metric), s.k, s.population,
                                   s.per_fund.size() - s.population, s.mean ? fmt::format("{:.6f}", *s.mean) : "",
                                   s.ci ? fmt::format("{:.6f}", s.ci->low) : "",
                                   s.ci ? fmt::format("{:.6f}", s.ci->high) : "");
            }
    return out;
}

}  // namespace fundbasket::eval
