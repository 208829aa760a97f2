#include "fundbasket/cli.hpp"
#include "fundbasket/errors.hpp"
#include "fundbasket/hash.hpp"
#include "fundbasket/ingest.hpp"
#include "fundbasket/models.hpp"
#include "fundbasket/panel_io.hpp"
#include "fundbasket/stats.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <set>

namespace fundbasket::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Messages go to the console as-is and, with a timestamp, to out/run.log.
// Timestamps never reach the deterministic outputs.
class RunLog {
public:
    RunLog(const fs::path& dir, std::ostream* console) : console_(console) {
        fs::create_directories(dir);
        file_.open(dir / "run.log", std::ios::app);
    }
    void operator()(const std::string& msg) {
        if (console_) *console_ << msg << '\n';
        if (file_) {
            const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
            file_ << fmt::format("{:%Y-%m-%dT%H:%M:%SZ} {}\n", now, msg);
        }
    }

private:
    std::ostream* console_;
    std::ofstream file_;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".part");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.generic_string());
        out << text;
        if (!out) throw DataError("write failed: " + path.generic_string());
    }
    fs::rename(tmp, path);
}

std::string provenance(const RunConfig& config, const std::string& command) {
    ojson j;
    j["command"] = command;
    j["config"] = config.to_json();
    return j.dump();
}

void write_panel_bundle(const RunConfig& config, const PanelDataset& panel, const SplitSpec& split,
                        const std::string& command, RunLog& log) {
    write_panel_json(config.out / "panel.json", panel, provenance(config, command));
    const auto files = export_atomic(panel, split, config.out, config.name);
    log(fmt::format("wrote {} and atomic files {}, {}, {}", (config.out / "panel.json").generic_string(),
                    files.train.filename().string(), files.valid.filename().string(), files.test.filename().string()));
}

ojson counts_json(const ingest::FilterCounts& c) {
    return {{"input", c.input},
            {"invalid_cusip", c.invalid_cusip},
            {"not_us_listed", c.not_us_listed},
            {"not_common_stock", c.not_common_stock},
            {"not_long", c.not_long},
            {"below_min_value", c.below_min_value},
            {"retained", c.retained}};
}

eval::EvalOptions eval_options(const RunConfig& config) {
    eval::EvalOptions o;
    o.ks = config.ks;
    o.tasks = config.tasks;
    o.empty_target = config.empty_target;
    o.repeat_window = config.repeat_window;
    o.ci_level = config.ci_level;
    o.resamples = config.resamples;
    o.seed = config.derived_seed("bootstrap");
    return o;
}

nlohmann::json params_for(const RunConfig& config, const std::string& model) {
    auto it = config.model_params.find(model);
    return it == config.model_params.end() ? nlohmann::json::object() : it->second;
}

}  // namespace

int cmd_ingest(const RunConfig& config, const CommandContext& ctx) {
    config.validate();
    if (config.source != "edgar") throw ConfigError("ingest: requires source = edgar (got '" + config.source + "')");
    if (config.ciks.empty()) throw ConfigError("ingest: [edgar] ciks is empty");
    RunLog log(config.out, ctx.log);

    std::unique_ptr<http::Transport> owned;
    http::Transport* transport = ctx.transport;
    if (!transport) {
        owned = http::make_default_transport();
        transport = owned.get();
    }

    ingest::EdgarOptions eo;
    eo.cache_dir = config.cache_dir;
    eo.user_agent = config.user_agent;
    if (ctx.sleep) eo.retry.sleep = ctx.sleep;
    ingest::EdgarClient edgar(*transport, eo);
    std::set<std::string> ciks;
    for (const auto& c : config.ciks) ciks.insert(ingest::normalize_cik(c));
    auto fetched = edgar.fetch_filings(ciks, config.window);
    log(fmt::format("edgar: {} filings, {} errors, {} network requests", fetched.filings.size(), fetched.errors.size(),
                    fetched.network_requests));

    std::vector<ingest::ParsedFiling> parsed;
    ojson parse_errors = ojson::array();
    std::size_t dropped_invalid = 0;
    std::size_t skipped_missing = 0;
    for (const auto& f : fetched.filings) {
        try {
            auto p = ingest::parse_nport(f);
            dropped_invalid += p.dropped_invalid_cusip;
            skipped_missing += p.skipped_missing_fields;
            parsed.push_back(std::move(p));
        } catch (const ParseError& e) {
            parse_errors.push_back({{"accession_id", e.accession_id()}, {"message", e.what()}});
            log(e.what());
        }
    }
    const auto n_parsed = parsed.size();
    auto latest = ingest::latest_per_fund_quarter(std::move(parsed));

    std::vector<ingest::HoldingRecord> records;
    std::set<std::string> cusips;
    for (const auto& p : latest)
        for (const auto& r : p.records)
            if (config.window.contains(r.quarter)) {
                records.push_back(r);
                cusips.insert(r.cusip);
            }

    ingest::FigiOptions fo;
    fo.cache_dir = config.cache_dir;
    fo.api_key = config.figi_api_key;
    if (ctx.sleep) fo.retry.sleep = ctx.sleep;
    ingest::FigiClient figi(*transport, fo);
    const auto enriched = figi.enrich(cusips);
    log(fmt::format("figi: {} identifiers, {} failed, {} network requests", cusips.size(), enriched.failed,
                    enriched.network_requests));

    const auto filtered = ingest::apply_filters(records, enriched.meta);
    const auto rows = ingest::to_holding_rows(filtered.records, enriched.meta);
    write_holdings_tsv(config.out / "holdings.tsv", rows);

    ojson report;
    report["format"] = "fundbasket.ingest/1";
    report["config"] = config.to_json();
    report["filings"] = {{"fetched", fetched.filings.size()},
                         {"parsed", n_parsed},
                         {"superseded", n_parsed - latest.size()},
                         {"used", latest.size()}};
    report["entries"] = {{"dropped_invalid_cusip", dropped_invalid}, {"skipped_missing_fields", skipped_missing}};
    report["figi"] = {{"identifiers", cusips.size()}, {"unresolved_failures", enriched.failed}};
    report["filters"] = counts_json(filtered.counts);
    report["rows"] = rows.size();
    auto& errs = report["fetch_errors"] = ojson::array();
    for (const auto& e : fetched.errors)
        errs.push_back({{"cik", e.cik},
                        {"accession_id", e.accession_id},
                        {"url", e.url},
                        {"status", e.status},
                        {"message", e.message}});
    report["parse_errors"] = parse_errors;
    write_text(config.out / "ingest_report.json", report.dump(2) + "\n");
    log(fmt::format("wrote {} rows to {}", rows.size(), (config.out / "holdings.tsv").generic_string()));

    if (!fetched.errors.empty() || !parse_errors.empty()) {
        log("ingest finished with errors; see ingest_report.json");
        return kDataError;
    }
    return kOk;
}

int cmd_build(const RunConfig& config, const CommandContext& ctx) {
    config.validate();
    RunLog log(config.out, ctx.log);
    const auto panel = load_panel(config);
    const auto split = resolve_split(config, panel);
    log(fmt::format("panel: {} funds, {} items, {} quarters, {} baskets", panel.n_funds(), panel.n_items(),
                    panel.quarters().size(), panel.n_baskets()));
    write_panel_bundle(config, panel, split, "build", log);

    const auto stats_dir = config.out / "stats";
    const auto summary = summary_stats(panel, split.fit_target);
    write_text(stats_dir / "portfolio_stats.md", portfolio_stats_markdown(summary));
    write_text(stats_dir / "portfolio_stats.tsv", portfolio_stats_tsv(summary));
    const auto presence = presence_stats(panel, split.fit_target, split.repeat_window);
    write_text(stats_dir / "presence.md", presence_markdown(presence));
    write_text(stats_dir / "presence.tsv", presence_tsv(presence));
    std::vector<TurnoverStats> turnover;
    for (std::size_t p = 1; p < panel.quarters().size(); ++p) turnover.push_back(turnover_stats(panel, panel.quarters()[p]));
    write_text(stats_dir / "turnover.md", turnover_markdown(turnover));
    write_text(stats_dir / "turnover.tsv", turnover_tsv(turnover));
    log("wrote descriptive statistics to " + stats_dir.generic_string());
    return kOk;
}

int cmd_synth(const RunConfig& config, const CommandContext& ctx) {
    config.validate();
    RunLog log(config.out, ctx.log);
    const auto panel = synth::generate(config.effective_synth());
    const auto split = resolve_split(config, panel);
    write_holdings_tsv(config.out / "holdings.tsv", panel_to_holdings(panel));
    log(fmt::format("synth seed {}: {} funds, {} items, {} baskets", config.effective_synth().seed, panel.n_funds(),
                    panel.n_items(), panel.n_baskets()));
    write_panel_bundle(config, panel, split, "synth", log);
    return kOk;
}

int cmd_eval(const RunConfig& config, const CommandContext& ctx) {
    config.validate();
    if (config.models.empty()) throw ConfigError("eval: no models listed");
    RunLog log(config.out, ctx.log);

    const auto panel = load_panel(config);
    const auto split = resolve_split(config, panel);
    const auto options = eval_options(config);
    log(fmt::format("panel {} funds x {} items; history {}, targets {} and {}", panel.n_funds(), panel.n_items(),
                    split.history.str(), split.valid_target.str(), split.test_target.str()));

    auto run_model = [&](const std::string& name) {
        auto scorer = models::make_scorer(name, params_for(config, name), config.seed);
        models::fit_on_history(*scorer, panel, split);
        eval::ModelResult result;
        result.model = name;
        result.hyperparameters = scorer->hyperparameters();
        for (auto target : {split.valid_target, split.test_target})
            result.outcomes.push_back(eval::evaluate(*scorer, panel, split, target, options));
        if (config.save_models) {
            fs::create_directories(config.out / "models");
            models::save_scorer(*scorer, config.out / "models" / (name + ".fbm"));
        }
        return result;
    };

    eval::Report report;
    report.config = config.to_json();
    report.config["panel_hash"] = hex64(panel.content_hash());
    report.config["split"]["resolved"] = {{"history", split.history.str()},
                                          {"valid_target", split.valid_target.str()},
                                          {"test_target", split.test_target.str()}};

    const auto jobs = static_cast<std::size_t>(config.jobs);
    for (std::size_t start = 0; start < config.models.size(); start += jobs) {
        const auto end = std::min(config.models.size(), start + jobs);
        std::vector<std::future<eval::ModelResult>> pending;
        for (std::size_t m = start; m < end; ++m)
            pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_model,
                                         config.models[m]));
        // Collected in config order whatever finishes first.
        for (std::size_t m = start; m < end; ++m) {
            report.models.push_back(pending[m - start].get());
            log("evaluated " + config.models[m]);
        }
    }

    const auto marks_seed = config.derived_seed("marks");
    write_text(config.out / "report.json", eval::to_json(report).dump(2) + "\n");
    write_text(config.out / "report.md", eval::report_markdown(report, config.ci_level, config.resamples, marks_seed));
    write_text(config.out / "report.tsv", eval::report_tsv(report));
    log("wrote report.json, report.md and report.tsv to " + config.out.generic_string());
    return kOk;
}

int cmd_report(const std::vector<fs::path>& inputs, const fs::path& out, const CommandContext& ctx) {
    if (inputs.empty()) throw ConfigError("report: no input reports given");
    eval::Report merged;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot read report " + path.generic_string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("report " + path.generic_string() + ": " + e.what());
        }
        eval::merge(merged, eval::report_from_json(j));
    }
    std::set<std::string> names;
    for (const auto& m : merged.models)
        if (!names.insert(m.model).second)
            throw DataError("report: model '" + m.model + "' appears in more than one input");

    const auto& cfg = merged.config;
    const double level = cfg.value("ci_level", 0.95);
    const int resamples = cfg.value("resamples", 2000);
    const std::uint64_t seed = cfg.contains("seeds") ? cfg["seeds"].value("marks", std::uint64_t{0}) : 0;

    RunLog log(out, ctx.log);
    write_text(out / "report.json", eval::to_json(merged).dump(2) + "\n");
    write_text(out / "report.md", eval::report_markdown(merged, level, resamples, seed));
    write_text(out / "report.tsv", eval::report_tsv(merged));
    log(fmt::format("merged {} report(s), {} models, into {}", inputs.size(), merged.models.size(),
                    out.generic_string()));
    return kOk;
}

}  // namespace fundbasket::cli
