#include "fundbasket/cli.hpp"
#include "fundbasket/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fundbasket::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
    std::optional<std::string> tasks;
    std::optional<std::string> ks;
    std::optional<std::string> empty_target;
    std::optional<std::string> models;
    std::optional<std::string> source;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "INI run configuration");
    sub->add_option("--seed", o.seed, "Root seed for every random choice");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--jobs", o.jobs, "Models evaluated in parallel");
    sub->add_option("--tasks", o.tasks, "Comma list of nbr, nnbr, nbrr");
    sub->add_option("--k", o.ks, "Comma list of cutoffs");
    sub->add_option("--empty-target", o.empty_target, "skip or zero");
    sub->add_option("--models", o.models, "Comma list of registered models");
    sub->add_option("--source", o.source, "edgar, synth or files");
}

RunConfig resolve(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
        c.synth_seed_set = false;
    }
    if (o.out) c.out = *o.out;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.source) c.source = *o.source;
    if (o.models) c.models = split_list(*o.models);
    if (o.tasks) {
        c.tasks.clear();
        for (const auto& t : split_list(*o.tasks)) c.tasks.push_back(eval::parse_task(t));
    }
    if (o.ks) {
        c.ks.clear();
        for (const auto& k : split_list(*o.ks)) {
            try {
                std::size_t used = 0;
                c.ks.push_back(std::stoi(k, &used));
                if (used != k.size()) throw std::invalid_argument(k);
            } catch (const std::logic_error&) {
                throw ConfigError("--k: '" + k + "' is not an integer");
            }
        }
    }
    if (o.empty_target) {
        if (*o.empty_target == "skip") c.empty_target = eval::EmptyTargetMode::Skip;
        else if (*o.empty_target == "zero") c.empty_target = eval::EmptyTargetMode::Zero;
        else throw ConfigError("--empty-target must be skip or zero");
    }
    return c;
}

}  // namespace

int run(int argc, const char* const* argv, const CommandContext& ctx) {
    CLI::App app{"Next-basket recommendation benchmark over fund holdings", "fundbasket"};
    app.require_subcommand(1);

    Overrides o;
    std::vector<std::string> report_inputs;
    std::string report_out = "report";

    auto* ingest = app.add_subcommand("ingest", "Fetch NPORT-P filings and write holdings.tsv");
    auto* build = app.add_subcommand("build", "Build the panel, atomic files and descriptive statistics");
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic panel");
    auto* evalc = app.add_subcommand("eval", "Fit every listed model on history and evaluate");
    for (auto* sub : {ingest, build, synth, evalc}) add_common(sub, o);
    auto* report = app.add_subcommand("report", "Merge evaluation reports into one comparison table");
    report->add_option("inputs", report_inputs, "report.json files")->required();
    report->add_option("--out", report_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*report) {
            std::vector<fs::path> paths(report_inputs.begin(), report_inputs.end());
            return cmd_report(paths, report_out, ctx);
        }
        const auto config = resolve(o);
        if (*ingest) return cmd_ingest(config, ctx);
        if (*build) return cmd_build(config, ctx);
        if (*synth) return cmd_synth(config, ctx);
        return cmd_eval(config, ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kModelError;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace fundbasket::cli
