#pragma once

#include "fundbasket/dataset.hpp"
#include "fundbasket/eval.hpp"
#include "fundbasket/http.hpp"
#include "fundbasket/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fundbasket::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfigError = 2, kDataError = 3, kModelError = 4 };

struct RunConfig {
    std::string source = "synth";  // edgar | synth | files
    std::string name = "fundbasket";
    std::filesystem::path out = "out";
    std::uint64_t seed = 0;
    int jobs = 1;

    // edgar
    std::vector<std::string> ciks;
    QuarterRange window{Quarter(2020, 1), Quarter(2021, 3)};
    std::filesystem::path cache_dir = "cache";
    std::string user_agent = "fundbasket research tool admin@example.com";
    std::string figi_api_key;

    // files
    std::filesystem::path holdings;
    int min_history = 2;

    // split
    int history_quarters = 5;
    int repeat_window = 4;
    std::optional<QuarterRange> history;
    std::optional<Quarter> valid_target;
    std::optional<Quarter> test_target;

    // models and evaluation
    std::vector<std::string> models;
    std::map<std::string, nlohmann::json> model_params;
    std::vector<int> ks = {10, 20};
    std::vector<eval::TaskKind> tasks = {eval::TaskKind::NBR, eval::TaskKind::NNBR, eval::TaskKind::NBRR};
    eval::EmptyTargetMode empty_target = eval::EmptyTargetMode::Skip;
    int resamples = 2000;
    double ci_level = 0.95;
    bool save_models = false;

    synth::SynthConfig synth;
    /// True when the synth seed was set explicitly rather than derived.
    bool synth_seed_set = false;

    /// Throws ConfigError on the first invalid field.
    void validate() const;
    nlohmann::ordered_json to_json() const;

    std::uint64_t derived_seed(std::string_view purpose) const;
    synth::SynthConfig effective_synth() const;
    /// Default holdings path for the edgar/files sources.
    std::filesystem::path holdings_path() const;
};

/// Reads an INI file (top-level keys, [edgar], [files], [split], [synth],
/// [eval] and one [model.<name>] section per model).
RunConfig load_config(const std::filesystem::path& path);

/// Parses "a,b c" style lists.
std::vector<std::string> split_list(const std::string& text);

/// Split from config overrides, falling back to the default protocol.
SplitSpec resolve_split(const RunConfig& config, const PanelDataset& panel);

PanelDataset load_panel(const RunConfig& config);

struct CommandContext {
    std::ostream* log = nullptr;
    /// Network transport for ingest; when null a TLS client is created.
    http::Transport* transport = nullptr;
    /// Sleep hook for retries (tests pass a no-op).
    std::function<void(std::chrono::milliseconds)> sleep;
};

int cmd_ingest(const RunConfig& config, const CommandContext& ctx);
int cmd_build(const RunConfig& config, const CommandContext& ctx);
int cmd_synth(const RunConfig& config, const CommandContext& ctx);
int cmd_eval(const RunConfig& config, const CommandContext& ctx);
int cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out,
               const CommandContext& ctx);

/// Full command-line entry point; maps exceptions to exit codes.
int run(int argc, const char* const* argv, const CommandContext& ctx);

}  // namespace fundbasket::cli
