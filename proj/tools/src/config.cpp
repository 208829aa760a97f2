#include "fundbasket/cli.hpp"
#include "fundbasket/errors.hpp"
#include "fundbasket/hash.hpp"
#include "fundbasket/ingest.hpp"
#include "fundbasket/models.hpp"
#include "fundbasket/panel_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <set>

namespace fundbasket::cli {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
    const auto text = trim(raw);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("config: '" + key + "' is not a valid number: '" + raw + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
    const auto v = trim(raw);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: '" + key + "' is not a boolean: '" + raw + "'");
}

Quarter parse_quarter(const std::string& key, const std::string& raw) {
    try {
        return Quarter::parse(trim(raw));
    } catch (const std::exception& e) {
        throw ConfigError("config: '" + key + "': " + e.what());
    }
}

QuarterRange parse_range(const std::string& key, const std::string& raw) {
    try {
        return QuarterRange::parse(trim(raw));
    } catch (const std::exception& e) {
        throw ConfigError("config: '" + key + "': " + e.what());
    }
}

/// INI strings become JSON numbers or booleans when they look like one.
nlohmann::json param_value(const std::string& raw) {
    const auto text = trim(raw);
    if (text == "true") return true;
    if (text == "false") return false;
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
    if (ec == std::errc() && ptr == text.data() + text.size() && !text.empty()) {
        long long i = 0;
        auto [iptr, iec] = std::from_chars(text.data(), text.data() + text.size(), i);
        if (iec == std::errc() && iptr == text.data() + text.size()) return i;
        return d;
    }
    return text;
}

void reject_unknown(const pt::ptree& section, const std::string& name, const std::set<std::string>& allowed) {
    for (const auto& [key, child] : section) {
        if (!child.empty()) throw ConfigError("config: unexpected section nesting under '" + name + "'");
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "'" + (name.empty() ? "" : " in [" + name + "]"));
    }
}

}  // namespace

RunConfig load_config(const fs::path& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    RunConfig c;
    const std::set<std::string> top_keys = {"source", "name", "out", "seed", "jobs", "models", "k", "tasks",
                                            "empty_target", "save_models"};
    for (const auto& [key, child] : tree) {
        if (!child.empty()) continue;
        if (!top_keys.count(key)) throw ConfigError("config: unknown key '" + key + "'");
        const auto v = trim(child.data());
        if (key == "source") c.source = v;
        if (key == "name") c.name = v;
        if (key == "out") c.out = v;
        if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
        if (key == "jobs") c.jobs = parse_number<int>(key, v);
        if (key == "models") c.models = split_list(v);
        if (key == "save_models") c.save_models = parse_bool(key, v);
        if (key == "empty_target") c.empty_target = v == "zero"   ? eval::EmptyTargetMode::Zero
                                                    : v == "skip" ? eval::EmptyTargetMode::Skip
                                                                  : throw ConfigError("config: empty_target must be skip or zero");
        if (key == "k") {
            c.ks.clear();
            for (const auto& s : split_list(v)) c.ks.push_back(parse_number<int>(key, s));
        }
        if (key == "tasks") {
            c.tasks.clear();
            for (const auto& s : split_list(v)) c.tasks.push_back(eval::parse_task(s));
        }
    }

    for (const auto& [section, body] : tree) {
        if (body.empty()) continue;
        if (section == "edgar") {
            reject_unknown(body, section, {"ciks", "window", "cache_dir", "user_agent", "figi_api_key"});
            if (auto v = body.get_optional<std::string>("ciks")) c.ciks = split_list(*v);
            if (auto v = body.get_optional<std::string>("window")) c.window = parse_range("edgar.window", *v);
            if (auto v = body.get_optional<std::string>("cache_dir")) c.cache_dir = trim(*v);
            if (auto v = body.get_optional<std::string>("user_agent")) c.user_agent = trim(*v);
            if (auto v = body.get_optional<std::string>("figi_api_key")) c.figi_api_key = trim(*v);
        } else if (section == "files") {
            reject_unknown(body, section, {"holdings", "min_history"});
            if (auto v = body.get_optional<std::string>("holdings")) c.holdings = trim(*v);
            if (auto v = body.get_optional<std::string>("min_history"))
                c.min_history = parse_number<int>("files.min_history", *v);
        } else if (section == "split") {
            reject_unknown(body, section, {"history_quarters", "repeat_window", "history", "valid_target", "test_target"});
            if (auto v = body.get_optional<std::string>("history_quarters"))
                c.history_quarters = parse_number<int>("split.history_quarters", *v);
            if (auto v = body.get_optional<std::string>("repeat_window"))
                c.repeat_window = parse_number<int>("split.repeat_window", *v);
            if (auto v = body.get_optional<std::string>("history")) c.history = parse_range("split.history", *v);
            if (auto v = body.get_optional<std::string>("valid_target"))
                c.valid_target = parse_quarter("split.valid_target", *v);
            if (auto v = body.get_optional<std::string>("test_target"))
                c.test_target = parse_quarter("split.test_target", *v);
        } else if (section == "eval") {
            reject_unknown(body, section, {"resamples", "ci_level"});
            if (auto v = body.get_optional<std::string>("resamples"))
                c.resamples = parse_number<int>("eval.resamples", *v);
            if (auto v = body.get_optional<std::string>("ci_level"))
                c.ci_level = parse_number<double>("eval.ci_level", *v);
        } else if (section == "synth") {
            std::map<std::string, std::string> pairs;
            for (const auto& [key, child] : body) pairs[key] = trim(child.data());
            c.synth_seed_set = pairs.count("seed") > 0;
            c.synth = synth::config_from_pairs(pairs);
        } else if (section.rfind("model.", 0) == 0) {
            auto& params = c.model_params[section.substr(6)];
            params = nlohmann::json::object();
            for (const auto& [key, child] : body) params[key] = param_value(child.data());
        } else {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }
    return c;
}

void RunConfig::validate() const {
    if (source != "edgar" && source != "synth" && source != "files")
        throw ConfigError("config: source must be edgar, synth or files (got '" + source + "')");
    if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("config: name must be a plain file stem");
    if (out.empty()) throw ConfigError("config: out directory is empty");
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (window.empty()) throw ConfigError("config: edgar.window is empty");
    if (min_history < 1) throw ConfigError("config: files.min_history must be >= 1");
    if (history_quarters < 1) throw ConfigError("config: split.history_quarters must be >= 1");
    if (repeat_window < 1) throw ConfigError("config: split.repeat_window must be >= 1");
    if (ks.empty()) throw ConfigError("config: no K requested");
    for (int k : ks)
        if (k < 1) throw ConfigError("config: K must be >= 1");
    if (tasks.empty()) throw ConfigError("config: no task requested");
    if (resamples < 1) throw ConfigError("config: eval.resamples must be >= 1");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("config: eval.ci_level must lie in (0, 1)");

    const bool any_override = history || valid_target || test_target;
    if (any_override) {
        if (!(history && valid_target && test_target))
            throw ConfigError("config: split overrides need history, valid_target and test_target together");
        SplitSpec s{*history, history->last, *valid_target, *test_target, repeat_window};
        s.validate();
    }

    std::set<std::string> seen;
    for (const auto& m : models) {
        if (!seen.insert(m).second) throw ConfigError("config: model '" + m + "' listed twice");
        auto it = model_params.find(m);
        // Constructing validates the name and every hyperparameter.
        models::make_scorer(m, it == model_params.end() ? nlohmann::json::object() : it->second, seed);
    }
    for (const auto& [m, _] : model_params)
        if (!seen.count(m) && std::find(models::registry().begin(), models::registry().end(), m) == models::registry().end())
            throw ConfigError("config: [model." + m + "] does not name a registered model");
    effective_synth().validate();
}

std::uint64_t RunConfig::derived_seed(std::string_view purpose) const {
    Fnv1a h;
    h.add(seed);
    h.add(purpose);
    return h.value();
}

synth::SynthConfig RunConfig::effective_synth() const {
    auto s = synth;
    if (!synth_seed_set) s.seed = seed;
    return s;
}

fs::path RunConfig::holdings_path() const {
    return holdings.empty() ? out / "holdings.tsv" : holdings;
}

ojson RunConfig::to_json() const {
    ojson j;
    j["source"] = source;
    j["name"] = name;
    j["seed"] = seed;
    j["seeds"] = {{"synth", effective_synth().seed},
                  {"random", seed},
                  {"bootstrap", derived_seed("bootstrap")},
                  {"marks", derived_seed("marks")}};
    if (source == "edgar")
        j["edgar"] = {{"ciks", ciks}, {"window", window.str()}, {"user_agent", user_agent}};
    if (source != "synth") j["files"] = {{"holdings", holdings_path().generic_string()}, {"min_history", min_history}};
    ojson split = {{"history_quarters", history_quarters}, {"repeat_window", repeat_window}};
    if (history) split["history"] = history->str();
    if (valid_target) split["valid_target"] = valid_target->str();
    if (test_target) split["test_target"] = test_target->str();
    j["split"] = split;
    if (source == "synth") {
        const auto s = effective_synth();
        j["synth"] = {{"n_funds", s.n_funds},
                      {"n_items", s.n_items},
                      {"n_quarters", s.n_quarters},
                      {"start", s.start.str()},
                      {"size_log_mean", s.size_log_mean},
                      {"size_log_std", s.size_log_std},
                      {"max_size_fraction", s.max_size_fraction},
                      {"turnover_a", s.turnover_a},
                      {"turnover_b", s.turnover_b},
                      {"popularity_exponent", s.popularity_exponent},
                      {"latent_dim", s.latent_dim},
                      {"style_affinity", s.style_affinity},
                      {"coholding_affinity", s.coholding_affinity},
                      {"seed", s.seed}};
    }
    j["models"] = models;
    ojson params = ojson::object();
    for (const auto& m : models) {
        auto it = model_params.find(m);
        params[m] = models::make_scorer(m, it == model_params.end() ? nlohmann::json::object() : it->second, seed)
                        ->hyperparameters();
    }
    j["hyperparameters"] = params;
    j["k"] = ks;
    auto& t = j["tasks"] = ojson::array();
    for (auto task : tasks) t.push_back(std::string(eval::to_string(task)));
    j["empty_target"] = empty_target == eval::EmptyTargetMode::Skip ? "skip" : "zero";
    j["resamples"] = resamples;
    j["ci_level"] = ci_level;
    return j;
}

SplitSpec resolve_split(const RunConfig& config, const PanelDataset& panel) {
    SplitSpec s;
    if (config.history) {
        s = SplitSpec{*config.history, config.history->last, *config.valid_target, *config.test_target,
                      config.repeat_window};
        s.validate();
        for (auto q : {s.history.first, s.history.last, s.valid_target, s.test_target})
            if (!panel.has_quarter(q)) throw DataError("split quarter " + q.str() + " is not in the panel");
    } else {
        s = temporal_split(panel, config.history_quarters, config.repeat_window);
    }
    return s;
}

PanelDataset load_panel(const RunConfig& config) {
    if (config.source == "synth") return synth::generate(config.effective_synth());
    const auto path = config.holdings_path();
    if (!fs::exists(path))
        throw DataError("holdings file " + path.generic_string() + " not found (run `fundbasket ingest` first)");
    return build_panel(read_holdings_tsv(path), config.min_history);
}

}  // namespace fundbasket::cli
