#include "fundbasket/panel_io.hpp"

#include "fundbasket/errors.hpp"
#include "fundbasket/hash.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace fundbasket {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

double parse_double(const std::string& text, const fs::path& file, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError(fmt::format("{}:{}: invalid number '{}'", file.string(), line_no, text));
    return v;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

void write_inter(const fs::path& path, const PanelDataset& panel, const QuarterRange& range) {
    auto out = open_out(path);
    out << kAtomicHeader << '\n';
    for (FundIndex u = 0; u < panel.n_funds(); ++u) {
        for (auto q : range.quarters()) {
            const auto* b = panel.basket(u, q);
            if (!b) continue;
            const auto ts = q.epoch_seconds();
            for (std::size_t k = 0; k < b->size(); ++k) {
                out << panel.vocab().funds.id(u) << '\t' << panel.vocab().items.id(b->items[k]) << '\t'
                    << fmt::format("{}.0\t{:.17g}\n", ts, b->weights[k]);
            }
        }
    }
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

AtomicFiles export_atomic(const PanelDataset& panel, const SplitSpec& split, const fs::path& out_dir,
                          const std::string& name) {
    split.validate();
    AtomicFiles files{out_dir / (name + ".train.inter"), out_dir / (name + ".valid.inter"),
                      out_dir / (name + ".test.inter")};
    write_inter(files.train, panel, split.history);
    write_inter(files.valid, panel, {split.valid_target, split.valid_target});
    write_inter(files.test, panel, {split.test_target, split.test_target});
    return files;
}

PanelDataset import_atomic(const std::vector<fs::path>& files) {
    PanelBuilder builder;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot read " + path.string());
        std::string line;
        if (!std::getline(in, line) || line != kAtomicHeader)
            throw DataError(path.string() + ": missing atomic-file header");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto cols = split_tabs(line);
            if (cols.size() != 4) throw DataError(fmt::format("{}:{}: expected 4 columns", path.string(), line_no));
            const auto ts = static_cast<std::int64_t>(parse_double(cols[2], path, line_no));
            builder.add(cols[0], cols[1], Quarter::from_epoch_seconds(ts), parse_double(cols[3], path, line_no));
        }
    }
    return builder.build();
}

std::vector<HoldingRow> read_holdings_tsv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kHoldingsHeader)
        throw DataError(path.string() + ": unexpected holdings header");
    std::vector<HoldingRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 6) throw DataError(fmt::format("{}:{}: expected 6 columns", path.string(), line_no));
        HoldingRow row;
        row.fund_id = cols[0];
        row.cusip = cols[1];
        row.ticker = cols[2];
        row.quarter = Quarter::parse(cols[3]);
        row.value_usd = parse_double(cols[4], path, line_no);
        row.weight = parse_double(cols[5], path, line_no);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_holdings_tsv(const fs::path& path, std::vector<HoldingRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const HoldingRow& a, const HoldingRow& b) {
        return std::tie(a.fund_id, a.quarter, a.cusip) < std::tie(b.fund_id, b.quarter, b.cusip);
    });
    auto out = open_out(path);
    out << kHoldingsHeader << '\n';
    for (const auto& r : rows)
        out << fmt::format("{}\t{}\t{}\t{}\t{:.17g}\t{:.17g}\n", r.fund_id, r.cusip, r.ticker, r.quarter.str(),
                           r.value_usd, r.weight);
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<HoldingRow> panel_to_holdings(const PanelDataset& panel, double notional_usd) {
    std::vector<HoldingRow> rows;
    for (FundIndex u = 0; u < panel.n_funds(); ++u) {
        for (auto q : panel.quarters()) {
            const auto* b = panel.basket(u, q);
            if (!b) continue;
            for (std::size_t k = 0; k < b->size(); ++k) {
                const auto i = b->items[k];
                const auto& label = panel.vocab().item_labels[static_cast<std::size_t>(i)];
                rows.push_back({panel.vocab().funds.id(u), panel.vocab().items.id(i), label, q,
                                b->weights[k] * notional_usd, b->weights[k]});
            }
        }
    }
    return rows;
}

void write_panel_json(const fs::path& path, const PanelDataset& panel, const std::string& provenance_json) {
    nlohmann::ordered_json j;
    j["format"] = "fundbasket.panel/1";
    j["n_funds"] = panel.n_funds();
    j["n_items"] = panel.n_items();
    j["n_baskets"] = panel.n_baskets();
    auto& qs = j["quarters"] = nlohmann::ordered_json::array();
    for (auto q : panel.quarters()) qs.push_back(q.str());
    j["content_hash"] = hex64(panel.content_hash());
    j["provenance"] = nlohmann::ordered_json::parse(provenance_json);
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace fundbasket
