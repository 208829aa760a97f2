#pragma once

#include "fundbasket/dataset.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fundbasket {

/// Header of every `.inter` atomic file, tab separated.
inline constexpr const char* kAtomicHeader = "user_id:token\titem_id:token\ttimestamp:float\trating:float";

/// Header of `holdings.tsv`.
inline constexpr const char* kHoldingsHeader = "fund_id\tcusip\tticker\tquarter\tvalue_usd\tweight";

struct AtomicFiles {
    std::filesystem::path train;
    std::filesystem::path valid;
    std::filesystem::path test;
};

/// Writes `<name>.train.inter` (history quarters), `<name>.valid.inter` and
/// `<name>.test.inter` (the two target quarters). One row per
/// (fund, item, quarter) with the allocation weight as rating.
AtomicFiles export_atomic(const PanelDataset& panel, const SplitSpec& split, const std::filesystem::path& out_dir,
                          const std::string& name);

/// Reads one or more `.inter` files back into a panel. Weights are taken
/// verbatim from the rating column.
PanelDataset import_atomic(const std::vector<std::filesystem::path>& files);

std::vector<HoldingRow> read_holdings_tsv(const std::filesystem::path& path);
void write_holdings_tsv(const std::filesystem::path& path, std::vector<HoldingRow> rows);

/// Holdings rows reproducing `panel` exactly (weights) with value_usd =
/// weight * notional.
std::vector<HoldingRow> panel_to_holdings(const PanelDataset& panel, double notional_usd = 1e9);

/// Vocab sizes, quarters, content hash and an optional provenance blob.
void write_panel_json(const std::filesystem::path& path, const PanelDataset& panel,
                      const std::string& provenance_json = "{}");

}  // namespace fundbasket
