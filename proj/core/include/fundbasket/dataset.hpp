#pragma once

#include "fundbasket/quarter.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fundbasket {

using FundIndex = std::int32_t;
using ItemIndex = std::int32_t;

/// Dense index <-> identifier bijection. Identifiers are kept in sorted
/// order so that two vocabularies built from the same id sets agree.
class Index {
public:
    Index() = default;
    explicit Index(std::vector<std::string> ids);

    std::int32_t size() const { return static_cast<std::int32_t>(ids_.size()); }
    const std::string& id(std::int32_t index) const { return ids_.at(static_cast<std::size_t>(index)); }
    std::optional<std::int32_t> find(const std::string& id) const;
    std::int32_t at(const std::string& id) const;
    const std::vector<std::string>& ids() const { return ids_; }

    bool operator==(const Index& other) const { return ids_ == other.ids_; }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::int32_t> lookup_;
};

struct Vocab {
    Index funds;
    Index items;
    /// Display label per item (ticker when known); may be empty.
    std::vector<std::string> item_labels;

    std::int32_t n_funds() const { return funds.size(); }
    std::int32_t n_items() const { return items.size(); }
    const std::string& label(ItemIndex i) const;

    bool operator==(const Vocab&) const = default;
};

/// One fund's holdings in one quarter. Items are sorted ascending and
/// `weights[k]` is the allocation fraction of `items[k]`.
struct Basket {
    std::vector<ItemIndex> items;
    std::vector<double> weights;

    bool contains(ItemIndex i) const;
    std::size_t size() const { return items.size(); }
    bool operator==(const Basket&) const = default;
};

/// Fund x quarter panel of baskets. Immutable once built.
class PanelDataset {
public:
    PanelDataset() = default;

    const Vocab& vocab() const { return vocab_; }
    std::int32_t n_funds() const { return vocab_.n_funds(); }
    std::int32_t n_items() const { return vocab_.n_items(); }

    const std::vector<Quarter>& quarters() const { return quarters_; }
    std::optional<std::size_t> quarter_position(Quarter q) const;
    bool has_quarter(Quarter q) const { return quarter_position(q).has_value(); }

    /// nullptr when the fund holds nothing that quarter.
    const Basket* basket(FundIndex fund, Quarter q) const;
    const Basket* basket_at(FundIndex fund, std::size_t quarter_pos) const;

    /// Funds holding a basket at the given quarter, ascending.
    std::vector<FundIndex> funds_present(Quarter q) const;
    std::size_t n_baskets() const;

    /// Same vocabulary, only the quarters inside `range`.
    PanelDataset slice(const QuarterRange& range) const;

    /// Stable 64-bit content hash (vocab, quarters, baskets, weights).
    std::uint64_t content_hash() const;

    bool operator==(const PanelDataset&) const = default;

private:
    friend class PanelBuilder;

    Vocab vocab_;
    std::vector<Quarter> quarters_;
    // baskets_[fund][quarter position]; empty optional = no holdings
    std::vector<std::vector<std::optional<Basket>>> baskets_;
};

/// Accumulates (fund, item, quarter, weight) facts and produces a panel.
/// Repeated facts for the same key add their weights.
class PanelBuilder {
public:
    void add(const std::string& fund_id, const std::string& item_id, Quarter q, double weight,
             const std::string& item_label = {});
    /// Declare a quarter even if no basket falls in it.
    void add_quarter(Quarter q);

    /// Throws DataError on an empty panel or invalid weights.
    PanelDataset build() const;

private:
    struct Key {
        std::string fund;
        int quarter;
        std::string item;
        auto operator<=>(const Key&) const = default;
    };
    std::map<Key, double> weights_;
    std::map<std::string, std::string> labels_;
    std::vector<Quarter> extra_quarters_;
};

/// Slice rebuilt with a vocabulary restricted to funds and items that
/// appear inside `range`.
PanelDataset compact_slice(const PanelDataset& panel, const QuarterRange& range);

/// Same identifiers, quarters and baskets (display labels ignored).
bool equivalent(const PanelDataset& a, const PanelDataset& b);

/// Normalized holding row, the `holdings.tsv` record.
struct HoldingRow {
    std::string fund_id;
    std::string cusip;
    std::string ticker;
    Quarter quarter;
    double value_usd = 0.0;
    double weight = 0.0;
};

/// Weights become value / total retained value of the fund that quarter.
/// Funds with fewer than `min_history` baskets are dropped.
PanelDataset build_panel(const std::vector<HoldingRow>& holdings, int min_history = 2);

inline constexpr double kWeightSumTolerance = 1e-6;

struct SplitSpec {
    QuarterRange history;
    Quarter fit_target;
    Quarter valid_target;
    Quarter test_target;
    int repeat_window = 4;

    /// Throws ConfigError when any target could leak into history.
    void validate() const;
};

/// Default protocol: first five quarters as history, then validation and
/// test targets.
SplitSpec temporal_split(const PanelDataset& panel, int history_quarters = 5, int repeat_window = 4);

/// Binary fund x item incidence in CSR form.
class InteractionMatrix {
public:
    InteractionMatrix(std::int32_t n_funds, std::int32_t n_items, std::vector<std::vector<ItemIndex>> rows);

    std::int32_t n_funds() const { return n_funds_; }
    std::int32_t n_items() const { return n_items_; }
    std::span<const ItemIndex> row(FundIndex u) const { return rows_.at(static_cast<std::size_t>(u)); }
    bool at(FundIndex u, ItemIndex i) const;
    std::size_t nnz() const;

    bool operator==(const InteractionMatrix&) const = default;

private:
    std::int32_t n_funds_ = 0;
    std::int32_t n_items_ = 0;
    std::vector<std::vector<ItemIndex>> rows_;
};

/// M[u,i] = 1 iff fund u held item i in any quarter of `range`.
InteractionMatrix interaction_matrix(const PanelDataset& panel, const QuarterRange& range);

/// Novel/repeat partition for one target quarter. Stored sparsely as the
/// repeat universe R (E = 0); everything else is novel (E = 1).
class ExploreMask {
public:
    ExploreMask(Quarter target, int window, std::int32_t n_items, std::vector<std::vector<ItemIndex>> repeat);

    Quarter target() const { return target_; }
    int window() const { return window_; }
    std::int32_t n_funds() const { return static_cast<std::int32_t>(repeat_.size()); }
    std::int32_t n_items() const { return n_items_; }

    bool is_novel(FundIndex u, ItemIndex i) const { return !is_repeat(u, i); }
    bool is_repeat(FundIndex u, ItemIndex i) const;
    std::span<const ItemIndex> repeat_items(FundIndex u) const { return repeat_.at(static_cast<std::size_t>(u)); }

private:
    Quarter target_;
    int window_ = 0;
    std::int32_t n_items_ = 0;
    std::vector<std::vector<ItemIndex>> repeat_;
};

/// E[u,i] = 1 - [i held by u in the `window` quarters strictly before target].
/// Quarters missing from the panel inside that window count as empty.
ExploreMask explore_mask(const PanelDataset& panel, Quarter target, int window = 4);

}  // namespace fundbasket
