#include "fundbasket/dataset.hpp"

#include "fundbasket/errors.hpp"
#include "fundbasket/hash.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fundbasket {

// ---------------------------------------------------------------------------
// Index / Vocab / Basket

Index::Index(std::vector<std::string> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    lookup_.reserve(ids_.size());
    for (std::size_t k = 0; k < ids_.size(); ++k) lookup_.emplace(ids_[k], static_cast<std::int32_t>(k));
}

std::optional<std::int32_t> Index::find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::int32_t Index::at(const std::string& id) const {
    auto found = find(id);
    if (!found) throw DataError("unknown identifier '" + id + "'");
    return *found;
}

const std::string& Vocab::label(ItemIndex i) const {
    const auto& l = item_labels.at(static_cast<std::size_t>(i));
    return l.empty() ? items.id(i) : l;
}

bool Basket::contains(ItemIndex i) const {
    return std::binary_search(items.begin(), items.end(), i);
}

// ---------------------------------------------------------------------------
// PanelDataset

std::optional<std::size_t> PanelDataset::quarter_position(Quarter q) const {
    auto it = std::lower_bound(quarters_.begin(), quarters_.end(), q);
    if (it == quarters_.end() || *it != q) return std::nullopt;
    return static_cast<std::size_t>(it - quarters_.begin());
}

const Basket* PanelDataset::basket(FundIndex fund, Quarter q) const {
    auto pos = quarter_position(q);
    if (!pos) return nullptr;
    return basket_at(fund, *pos);
}

const Basket* PanelDataset::basket_at(FundIndex fund, std::size_t quarter_pos) const {
    const auto& row = baskets_.at(static_cast<std::size_t>(fund));
    if (quarter_pos >= row.size() || !row[quarter_pos]) return nullptr;
    return &*row[quarter_pos];
}

std::vector<FundIndex> PanelDataset::funds_present(Quarter q) const {
    std::vector<FundIndex> out;
    auto pos = quarter_position(q);
    if (!pos) return out;
    for (FundIndex u = 0; u < n_funds(); ++u)
        if (basket_at(u, *pos)) out.push_back(u);
    return out;
}

std::size_t PanelDataset::n_baskets() const {
    std::size_t n = 0;
    for (const auto& row : baskets_)
        for (const auto& b : row) n += b.has_value();
    return n;
}

PanelDataset PanelDataset::slice(const QuarterRange& range) const {
    PanelDataset out;
    out.vocab_ = vocab_;
    std::vector<std::size_t> keep;
    for (std::size_t p = 0; p < quarters_.size(); ++p) {
        if (range.contains(quarters_[p])) {
            out.quarters_.push_back(quarters_[p]);
            keep.push_back(p);
        }
    }
    out.baskets_.resize(baskets_.size());
    for (std::size_t u = 0; u < baskets_.size(); ++u) {
        out.baskets_[u].reserve(keep.size());
        for (auto p : keep) out.baskets_[u].push_back(baskets_[u][p]);
    }
    return out;
}

std::uint64_t PanelDataset::content_hash() const {
    Fnv1a h;
    for (const auto& id : vocab_.funds.ids()) h.add(id);
    for (const auto& id : vocab_.items.ids()) h.add(id);
    for (auto q : quarters_) h.add(q.ordinal());
    for (std::size_t u = 0; u < baskets_.size(); ++u) {
        for (std::size_t p = 0; p < baskets_[u].size(); ++p) {
            if (!baskets_[u][p]) continue;
            h.add(static_cast<std::int64_t>(u));
            h.add(static_cast<std::int64_t>(p));
            for (auto i : baskets_[u][p]->items) h.add(i);
            for (auto w : baskets_[u][p]->weights) h.add(w);
        }
    }
    return h.value();
}

// ---------------------------------------------------------------------------
// PanelBuilder

void PanelBuilder::add(const std::string& fund_id, const std::string& item_id, Quarter q, double weight,
                       const std::string& item_label) {
    weights_[Key{fund_id, q.ordinal(), item_id}] += weight;
    if (!item_label.empty()) labels_[item_id] = item_label;
}

void PanelBuilder::add_quarter(Quarter q) {
    extra_quarters_.push_back(q);
}

PanelDataset PanelBuilder::build() const {
    if (weights_.empty()) throw DataError("panel has no holdings");

    std::vector<std::string> fund_ids;
    std::vector<std::string> item_ids;
    int qmin = weights_.begin()->first.quarter;
    int qmax = qmin;
    for (const auto& [key, w] : weights_) {
        if (!std::isfinite(w) || w <= 0.0)
            throw DataError("non-positive weight for fund " + key.fund + ", item " + key.item);
        fund_ids.push_back(key.fund);
        item_ids.push_back(key.item);
        qmin = std::min(qmin, key.quarter);
        qmax = std::max(qmax, key.quarter);
    }
    for (auto q : extra_quarters_) {
        qmin = std::min(qmin, q.ordinal());
        qmax = std::max(qmax, q.ordinal());
    }

    PanelDataset panel;
    panel.vocab_.funds = Index(std::move(fund_ids));
    panel.vocab_.items = Index(std::move(item_ids));
    panel.vocab_.item_labels.resize(static_cast<std::size_t>(panel.vocab_.items.size()));
    for (const auto& [item, label] : labels_) {
        if (auto i = panel.vocab_.items.find(item)) panel.vocab_.item_labels[static_cast<std::size_t>(*i)] = label;
    }
    for (int o = qmin; o <= qmax; ++o) panel.quarters_.push_back(Quarter::from_ordinal(o));

    const auto n_q = panel.quarters_.size();
    panel.baskets_.assign(static_cast<std::size_t>(panel.vocab_.funds.size()),
                          std::vector<std::optional<Basket>>(n_q));
    // weights_ is ordered by (fund, quarter, item) so items arrive sorted
    // by id; item indices follow id order, hence stay sorted.
    for (const auto& [key, w] : weights_) {
        auto u = static_cast<std::size_t>(panel.vocab_.funds.at(key.fund));
        auto p = static_cast<std::size_t>(key.quarter - qmin);
        auto& slot = panel.baskets_[u][p];
        if (!slot) slot.emplace();
        slot->items.push_back(panel.vocab_.items.at(key.item));
        slot->weights.push_back(w);
    }
    for (std::size_t u = 0; u < panel.baskets_.size(); ++u) {
        for (std::size_t p = 0; p < n_q; ++p) {
            const auto& slot = panel.baskets_[u][p];
            if (!slot) continue;
            double total = 0.0;
            for (auto w : slot->weights) total += w;
            if (total > 1.0 + kWeightSumTolerance)
                throw DataError("weights of fund " + panel.vocab_.funds.id(static_cast<std::int32_t>(u)) + " in " +
                                panel.quarters_[p].str() + " sum to " + std::to_string(total));
        }
    }
    return panel;
}

PanelDataset compact_slice(const PanelDataset& panel, const QuarterRange& range) {
    PanelBuilder builder;
    for (FundIndex u = 0; u < panel.n_funds(); ++u) {
        for (auto q : panel.quarters()) {
            if (!range.contains(q)) continue;
            const auto* b = panel.basket(u, q);
            if (!b) continue;
            for (std::size_t k = 0; k < b->size(); ++k)
                builder.add(panel.vocab().funds.id(u), panel.vocab().items.id(b->items[k]), q, b->weights[k],
                            panel.vocab().item_labels[static_cast<std::size_t>(b->items[k])]);
        }
    }
    for (auto q : panel.quarters())
        if (range.contains(q)) builder.add_quarter(q);
    return builder.build();
}

bool equivalent(const PanelDataset& a, const PanelDataset& b) {
    if (!(a.vocab().funds == b.vocab().funds) || !(a.vocab().items == b.vocab().items)) return false;
    if (a.quarters() != b.quarters()) return false;
    for (FundIndex u = 0; u < a.n_funds(); ++u) {
        for (std::size_t p = 0; p < a.quarters().size(); ++p) {
            const auto* x = a.basket_at(u, p);
            const auto* y = b.basket_at(u, p);
            if ((x == nullptr) != (y == nullptr)) return false;
            if (x && !(*x == *y)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// build_panel

PanelDataset build_panel(const std::vector<HoldingRow>& holdings, int min_history) {
    if (min_history < 1) throw ConfigError("min_history must be >= 1");

    struct FundQuarter {
        std::string fund;
        int quarter;
        auto operator<=>(const FundQuarter&) const = default;
    };
    std::map<FundQuarter, double> totals;
    std::set<int> quarters;
    for (const auto& row : holdings) {
        if (!(row.value_usd > 0.0)) continue;
        totals[{row.fund_id, row.quarter.ordinal()}] += row.value_usd;
        quarters.insert(row.quarter.ordinal());
    }

    std::map<std::string, int> baskets_per_fund;
    for (const auto& [fq, total] : totals) ++baskets_per_fund[fq.fund];

    PanelBuilder builder;
    for (const auto& row : holdings) {
        if (!(row.value_usd > 0.0)) continue;
        if (baskets_per_fund[row.fund_id] < min_history) continue;
        double total = totals.at({row.fund_id, row.quarter.ordinal()});
        builder.add(row.fund_id, row.cusip, row.quarter, row.value_usd / total, row.ticker);
    }
    for (int q : quarters) builder.add_quarter(Quarter::from_ordinal(q));
    try {
        return builder.build();
    } catch (const DataError&) {
        bool any = std::any_of(baskets_per_fund.begin(), baskets_per_fund.end(),
                               [&](const auto& kv) { return kv.second >= min_history; });
        if (!any) throw DataError("zero-holding panel: no fund has " + std::to_string(min_history) + " baskets");
        throw;
    }
}

// ---------------------------------------------------------------------------
// Split

void SplitSpec::validate() const {
    if (history.empty()) throw ConfigError("split: empty history range");
    if (repeat_window < 1) throw ConfigError("split: repeat_window must be >= 1");
    if (!history.contains(fit_target)) throw ConfigError("split: fit_target " + fit_target.str() + " outside history");
    if (!(history.last < valid_target))
        throw ConfigError("split: validation target " + valid_target.str() + " overlaps history " + history.str());
    if (!(valid_target < test_target))
        throw ConfigError("split: test target " + test_target.str() + " must follow validation target " +
                          valid_target.str());
}

SplitSpec temporal_split(const PanelDataset& panel, int history_quarters, int repeat_window) {
    const auto& qs = panel.quarters();
    const auto required = static_cast<std::size_t>(history_quarters + 2);
    if (history_quarters < 1 || qs.size() < required)
        throw DataError("temporal split needs " + std::to_string(required) + " quarters, panel has " +
                        std::to_string(qs.size()));
    SplitSpec s;
    s.history = {qs[0], qs[static_cast<std::size_t>(history_quarters - 1)]};
    s.fit_target = s.history.last;
    s.valid_target = qs[static_cast<std::size_t>(history_quarters)];
    s.test_target = qs[static_cast<std::size_t>(history_quarters + 1)];
    s.repeat_window = repeat_window;
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// InteractionMatrix

InteractionMatrix::InteractionMatrix(std::int32_t n_funds, std::int32_t n_items,
                                     std::vector<std::vector<ItemIndex>> rows)
    : n_funds_(n_funds), n_items_(n_items), rows_(std::move(rows)) {
    rows_.resize(static_cast<std::size_t>(n_funds_));
    for (auto& r : rows_) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
}

bool InteractionMatrix::at(FundIndex u, ItemIndex i) const {
    const auto& r = rows_.at(static_cast<std::size_t>(u));
    return std::binary_search(r.begin(), r.end(), i);
}

std::size_t InteractionMatrix::nnz() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

InteractionMatrix interaction_matrix(const PanelDataset& panel, const QuarterRange& range) {
    if (range.empty()) throw DataError("interaction_matrix: empty quarter range");
    for (auto q : range.quarters())
        if (!panel.has_quarter(q)) throw DataError("interaction_matrix: quarter " + q.str() + " not in panel");

    std::vector<std::vector<ItemIndex>> rows(static_cast<std::size_t>(panel.n_funds()));
    for (auto q : range.quarters()) {
        auto pos = *panel.quarter_position(q);
        for (FundIndex u = 0; u < panel.n_funds(); ++u) {
            if (const auto* b = panel.basket_at(u, pos)) {
                auto& r = rows[static_cast<std::size_t>(u)];
                r.insert(r.end(), b->items.begin(), b->items.end());
            }
        }
    }
    return InteractionMatrix(panel.n_funds(), panel.n_items(), std::move(rows));
}

// ---------------------------------------------------------------------------
// ExploreMask

ExploreMask::ExploreMask(Quarter target, int window, std::int32_t n_items,
                         std::vector<std::vector<ItemIndex>> repeat)
    : target_(target), window_(window), n_items_(n_items), repeat_(std::move(repeat)) {
    for (auto& r : repeat_) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
}

bool ExploreMask::is_repeat(FundIndex u, ItemIndex i) const {
    const auto& r = repeat_.at(static_cast<std::size_t>(u));
    return std::binary_search(r.begin(), r.end(), i);
}

ExploreMask explore_mask(const PanelDataset& panel, Quarter target, int window) {
    if (window < 1) throw ConfigError("explore_mask: window must be >= 1");
    const auto& qs = panel.quarters();
    if (qs.empty() || !(qs.front() < target))
        throw DataError("explore_mask: target " + target.str() + " is not after the panel start");

    std::vector<std::vector<ItemIndex>> repeat(static_cast<std::size_t>(panel.n_funds()));
    for (int back = 1; back <= window; ++back) {
        auto pos = panel.quarter_position(Quarter::from_ordinal(target.ordinal() - back));
        if (!pos) continue;
        for (FundIndex u = 0; u < panel.n_funds(); ++u) {
            if (const auto* b = panel.basket_at(u, *pos)) {
                auto& r = repeat[static_cast<std::size_t>(u)];
                r.insert(r.end(), b->items.begin(), b->items.end());
            }
        }
    }
    return ExploreMask(target, window, panel.n_items(), std::move(repeat));
}

}  // namespace fundbasket
