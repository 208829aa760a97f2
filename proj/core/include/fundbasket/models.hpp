#pragma once

#include "fundbasket/dataset.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fundbasket::models {

using ScoreVector = std::vector<double>;

/// Common interface of every recommender. `fit` receives a panel already
/// restricted to the training history; `score` is pure afterwards.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::string_view name() const = 0;
    virtual nlohmann::json hyperparameters() const = 0;

    void fit(const PanelDataset& history);
    /// Dense vector of length n_items(). Throws if not fitted.
    ScoreVector score(FundIndex fund) const;

    bool fitted() const { return fitted_; }
    std::int32_t n_items() const { return n_items_; }
    std::int32_t n_funds() const { return n_funds_; }
    std::uint64_t data_hash() const { return data_hash_; }

    void save_state(std::ostream& out) const;
    void load_state(std::istream& in);

protected:
    virtual void do_fit(const PanelDataset& history) = 0;
    virtual void do_score(FundIndex fund, ScoreVector& out) const = 0;
    virtual void save_payload(std::ostream& out) const = 0;
    virtual void load_payload(std::istream& in) = 0;

private:
    bool fitted_ = false;
    std::int32_t n_items_ = 0;
    std::int32_t n_funds_ = 0;
    std::uint64_t data_hash_ = 0;
};

/// Slices `panel` to `split.history` and fits.
void fit_on_history(Scorer& scorer, const PanelDataset& panel, const SplitSpec& split);

// ---------------------------------------------------------------------------
// Heuristics

/// Items held at the last history quarter score weight + 1; all else 0.
class LastAllocation final : public Scorer {
public:
    std::string_view name() const override { return "last_alloc"; }
    nlohmann::json hyperparameters() const override { return nlohmann::json::object(); }

protected:
    void do_fit(const PanelDataset& history) override;
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    std::vector<Basket> last_;
};

/// Number of distinct funds holding each item at the last history quarter.
class GlobalPopularity final : public Scorer {
public:
    std::string_view name() const override { return "pop"; }
    nlohmann::json hyperparameters() const override { return nlohmann::json::object(); }
    const std::vector<double>& counts() const { return counts_; }

protected:
    void do_fit(const PanelDataset& history) override;
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    std::vector<double> counts_;
};

/// Number of funds for which the item was a novel addition at the last
/// history quarter (held then, not held in the preceding `window` quarters).
class ExplorePopularity final : public Scorer {
public:
    explicit ExplorePopularity(int window = 4);
    std::string_view name() const override { return "explore_pop"; }
    nlohmann::json hyperparameters() const override { return {{"window", window_}}; }
    const std::vector<double>& counts() const { return counts_; }

protected:
    void do_fit(const PanelDataset& history) override;
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    int window_;
    std::vector<double> counts_;
};

/// Uniform [0, 1) scores, a pure function of (seed, fund, item).
class RandomScorer final : public Scorer {
public:
    explicit RandomScorer(std::uint64_t seed);
    std::string_view name() const override { return "random"; }
    nlohmann::json hyperparameters() const override { return {{"seed", seed_}}; }

protected:
    void do_fit(const PanelDataset&) override {}
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Item-item models

/// Column-major binary fund x item matrix.
Eigen::SparseMatrix<double> to_sparse(const InteractionMatrix& x);

/// Cosine similarity between item columns with a shrunk denominator,
/// sim(i, j) = <x_i, x_j> / (|x_i| |x_j| + shrink); diagonal and zero-norm
/// columns are 0. Symmetric.
Eigen::SparseMatrix<double> item_cosine(const InteractionMatrix& x, double shrink);

struct Neighbor {
    std::int32_t index = 0;
    double weight = 0.0;
    bool operator==(const Neighbor&) const = default;
};

class ItemKnn final : public Scorer {
public:
    explicit ItemKnn(int k = 100, double shrink = 0.0);
    std::string_view name() const override { return "itemknn"; }
    nlohmann::json hyperparameters() const override { return {{"k", k_}, {"shrink", shrink_}}; }

    /// Top-k most similar items of `item` (positive similarity only).
    const std::vector<Neighbor>& neighbors(ItemIndex item) const { return neighbors_.at(static_cast<std::size_t>(item)); }

protected:
    void do_fit(const PanelDataset& history) override;
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    void build_reverse();

    int k_;
    double shrink_;
    std::vector<std::vector<ItemIndex>> history_rows_;
    std::vector<std::vector<Neighbor>> neighbors_;
    // reverse_[j] = items i whose neighbour list contains j
    std::vector<std::vector<Neighbor>> reverse_;
};

/// Closed-form item autoencoder: P = (X'X + lambda I)^-1,
/// B = I - P diag(1/diag(P)) with diag(B) = 0; scores = x_u B.
class Ease final : public Scorer {
public:
    explicit Ease(double lambda = 250.0);
    std::string_view name() const override { return "ease"; }
    nlohmann::json hyperparameters() const override { return {{"lambda", lambda_}}; }

    const Eigen::MatrixXd& weights() const { return b_; }

    /// The closed form on a dense binary matrix (funds x items).
    static Eigen::MatrixXd solve(const Eigen::MatrixXd& x, double lambda);
    static Eigen::MatrixXd solve(const Eigen::SparseMatrix<double>& x, double lambda);

protected:
    void do_fit(const PanelDataset& history) override;
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    double lambda_;
    Eigen::MatrixXd b_;
    std::vector<std::vector<ItemIndex>> history_rows_;
};

// ---------------------------------------------------------------------------
// Temporal item frequency kNN

struct TifuParams {
    int k = 300;
    int groups = 7;
    double within_decay = 0.9;
    double group_decay = 0.7;
    double alpha = 0.7;
    bool cosine = false;
};

using SparseVector = std::vector<std::pair<ItemIndex, double>>;

/// Time-decayed personal item frequency of one fund's chronological
/// baskets (oldest first). Baskets are split into `groups` contiguous
/// groups, the most recent group last; when there are more baskets than
/// groups the earliest groups take the extra basket, when fewer the
/// earliest groups stay empty. A basket at reverse position p inside its
/// group weighs within_decay^p, a group at reverse position q weighs
/// group_decay^q; each group is averaged over its baskets and the sum is
/// divided by the number of non-empty groups.
SparseVector personal_item_frequency(const std::vector<const Basket*>& baskets, const TifuParams& params);

class TifuKnn final : public Scorer {
public:
    explicit TifuKnn(TifuParams params = {});
    std::string_view name() const override { return "tifuknn"; }
    nlohmann::json hyperparameters() const override;

    const SparseVector& pif(FundIndex fund) const { return pif_.at(static_cast<std::size_t>(fund)); }
    const std::vector<FundIndex>& neighbors(FundIndex fund) const { return neighbors_.at(static_cast<std::size_t>(fund)); }
    const std::vector<std::string>& warnings() const { return warnings_; }

protected:
    void do_fit(const PanelDataset& history) override;
    void do_score(FundIndex fund, ScoreVector& out) const override;
    void save_payload(std::ostream& out) const override;
    void load_payload(std::istream& in) override;

private:
    double distance(const SparseVector& a, const SparseVector& b) const;

    TifuParams params_;
    std::vector<SparseVector> pif_;
    std::vector<std::vector<FundIndex>> neighbors_;
    std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Registry

/// Registry names in Table order.
const std::vector<std::string>& registry();

/// Builds a scorer from its registry name. `params` overrides defaults
/// (e.g. {"lambda": 100} for ease); `seed` feeds the random scorer.
/// Throws ConfigError on an unknown name or parameter.
std::unique_ptr<Scorer> make_scorer(const std::string& name, const nlohmann::json& params = nlohmann::json::object(),
                                    std::uint64_t seed = 0);

/// Versioned blob: magic, version, name, hyperparameters, data hash, state.
void save_scorer(const Scorer& scorer, const std::filesystem::path& path);
std::unique_ptr<Scorer> load_scorer(const std::filesystem::path& path);

}  // namespace fundbasket::models
