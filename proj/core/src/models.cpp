#include "fundbasket/models.hpp"

#include "fundbasket/errors.hpp"

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/utility.hpp>
#include <cereal/types/vector.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace fundbasket::models {

namespace {

constexpr char kMagic[4] = {'F', 'B', 'S', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

using OutArchive = cereal::PortableBinaryOutputArchive;
using InArchive = cereal::PortableBinaryInputArchive;

std::vector<std::vector<ItemIndex>> rows_of(const InteractionMatrix& x) {
    std::vector<std::vector<ItemIndex>> rows(static_cast<std::size_t>(x.n_funds()));
    for (FundIndex u = 0; u < x.n_funds(); ++u) {
        auto r = x.row(u);
        rows[static_cast<std::size_t>(u)].assign(r.begin(), r.end());
    }
    return rows;
}

InteractionMatrix history_matrix(const PanelDataset& history) {
    if (history.quarters().empty()) throw ModelError("cannot fit on an empty history");
    return interaction_matrix(history, {history.quarters().front(), history.quarters().back()});
}

bool better_neighbor(const Neighbor& a, const Neighbor& b) {
    return a.weight > b.weight || (a.weight == b.weight && a.index < b.index);
}

}  // namespace

// ---------------------------------------------------------------------------
// Scorer

void Scorer::fit(const PanelDataset& history) {
    n_items_ = history.n_items();
    n_funds_ = history.n_funds();
    data_hash_ = history.content_hash();
    do_fit(history);
    fitted_ = true;
}

ScoreVector Scorer::score(FundIndex fund) const {
    if (!fitted_) throw ModelError(std::string(name()) + ": score called before fit");
    if (fund < 0 || fund >= n_funds_) throw ModelError(std::string(name()) + ": fund index out of range");
    ScoreVector out(static_cast<std::size_t>(n_items_), 0.0);
    do_score(fund, out);
    return out;
}

void Scorer::save_state(std::ostream& out) const {
    {
        OutArchive ar(out);
        ar(fitted_, n_items_, n_funds_, data_hash_);
    }
    save_payload(out);
}

void Scorer::load_state(std::istream& in) {
    {
        InArchive ar(in);
        ar(fitted_, n_items_, n_funds_, data_hash_);
    }
    load_payload(in);
}

void fit_on_history(Scorer& scorer, const PanelDataset& panel, const SplitSpec& split) {
    split.validate();
    scorer.fit(panel.slice(split.history));
}

// ---------------------------------------------------------------------------
// LastAllocation

void LastAllocation::do_fit(const PanelDataset& history) {
    if (history.quarters().empty()) throw ModelError("last_alloc: empty history");
    const auto last = history.quarters().size() - 1;
    last_.assign(static_cast<std::size_t>(history.n_funds()), Basket{});
    for (FundIndex u = 0; u < history.n_funds(); ++u)
        if (const auto* b = history.basket_at(u, last)) last_[static_cast<std::size_t>(u)] = *b;
}

void LastAllocation::do_score(FundIndex fund, ScoreVector& out) const {
    const auto& b = last_[static_cast<std::size_t>(fund)];
    for (std::size_t k = 0; k < b.size(); ++k) out[static_cast<std::size_t>(b.items[k])] = b.weights[k] + 1.0;
}

void LastAllocation::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    ar(static_cast<std::uint64_t>(last_.size()));
    for (const auto& b : last_) ar(b.items, b.weights);
}

void LastAllocation::load_payload(std::istream& in) {
    InArchive ar(in);
    std::uint64_t n = 0;
    ar(n);
    last_.assign(n, Basket{});
    for (auto& b : last_) ar(b.items, b.weights);
}

// ---------------------------------------------------------------------------
// Popularity heuristics

void GlobalPopularity::do_fit(const PanelDataset& history) {
    if (history.quarters().empty()) throw ModelError("pop: empty history");
    const auto last = history.quarters().size() - 1;
    counts_.assign(static_cast<std::size_t>(history.n_items()), 0.0);
    for (FundIndex u = 0; u < history.n_funds(); ++u)
        if (const auto* b = history.basket_at(u, last))
            for (auto i : b->items) counts_[static_cast<std::size_t>(i)] += 1.0;
}

void GlobalPopularity::do_score(FundIndex, ScoreVector& out) const {
    out = counts_;
}

void GlobalPopularity::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    ar(counts_);
}

void GlobalPopularity::load_payload(std::istream& in) {
    InArchive ar(in);
    ar(counts_);
}

ExplorePopularity::ExplorePopularity(int window) : window_(window) {
    if (window_ < 1) throw ConfigError("explore_pop: window must be >= 1");
}

void ExplorePopularity::do_fit(const PanelDataset& history) {
    const auto& qs = history.quarters();
    if (qs.size() < 2) throw ModelError("explore_pop: needs at least two history quarters");
    const auto last = qs.back();
    const auto mask = explore_mask(history, last, window_);
    counts_.assign(static_cast<std::size_t>(history.n_items()), 0.0);
    for (FundIndex u = 0; u < history.n_funds(); ++u)
        if (const auto* b = history.basket(u, last))
            for (auto i : b->items)
                if (mask.is_novel(u, i)) counts_[static_cast<std::size_t>(i)] += 1.0;
}

void ExplorePopularity::do_score(FundIndex, ScoreVector& out) const {
    out = counts_;
}

void ExplorePopularity::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    ar(window_, counts_);
}

void ExplorePopularity::load_payload(std::istream& in) {
    InArchive ar(in);
    ar(window_, counts_);
}

RandomScorer::RandomScorer(std::uint64_t seed) : seed_(seed) {}

void RandomScorer::do_score(FundIndex fund, ScoreVector& out) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(fund)};
    std::mt19937_64 rng(seq);
    // Top 53 bits -> [0, 1); avoids the implementation-defined
    // uniform_real_distribution so scores are portable.
    for (auto& v : out) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void RandomScorer::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    ar(seed_);
}

void RandomScorer::load_payload(std::istream& in) {
    InArchive ar(in);
    ar(seed_);
}

// ---------------------------------------------------------------------------
// ItemKNN

Eigen::SparseMatrix<double> to_sparse(const InteractionMatrix& x) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(x.nnz());
    for (FundIndex u = 0; u < x.n_funds(); ++u)
        for (auto i : x.row(u)) triplets.emplace_back(u, i, 1.0);
    Eigen::SparseMatrix<double> m(x.n_funds(), x.n_items());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

Eigen::SparseMatrix<double> item_cosine(const InteractionMatrix& x, double shrink) {
    const auto xs = to_sparse(x);
    Eigen::SparseMatrix<double> gram = (xs.transpose() * xs).pruned();
    Eigen::VectorXd norms = Eigen::VectorXd::Zero(x.n_items());
    for (int j = 0; j < gram.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(gram, j); it; ++it)
            if (it.row() == j) norms[j] = std::sqrt(it.value());

    std::vector<Eigen::Triplet<double>> triplets;
    for (int j = 0; j < gram.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(gram, j); it; ++it) {
            const auto i = it.row();
            if (i == j) continue;
            const double denom = norms[i] * norms[j] + shrink;
            if (denom <= 0.0) continue;
            triplets.emplace_back(i, j, it.value() / denom);
        }
    }
    Eigen::SparseMatrix<double> sim(x.n_items(), x.n_items());
    sim.setFromTriplets(triplets.begin(), triplets.end());
    return sim;
}

ItemKnn::ItemKnn(int k, double shrink) : k_(k), shrink_(shrink) {
    if (k_ < 1) throw ConfigError("itemknn: k must be >= 1");
    if (shrink_ < 0) throw ConfigError("itemknn: shrink must be >= 0");
}

void ItemKnn::do_fit(const PanelDataset& history) {
    const auto x = history_matrix(history);
    history_rows_ = rows_of(x);
    const auto sim = item_cosine(x, shrink_);

    neighbors_.assign(static_cast<std::size_t>(x.n_items()), {});
    for (int i = 0; i < sim.outerSize(); ++i) {
        auto& list = neighbors_[static_cast<std::size_t>(i)];
        for (Eigen::SparseMatrix<double>::InnerIterator it(sim, i); it; ++it)
            if (it.value() > 0.0) list.push_back({static_cast<std::int32_t>(it.row()), it.value()});
        const auto keep = std::min<std::size_t>(list.size(), static_cast<std::size_t>(k_));
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(keep), list.end(), better_neighbor);
        list.resize(keep);
    }
    build_reverse();
}

void ItemKnn::build_reverse() {
    reverse_.assign(neighbors_.size(), {});
    for (std::size_t i = 0; i < neighbors_.size(); ++i)
        for (const auto& nb : neighbors_[i])
            reverse_[static_cast<std::size_t>(nb.index)].push_back({static_cast<std::int32_t>(i), nb.weight});
}

void ItemKnn::do_score(FundIndex fund, ScoreVector& out) const {
    for (auto j : history_rows_[static_cast<std::size_t>(fund)])
        for (const auto& nb : reverse_[static_cast<std::size_t>(j)]) out[static_cast<std::size_t>(nb.index)] += nb.weight;
}

void ItemKnn::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    ar(k_, shrink_, history_rows_, static_cast<std::uint64_t>(neighbors_.size()));
    for (const auto& list : neighbors_) {
        std::vector<std::pair<std::int32_t, double>> flat;
        for (const auto& nb : list) flat.emplace_back(nb.index, nb.weight);
        ar(flat);
    }
}

void ItemKnn::load_payload(std::istream& in) {
    InArchive ar(in);
    std::uint64_t n = 0;
    ar(k_, shrink_, history_rows_, n);
    neighbors_.assign(n, {});
    for (auto& list : neighbors_) {
        std::vector<std::pair<std::int32_t, double>> flat;
        ar(flat);
        for (const auto& [idx, w] : flat) list.push_back({idx, w});
    }
    build_reverse();
}

// ---------------------------------------------------------------------------
// EASE

Ease::Ease(double lambda) : lambda_(lambda) {
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw ConfigError("ease: lambda must be a positive finite number");
}

namespace {

Eigen::MatrixXd ease_from_gram(Eigen::MatrixXd g, double lambda) {
    g.diagonal().array() += lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success)
        throw ModelError("ease: Gram matrix not positive definite with lambda=" + std::to_string(lambda));
    Eigen::MatrixXd p = llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
    // B = I - P diag(1/diag(P)): column j scaled by -1/P_jj, zero diagonal.
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double pjj = p(j, j);
        p.col(j) /= -pjj;
        p(j, j) = 0.0;
    }
    if (!p.allFinite()) throw ModelError("ease: non-finite weights with lambda=" + std::to_string(lambda));
    return p;
}

}  // namespace

Eigen::MatrixXd Ease::solve(const Eigen::MatrixXd& x, double lambda) {
    return ease_from_gram(x.transpose() * x, lambda);
}

Eigen::MatrixXd Ease::solve(const Eigen::SparseMatrix<double>& x, double lambda) {
    Eigen::SparseMatrix<double> gram = x.transpose() * x;
    return ease_from_gram(Eigen::MatrixXd(gram), lambda);
}

void Ease::do_fit(const PanelDataset& history) {
    const auto x = history_matrix(history);
    history_rows_ = rows_of(x);
    b_ = solve(to_sparse(x), lambda_);
}

void Ease::do_score(FundIndex fund, ScoreVector& out) const {
    Eigen::Map<Eigen::RowVectorXd> row(out.data(), static_cast<Eigen::Index>(out.size()));
    for (auto j : history_rows_[static_cast<std::size_t>(fund)]) row += b_.row(j);
}

void Ease::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    std::vector<double> flat(b_.data(), b_.data() + b_.size());
    ar(lambda_, static_cast<std::int64_t>(b_.rows()), static_cast<std::int64_t>(b_.cols()), flat, history_rows_);
}

void Ease::load_payload(std::istream& in) {
    InArchive ar(in);
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> flat;
    ar(lambda_, rows, cols, flat, history_rows_);
    b_ = Eigen::Map<Eigen::MatrixXd>(flat.data(), rows, cols);
}

// ---------------------------------------------------------------------------
// TIFUKNN

SparseVector personal_item_frequency(const std::vector<const Basket*>& baskets, const TifuParams& params) {
    const int n = static_cast<int>(baskets.size());
    const int m = params.groups;
    if (n == 0) return {};

    // Chronological group boundaries; group g spans [start[g], start[g+1]).
    std::vector<int> start(static_cast<std::size_t>(m) + 1, 0);
    if (n <= m) {
        // One basket per group, aligned to the most recent groups.
        const int empty = m - n;
        for (int g = 0; g <= m; ++g) start[static_cast<std::size_t>(g)] = std::max(0, g - empty);
    } else {
        const int base = n / m;
        const int extra = n % m;
        for (int g = 0; g < m; ++g)
            start[static_cast<std::size_t>(g) + 1] = start[static_cast<std::size_t>(g)] + base + (g < extra ? 1 : 0);
    }

    std::vector<double> dense_acc;
    std::vector<ItemIndex> touched;
    auto add = [&](ItemIndex i, double w) {
        const auto idx = static_cast<std::size_t>(i);
        if (idx >= dense_acc.size()) dense_acc.resize(idx + 1, 0.0);
        if (dense_acc[idx] == 0.0) touched.push_back(i);
        dense_acc[idx] += w;
    };

    int nonempty = 0;
    for (int g = 0; g < m; ++g) {
        const int lo = start[static_cast<std::size_t>(g)];
        const int hi = start[static_cast<std::size_t>(g) + 1];
        if (hi <= lo) continue;
        ++nonempty;
        const double group_w = std::pow(params.group_decay, m - 1 - g) / static_cast<double>(hi - lo);
        for (int b = lo; b < hi; ++b) {
            const double w = group_w * std::pow(params.within_decay, hi - 1 - b);
            for (auto i : baskets[static_cast<std::size_t>(b)]->items) add(i, w);
        }
    }

    std::sort(touched.begin(), touched.end());
    SparseVector out;
    out.reserve(touched.size());
    for (auto i : touched) out.emplace_back(i, dense_acc[static_cast<std::size_t>(i)] / nonempty);
    return out;
}

TifuKnn::TifuKnn(TifuParams params) : params_(params) {
    if (params_.k < 1) throw ConfigError("tifuknn: k must be >= 1");
    if (params_.groups < 1) throw ConfigError("tifuknn: groups must be >= 1");
    if (params_.alpha < 0 || params_.alpha > 1) throw ConfigError("tifuknn: alpha must be in [0, 1]");
    if (!(params_.within_decay > 0) || !(params_.group_decay > 0))
        throw ConfigError("tifuknn: decay rates must be positive");
}

nlohmann::json TifuKnn::hyperparameters() const {
    return {{"k", params_.k},
            {"groups", params_.groups},
            {"within_decay", params_.within_decay},
            {"group_decay", params_.group_decay},
            {"alpha", params_.alpha},
            {"metric", params_.cosine ? "cosine" : "euclidean"}};
}

double TifuKnn::distance(const SparseVector& a, const SparseVector& b) const {
    // Merge over the union of supports in ascending item order.
    double sq = 0.0;
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    std::size_t x = 0;
    std::size_t y = 0;
    while (x < a.size() || y < b.size()) {
        double va = 0.0;
        double vb = 0.0;
        if (y >= b.size() || (x < a.size() && a[x].first < b[y].first)) {
            va = a[x++].second;
        } else if (x >= a.size() || b[y].first < a[x].first) {
            vb = b[y++].second;
        } else {
            va = a[x++].second;
            vb = b[y++].second;
        }
        sq += (va - vb) * (va - vb);
        dot += va * vb;
        na += va * va;
        nb += vb * vb;
    }
    if (!params_.cosine) return std::sqrt(sq);
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

void TifuKnn::do_fit(const PanelDataset& history) {
    const auto n_funds = static_cast<std::size_t>(history.n_funds());
    pif_.assign(n_funds, {});
    neighbors_.assign(n_funds, {});
    warnings_.clear();

    std::vector<FundIndex> pool;
    for (FundIndex u = 0; u < history.n_funds(); ++u) {
        std::vector<const Basket*> seq;
        for (std::size_t p = 0; p < history.quarters().size(); ++p)
            if (const auto* b = history.basket_at(u, p)) seq.push_back(b);
        pif_[static_cast<std::size_t>(u)] = personal_item_frequency(seq, params_);
        if (!seq.empty()) pool.push_back(u);
    }

    const auto k = static_cast<std::size_t>(params_.k);
    if (pool.size() > 0 && pool.size() - 1 < k)
        warnings_.push_back("tifuknn: only " + std::to_string(pool.size() - 1) + " candidate neighbours for k=" +
                            std::to_string(params_.k) + "; using all");

    std::vector<std::pair<double, FundIndex>> dist;
    for (auto u : pool) {
        dist.clear();
        for (auto v : pool)
            if (v != u) dist.emplace_back(distance(pif_[static_cast<std::size_t>(u)], pif_[static_cast<std::size_t>(v)]), v);
        const auto keep = std::min(k, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(keep), dist.end());
        auto& nb = neighbors_[static_cast<std::size_t>(u)];
        for (std::size_t r = 0; r < keep; ++r) nb.push_back(dist[r].second);
    }
}

void TifuKnn::do_score(FundIndex fund, ScoreVector& out) const {
    const auto& own = pif_[static_cast<std::size_t>(fund)];
    if (own.empty()) return;
    for (const auto& [i, v] : own) out[static_cast<std::size_t>(i)] += params_.alpha * v;
    const auto& nb = neighbors_[static_cast<std::size_t>(fund)];
    if (nb.empty()) return;
    const double w = (1.0 - params_.alpha) / static_cast<double>(nb.size());
    for (auto v : nb)
        for (const auto& [i, val] : pif_[static_cast<std::size_t>(v)]) out[static_cast<std::size_t>(i)] += w * val;
}

void TifuKnn::save_payload(std::ostream& out) const {
    OutArchive ar(out);
    ar(params_.k, params_.groups, params_.within_decay, params_.group_decay, params_.alpha, params_.cosine);
    ar(pif_, neighbors_, warnings_);
}

void TifuKnn::load_payload(std::istream& in) {
    InArchive ar(in);
    ar(params_.k, params_.groups, params_.within_decay, params_.group_decay, params_.alpha, params_.cosine);
    ar(pif_, neighbors_, warnings_);
}

// ---------------------------------------------------------------------------
// Registry and persistence

const std::vector<std::string>& registry() {
    static const std::vector<std::string> names = {"last_alloc", "pop",  "explore_pop", "random",
                                                   "itemknn",    "ease", "tifuknn"};
    return names;
}

namespace {

template <typename T>
T param(const nlohmann::json& params, const char* key, T fallback, std::vector<std::string>& used) {
    used.emplace_back(key);
    if (!params.contains(key)) return fallback;
    try {
        return params.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("invalid value for model parameter '") + key + "'");
    }
}

std::string registry_list() {
    std::string out;
    for (const auto& n : registry()) out += (out.empty() ? "" : ", ") + n;
    return out;
}

}  // namespace

std::unique_ptr<Scorer> make_scorer(const std::string& name, const nlohmann::json& params, std::uint64_t seed) {
    std::vector<std::string> used;
    std::unique_ptr<Scorer> scorer;
    if (name == "last_alloc") {
        scorer = std::make_unique<LastAllocation>();
    } else if (name == "pop") {
        scorer = std::make_unique<GlobalPopularity>();
    } else if (name == "explore_pop") {
        scorer = std::make_unique<ExplorePopularity>(param(params, "window", 4, used));
    } else if (name == "random") {
        scorer = std::make_unique<RandomScorer>(param<std::uint64_t>(params, "seed", seed, used));
    } else if (name == "itemknn") {
        scorer = std::make_unique<ItemKnn>(param(params, "k", 100, used), param(params, "shrink", 0.0, used));
    } else if (name == "ease") {
        scorer = std::make_unique<Ease>(param(params, "lambda", 250.0, used));
    } else if (name == "tifuknn") {
        TifuParams p;
        p.k = param(params, "k", p.k, used);
        p.groups = param(params, "groups", p.groups, used);
        p.within_decay = param(params, "within_decay", p.within_decay, used);
        p.group_decay = param(params, "group_decay", p.group_decay, used);
        p.alpha = param(params, "alpha", p.alpha, used);
        const auto metric = param<std::string>(params, "metric", "euclidean", used);
        if (metric != "euclidean" && metric != "cosine") throw ConfigError("tifuknn: metric must be euclidean or cosine");
        p.cosine = metric == "cosine";
        scorer = std::make_unique<TifuKnn>(p);
    } else {
        throw ConfigError("unknown model '" + name + "'; available: " + registry_list());
    }
    if (params.is_object()) {
        for (const auto& [key, value] : params.items())
            if (std::find(used.begin(), used.end(), key) == used.end())
                throw ConfigError("model '" + name + "' has no parameter '" + key + "'");
    }
    return scorer;
}

void save_scorer(const Scorer& scorer, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    {
        OutArchive ar(out);
        ar(kFormatVersion, std::string(scorer.name()), scorer.hyperparameters().dump(), scorer.data_hash());
    }
    scorer.save_state(out);
    if (!out) throw DataError("failed writing " + path.string());
}

std::unique_ptr<Scorer> load_scorer(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    char magic[4] = {};
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 4, kMagic)) throw DataError(path.string() + ": not a fitted-model blob");

    std::uint32_t version = 0;
    std::string name;
    std::string hyper;
    std::uint64_t hash = 0;
    try {
        InArchive ar(in);
        ar(version, name, hyper, hash);
        if (version != kFormatVersion)
            throw DataError(path.string() + ": unsupported blob version " + std::to_string(version));
        auto scorer = make_scorer(name, nlohmann::json::parse(hyper));
        scorer->load_state(in);
        if (scorer->data_hash() != hash) throw DataError(path.string() + ": data hash mismatch");
        return scorer;
    } catch (const cereal::Exception& e) {
        throw DataError(path.string() + ": truncated blob (" + e.what() + ")");
    }
}

}  // namespace fundbasket::models
