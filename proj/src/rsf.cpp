#include "coxpen/rsf.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/metrics.hpp"
#include "coxpen/parallel.hpp"
#include "coxpen/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coxpen {

int ForestConfig::resolved_mtry(Index p) const {
    const int m = mtry.value_or(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)))));
    if (m < 1 || m > p) throw ConfigError("mtry must lie in [1, p]");
    return m;
}

int SurvivalTree::leaf_of(const Eigen::MatrixXd& x, Index i) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].variable >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(node)];
        node = x(i, nd.variable) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].leaf;
}

namespace {

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : sum_(n + 1, 0.0), count_(n + 1, 0) {}
    void add(std::size_t pos, double v) {
        for (std::size_t i = pos + 1; i < sum_.size(); i += i & (~i + 1)) {
            sum_[i] += v;
            count_[i] += 1;
        }
    }
    // Sums over positions [0, pos).
    std::pair<double, long> prefix(std::size_t pos) const {
        double s = 0.0;
        long c = 0;
        for (std::size_t i = pos; i > 0; i -= i & (~i + 1)) {
            s += sum_[i];
            c += count_[i];
        }
        return {s, c};
    }

private:
    std::vector<double> sum_;
    std::vector<long> count_;
};

/*
 * Log-rank pieces of a node, per member, so that for a left group L
 *   score    = sum_L (delta_i - H(T_i))
 *   variance = sum_L G(T_i) - sum_{i,k in L} F(min(T_i, T_k))
 * with H the node's Nelson-Aalen hazard, G(t) = sum_{s<=t} c_s / Y_s,
 * F(t) = sum_{s<=t} c_s / Y_s^2 and c_s = d_s (Y_s - d_s) / (Y_s - 1).
 */
struct NodeStats {
    std::vector<double> h, g, f;
    std::vector<std::size_t> rank; // distinct-time rank within the node
    std::size_t ranks = 0;
    int events = 0;
};

NodeStats node_stats(const std::vector<Index>& members, const Eigen::VectorXd& time, const Eigen::VectorXi& status) {
    const std::size_t m = members.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return time[members[a]] < time[members[b]]; });
    NodeStats s;
    s.h.resize(m);
    s.g.resize(m);
    s.f.resize(m);
    s.rank.resize(m);
    double h = 0.0, g = 0.0, f = 0.0;
    std::size_t pos = 0;
    while (pos < m) {
        const double t = time[members[order[pos]]];
        std::size_t end = pos;
        int d = 0;
        while (end < m && time[members[order[end]]] == t) {
            d += status[members[order[end]]];
            ++end;
        }
        const auto y = static_cast<double>(m - pos);
        if (d > 0) {
            h += d / y;
            const double c = y > 1.0 ? d * (y - d) / (y - 1.0) : 0.0;
            g += c / y;
            f += c / (y * y);
        }
        for (std::size_t k = pos; k < end; ++k) {
            s.h[order[k]] = h;
            s.g[order[k]] = g;
            s.f[order[k]] = f;
            s.rank[order[k]] = s.ranks;
        }
        s.events += d;
        ++s.ranks;
        pos = end;
    }
    return s;
}

// `value(k)` is the covariate of member k.
template <class Value>
SplitChoice scan_split(const std::vector<Index>& members, const Eigen::VectorXi& status, const NodeStats& s,
                       Value value, int min_events) {
    const std::size_t m = members.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    Fenwick tree(s.ranks);
    double score = 0.0, linear = 0.0, quad = 0.0;
    int left_events = 0;
    long left_count = 0;
    SplitChoice best;
    for (std::size_t pos = 0; pos + 1 < m; ++pos) {
        const std::size_t k = order[pos];
        const int delta = status[members[k]];
        const auto [below, below_count] = tree.prefix(s.rank[k]);
        quad += s.f[k] + 2.0 * (below + s.f[k] * static_cast<double>(left_count - below_count));
        tree.add(s.rank[k], s.f[k]);
        ++left_count;
        score += delta - s.h[k];
        linear += s.g[k];
        left_events += delta;

        const double here = value(k);
        const double next = value(order[pos + 1]);
        if (next == here) continue;
        if (left_events < min_events || s.events - left_events < min_events) continue;
        const double variance = linear - quad;
        if (!(variance > 1e-12)) continue;
        const double stat = score * score / variance;
        if (!best.found || stat > best.statistic) {
            best.found = true;
            best.statistic = stat;
            best.threshold = here + 0.5 * (next - here);
            if (!(best.threshold < next)) best.threshold = here;
        }
    }
    return best;
}

struct GridIndex {
    std::vector<double> times;
    int position(double t) const {
        return static_cast<int>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
    }
};

SurvivalTree::Leaf make_leaf(const std::vector<Index>& members, const Eigen::VectorXd& time,
                             const Eigen::VectorXi& status, const GridIndex& grid) {
    std::vector<Index> sorted = members;
    std::sort(sorted.begin(), sorted.end(), [&](Index a, Index b) { return time[a] < time[b]; });
    SurvivalTree::Leaf leaf;
    double h = 0.0;
    const std::size_t m = sorted.size();
    std::size_t pos = 0;
    while (pos < m) {
        const double t = time[sorted[pos]];
        std::size_t end = pos;
        int d = 0;
        while (end < m && time[sorted[end]] == t) {
            d += status[sorted[end]];
            ++end;
        }
        if (d > 0) {
            h += d / static_cast<double>(m - pos);
            leaf.step_at.push_back(grid.position(t));
            leaf.value.push_back(h);
        }
        pos = end;
    }
    const auto grid_size = static_cast<int>(grid.times.size());
    for (std::size_t k = 0; k < leaf.step_at.size(); ++k) {
        const int until = k + 1 < leaf.step_at.size() ? leaf.step_at[k + 1] : grid_size;
        leaf.mortality += leaf.value[k] * (until - leaf.step_at[k]);
    }
    return leaf;
}

SurvivalTree grow_tree(const SurvivalDataset& data, const ForestConfig& config, const GridIndex& grid, int mtry,
                       Rng rng) {
    const Index n = data.n();
    const Index p = data.p();
    SurvivalTree tree;
    tree.in_bag.assign(static_cast<std::size_t>(n), 0);
    tree.uses_variable.assign(static_cast<std::size_t>(p), 0);

    std::vector<Index> bag(static_cast<std::size_t>(n));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (auto& b : bag) {
        b = pick(rng);
        tree.in_bag[static_cast<std::size_t>(b)] = 1;
    }

    std::vector<Index> candidates(static_cast<std::size_t>(p));
    std::iota(candidates.begin(), candidates.end(), Index{0});

    struct Pending {
        int node;
        std::vector<Index> members;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(bag)});
    while (!stack.empty()) {
        Pending work = std::move(stack.back());
        stack.pop_back();
        const NodeStats stats = node_stats(work.members, data.time, data.status);

        SplitChoice best;
        int best_var = -1;
        if (stats.events >= 2 * config.min_node_events) {
            for (int k = 0; k < mtry; ++k) {
                std::uniform_int_distribution<Index> draw(k, p - 1);
                std::swap(candidates[static_cast<std::size_t>(k)], candidates[static_cast<std::size_t>(draw(rng))]);
                const Index var = candidates[static_cast<std::size_t>(k)];
                const auto column = data.x.col(var);
                const auto choice = scan_split(
                    work.members, data.status, stats,
                    [&](std::size_t i) { return column[work.members[i]]; }, config.min_node_events);
                if (choice.found && (!best.found || choice.statistic > best.statistic)) {
                    best = choice;
                    best_var = static_cast<int>(var);
                }
            }
        }

        if (!best.found) {
            tree.nodes[static_cast<std::size_t>(work.node)].leaf = static_cast<int>(tree.leaves.size());
            tree.leaves.push_back(make_leaf(work.members, data.time, data.status, grid));
            continue;
        }

        std::vector<Index> left, right;
        for (Index i : work.members) (data.x(i, best_var) <= best.threshold ? left : right).push_back(i);
        const int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& nd = tree.nodes[static_cast<std::size_t>(work.node)];
        nd.variable = best_var;
        nd.threshold = best.threshold;
        nd.left = left_id;
        nd.right = left_id + 1;
        tree.uses_variable[static_cast<std::size_t>(best_var)] = 1;
        stack.push_back({left_id + 1, std::move(right)});
        stack.push_back({left_id, std::move(left)});
    }
    return tree;
}

} // namespace

SurvivalForest grow_forest(const SurvivalDataset& data, const ForestConfig& config) {
    data.validate();
    if (config.n_trees < 1) throw ConfigError("forest needs at least one tree");
    if (config.min_node_events < 1) throw ConfigError("min_node_events must be positive");
    if (data.events() < 2 * config.min_node_events)
        throw ValidationError("too few events to grow a survival forest");
    const int mtry = config.resolved_mtry(data.p());

    SurvivalForest forest;
    forest.config_ = config;
    forest.n_train_ = data.n();
    forest.p_ = data.p();
    for (Index i = 0; i < data.n(); ++i)
        if (data.status[i] == 1) forest.grid_.push_back(data.time[i]);
    std::sort(forest.grid_.begin(), forest.grid_.end());
    forest.grid_.erase(std::unique(forest.grid_.begin(), forest.grid_.end()), forest.grid_.end());
    const GridIndex grid{forest.grid_};

    forest.trees_.resize(static_cast<std::size_t>(config.n_trees));
    parallel_for(forest.trees_.size(), config.threads, [&](std::size_t t) {
        forest.trees_[t] = grow_tree(data, config, grid, mtry, make_rng(config.seed, t));
    });
    const bool any_split = std::any_of(forest.trees_.begin(), forest.trees_.end(),
                                       [](const SurvivalTree& t) { return t.nodes.size() > 1; });
    if (!any_split) throw ValidationError("no valid split at the root of any tree");
    return forest;
}

Eigen::VectorXd SurvivalForest::leaf_chf(const SurvivalTree::Leaf& leaf) const {
    Eigen::VectorXd chf = Eigen::VectorXd::Zero(static_cast<Index>(grid_.size()));
    for (std::size_t k = 0; k < leaf.step_at.size(); ++k) {
        const int until = k + 1 < leaf.step_at.size() ? leaf.step_at[k + 1] : static_cast<int>(grid_.size());
        chf.segment(leaf.step_at[k], until - leaf.step_at[k]).setConstant(leaf.value[k]);
    }
    return chf;
}

Eigen::VectorXd SurvivalForest::ensemble_chf(const Eigen::MatrixXd& x, Index row) const {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Index>(grid_.size()));
    for (const auto& tree : trees_) total += leaf_chf(tree.leaves[static_cast<std::size_t>(tree.leaf_of(x, row))]);
    return total / static_cast<double>(trees_.size());
}

Eigen::VectorXd SurvivalForest::mortality(const Eigen::MatrixXd& x) const {
    if (x.cols() != p_) throw ValidationError("covariate count does not match the forest");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (const auto& tree : trees_)
        for (Index i = 0; i < x.rows(); ++i) out[i] += tree.leaves[static_cast<std::size_t>(tree.leaf_of(x, i))].mortality;
    return out / static_cast<double>(trees_.size());
}

Eigen::VectorXd SurvivalForest::oob_mortality(const Eigen::MatrixXd& x) const {
    if (x.rows() != n_train_ || x.cols() != p_) throw ValidationError("OOB prediction needs the training covariates");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_train_);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n_train_);
    for (const auto& tree : trees_) {
        for (Index i = 0; i < n_train_; ++i) {
            if (tree.in_bag[static_cast<std::size_t>(i)]) continue;
            sum[i] += tree.leaves[static_cast<std::size_t>(tree.leaf_of(x, i))].mortality;
            count[i] += 1.0;
        }
    }
    Eigen::VectorXd out(n_train_);
    for (Index i = 0; i < n_train_; ++i) out[i] = count[i] > 0 ? sum[i] / count[i] : std::nan("");
    return out;
}

namespace {

struct OobView {
    std::vector<Index> rows; // subjects OOB for at least one tree
    Eigen::VectorXd time;
    Eigen::VectorXi status;
};

// Leaf reached by row i of x when covariate j is replaced by `value`.
int leaf_with_value(const SurvivalTree& tree, const Eigen::MatrixXd& x, Index i, Index j, double value) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].variable >= 0) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
        const double v = nd.variable == j ? value : x(i, nd.variable);
        node = v <= nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<std::size_t>(node)].leaf;
}

double oob_error(const OobView& view, const Eigen::VectorXd& mortality, ScoreTies ties) {
    return 1.0 - harrell_c(view.time, view.status, mortality, ties);
}

} // namespace

VimpResult vimp(const SurvivalForest& forest, const SurvivalDataset& data) {
    const Index n = data.n();
    const Index p = data.p();
    if (n != forest.n_train() || p != forest.p()) throw ValidationError("VIMP needs the forest's training data");
    const auto& trees = forest.trees();
    const ScoreTies ties = forest.config().half_credit_ties ? ScoreTies::half : ScoreTies::zero;

    Eigen::VectorXd base_sum = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n);
    std::vector<std::vector<Index>> oob_rows(trees.size());
    for (std::size_t t = 0; t < trees.size(); ++t) {
        for (Index i = 0; i < n; ++i) {
            if (trees[t].in_bag[static_cast<std::size_t>(i)]) continue;
            oob_rows[t].push_back(i);
            base_sum[i] += trees[t].leaves[static_cast<std::size_t>(trees[t].leaf_of(data.x, i))].mortality;
            count[i] += 1.0;
        }
    }
    OobView view;
    for (Index i = 0; i < n; ++i)
        if (count[i] > 0) view.rows.push_back(i);
    if (view.rows.size() < 2) throw ValidationError("too few out-of-bag subjects for VIMP");
    const auto m = static_cast<Index>(view.rows.size());
    view.time.resize(m);
    view.status.resize(m);
    Eigen::VectorXd base(m);
    for (Index k = 0; k < m; ++k) {
        const Index i = view.rows[static_cast<std::size_t>(k)];
        view.time[k] = data.time[i];
        view.status[k] = data.status[i];
        base[k] = base_sum[i] / count[i];
    }

    VimpResult result;
    result.oob_error = oob_error(view, base, ties);
    result.importance = Eigen::VectorXd::Zero(p);

    const std::uint64_t vimp_seed = derive_seed(forest.config().seed, 0x76696d70ULL);
    parallel_for(static_cast<std::size_t>(p), forest.config().threads, [&](std::size_t jj) {
        const auto j = static_cast<Index>(jj);
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
        bool used = false;
        for (std::size_t t = 0; t < trees.size(); ++t) {
            const auto& tree = trees[t];
            if (!tree.uses_variable[jj] || oob_rows[t].empty()) continue;
            used = true;
            const auto& rows = oob_rows[t];
            std::vector<double> permuted(rows.size());
            for (std::size_t k = 0; k < rows.size(); ++k) permuted[k] = data.x(rows[k], j);
            Rng rng = make_rng(vimp_seed, t * static_cast<std::uint64_t>(p) + jj);
            std::shuffle(permuted.begin(), permuted.end(), rng);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const Index i = rows[k];
                const double before = tree.leaves[static_cast<std::size_t>(tree.leaf_of(data.x, i))].mortality;
                const double after = tree.leaves[static_cast<std::size_t>(leaf_with_value(tree, data.x, i, j, permuted[k]))].mortality;
                delta[i] += after - before;
            }
        }
        if (!used) return; // importance stays exactly 0
        Eigen::VectorXd noised(m);
        for (Index k = 0; k < m; ++k) {
            const Index i = view.rows[static_cast<std::size_t>(k)];
            noised[k] = (base_sum[i] + delta[i]) / count[i];
        }
        result.importance[j] = oob_error(view, noised, ties) - result.oob_error;
    });
    return result;
}

double logrank_statistic(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const std::vector<char>& left) {
    const Index n = time.size();
    std::vector<double> event_times;
    for (Index i = 0; i < n; ++i)
        if (status[i] == 1) event_times.push_back(time[i]);
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    double score = 0.0;
    double variance = 0.0;
    for (double t : event_times) {
        double y = 0, y_left = 0, d = 0, d_left = 0;
        for (Index i = 0; i < n; ++i) {
            if (time[i] < t) continue;
            const bool l = left[static_cast<std::size_t>(i)] != 0;
            y += 1;
            y_left += l;
            if (time[i] == t && status[i] == 1) {
                d += 1;
                d_left += l;
            }
        }
        score += d_left - y_left * d / y;
        if (y > 1) variance += (y_left / y) * (1 - y_left / y) * d * (y - d) / (y - 1);
    }
    return variance > 1e-12 ? score * score / variance : 0.0;
}

SplitChoice best_logrank_split(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& x,
                               int min_events) {
    std::vector<Index> members(static_cast<std::size_t>(time.size()));
    std::iota(members.begin(), members.end(), Index{0});
    const NodeStats stats = node_stats(members, time, status);
    return scan_split(members, status, stats, [&](std::size_t k) { return x[static_cast<Index>(k)]; }, min_events);
}

} // namespace coxpen
