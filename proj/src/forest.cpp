#include "mechdet/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <thread>

#include "mechdet/rng.hpp"

namespace mechdet {

namespace {

double gini(double pos, double n) {
    if (n <= 0.0) return 0.0;
    const double p = pos / n;
    return 2.0 * p * (1.0 - p);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const int> y, const ForestConfig& cfg, std::uint64_t seed)
        : X_(X), y_(y), cfg_(cfg), rng_(seed), importance_(X.cols(), 0.0) {
        const auto C = X.cols();
        mtry_ = cfg.max_features > 0 ? std::min<std::size_t>(cfg.max_features, C)
                                     : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(C))));
        features_.resize(C);
        std::iota(features_.begin(), features_.end(), 0);
    }

    DecisionTree build() {
        const std::size_t n = X_.rows();
        std::vector<std::size_t> idx(n);
        if (cfg_.bootstrap) {
            for (auto& i : idx) i = rng_.index(n);
        } else {
            std::iota(idx.begin(), idx.end(), 0);
        }
        root_n_ = static_cast<double>(n);
        grow(idx, 0);
        return std::move(tree_);
    }

    const std::vector<double>& importance() const { return importance_; }

private:
    std::int32_t grow(std::vector<std::size_t>& idx, int depth) {
        const auto node_id = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double pos = 0.0;
        for (auto i : idx) pos += y_[i];
        const double n = static_cast<double>(idx.size());
        tree_.nodes[node_id].value = n > 0 ? pos / n : 0.0;

        const bool depth_ok = cfg_.max_depth <= 0 || depth < cfg_.max_depth;
        if (!depth_ok || idx.size() < static_cast<std::size_t>(std::max(2, cfg_.min_samples_split)) || pos == 0.0 ||
            pos == n) {
            return node_id;
        }
        const Split best = find_split(idx, pos);
        if (best.feature < 0) {
            return node_id;
        }
        std::vector<std::size_t> left, right;
        for (auto i : idx) (X_(i, best.feature) <= best.threshold ? left : right).push_back(i);
        importance_[best.feature] += n / root_n_ * best.gain;
        idx.clear();
        idx.shrink_to_fit();

        tree_.nodes[node_id].feature = best.feature;
        tree_.nodes[node_id].threshold = best.threshold;
        const auto l = grow(left, depth + 1);
        const auto r = grow(right, depth + 1);
        tree_.nodes[node_id].left = l;
        tree_.nodes[node_id].right = r;
        return node_id;
    }

    Split find_split(const std::vector<std::size_t>& idx, double pos) {
        const double n = static_cast<double>(idx.size());
        const double parent = gini(pos, n);
        const auto min_leaf = static_cast<std::size_t>(std::max(1, cfg_.min_samples_leaf));
        Split best;
        // partial Fisher-Yates draws mtry distinct features in a seeded order
        const std::size_t C = features_.size();
        std::vector<std::pair<double, int>> vals(idx.size());
        for (std::size_t f = 0; f < mtry_; ++f) {
            std::swap(features_[f], features_[f + rng_.index(C - f)]);
            const int feat = static_cast<int>(features_[f]);
            for (std::size_t k = 0; k < idx.size(); ++k) vals[k] = {X_(idx[k], feat), y_[idx[k]]};
            std::sort(vals.begin(), vals.end());
            double left_pos = 0.0;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                left_pos += vals[k].second;
                if (vals[k].first == vals[k + 1].first) continue;
                const std::size_t nl = k + 1;
                const std::size_t nr = vals.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double child = (static_cast<double>(nl) * gini(left_pos, static_cast<double>(nl)) +
                                      static_cast<double>(nr) * gini(pos - left_pos, static_cast<double>(nr))) /
                                     n;
                const double gain = parent - child;
                if (gain > best.gain + 1e-15) {
                    double mid = 0.5 * (vals[k].first + vals[k + 1].first);
                    if (!(mid < vals[k + 1].first)) mid = vals[k].first;
                    best = {feat, mid, gain};
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    std::span<const int> y_;
    const ForestConfig& cfg_;
    Rng rng_;
    std::size_t mtry_ = 1;
    std::vector<std::size_t> features_;
    std::vector<double> importance_;
    double root_n_ = 1.0;
    DecisionTree tree_;
};

}  // namespace

double DecisionTree::predict_proba(std::span<const double> x) const {
    std::int32_t k = 0;
    while (nodes[k].feature >= 0) {
        k = x[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    }
    return nodes[k].value;
}

int DecisionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    // children always follow their parent in `nodes`
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        best = std::max(best, d[k]);
        if (nodes[k].feature >= 0) {
            d[nodes[k].left] = d[k] + 1;
            d[nodes[k].right] = d[k] + 1;
        }
    }
    return best;
}

ForestModel train_random_forest(const Matrix& X, std::span<const int> y, const ForestConfig& cfg) {
    if (cfg.n_trees < 1) {
        throw InputError("BAD_CONFIG", "random forest needs at least one tree");
    }
    if (X.rows() != y.size() || X.rows() == 0) {
        throw InputError("SHAPE_MISMATCH", "forest training data and labels disagree");
    }
    ForestModel model;
    model.n_features = X.cols();
    model.trees.resize(static_cast<std::size_t>(cfg.n_trees));
    std::vector<std::vector<double>> imp(model.trees.size());

    auto build = [&](std::size_t t) {
        TreeBuilder b(X, y, cfg, derive_seed(cfg.seed, t));
        model.trees[t] = b.build();
        imp[t] = b.importance();
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(cfg.n_trees)));
    if (jobs == 1) {
        for (std::size_t t = 0; t < model.trees.size(); ++t) build(t);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < jobs; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < model.trees.size(); t += jobs) build(t);
            });
        }
    }

    model.importances.assign(X.cols(), 0.0);
    std::size_t contributing = 0;
    for (const auto& ti : imp) {
        const double total = std::accumulate(ti.begin(), ti.end(), 0.0);
        if (total <= 0.0) continue;
        ++contributing;
        for (std::size_t c = 0; c < ti.size(); ++c) model.importances[c] += ti[c] / total;
    }
    if (contributing > 0) {
        for (auto& v : model.importances) v /= static_cast<double>(contributing);
    }
    return model;
}

double forest_vote_fraction(const ForestModel& model, std::span<const double> x) {
    std::size_t votes = 0;
    for (const auto& t : model.trees) votes += t.predict_proba(x) > 0.5 ? 1 : 0;
    return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

int forest_predict(const ForestModel& model, std::span<const double> x) {
    std::size_t votes = 0;
    for (const auto& t : model.trees) votes += t.predict_proba(x) > 0.5 ? 1 : 0;
    return 2 * votes > model.trees.size() ? 1 : 0;
}

std::uint64_t forest_structure_hash(const ForestModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& t : model.trees) {
        const auto n = t.nodes.size();
        mix(&n, sizeof n);
        for (const auto& node : t.nodes) {
            mix(&node.feature, sizeof node.feature);
            mix(&node.threshold, sizeof node.threshold);
            mix(&node.left, sizeof node.left);
            mix(&node.right, sizeof node.right);
            mix(&node.value, sizeof node.value);
        }
    }
    return h;
}

}  // namespace mechdet
