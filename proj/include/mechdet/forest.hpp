#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mechdet/matrix.hpp"

namespace mechdet {

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;         // fraction of positive training samples reaching the node

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_proba(std::span<const double> x) const;
    // Root-only tree has depth 0.
    int depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestConfig {
    int n_trees = 100;
    int max_depth = 5;         // 0 = grow until pure
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;      // 0 = floor(sqrt(n_features))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    std::size_t n_features = 0;
    std::vector<double> importances;  // impurity-based, normalized to sum 1 (all zeros if no split was made)

    friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

// Gini-split CART trees on bootstrap samples; labels in {0, 1}.
ForestModel train_random_forest(const Matrix& X, std::span<const int> y, const ForestConfig& cfg);

// Fraction of trees voting for class 1.
double forest_vote_fraction(const ForestModel& model, std::span<const double> x);
// Majority vote; an exact tie goes to 0.
int forest_predict(const ForestModel& model, std::span<const double> x);

// FNV-1a over every node field, for determinism checks.
std::uint64_t forest_structure_hash(const ForestModel& model);

}  // namespace mechdet
