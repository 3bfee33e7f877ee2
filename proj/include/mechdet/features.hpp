#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mechdet/forest.hpp"
#include "mechdet/matrix.hpp"
#include "mechdet/scores.hpp"

namespace mechdet {

inline constexpr int kUnlabeled = -1;

enum class FeatureKind { ecs, pks };

struct FeatureColumn {
    FeatureKind kind = FeatureKind::ecs;
    std::int64_t layer = 0;
    std::int64_t head = -1;  // -1 for PKS columns

    std::string name() const;  // "ECS(l,h)" or "PKS(l)"
    friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

// ECS by (layer asc, head asc), then PKS by layer asc: L*H + L columns.
std::vector<FeatureColumn> feature_schema(std::int64_t n_layers, std::int64_t n_heads);
// FNV-1a of the joined column names.
std::uint64_t schema_hash(std::span<const FeatureColumn> columns);

struct RowKey {
    std::string trace_id;
    std::int64_t span_index = 0;

    friend bool operator==(const RowKey&, const RowKey&) = default;
};

// One scored trace plus per-span gold labels (kUnlabeled where unknown).
struct ScoredTrace {
    std::string trace_id;
    ScoreTensor scores;
    std::vector<int> labels;
};

struct FeatureMatrix {
    std::int64_t n_layers = 0;
    std::int64_t n_heads = 0;
    std::vector<FeatureColumn> columns;
    Matrix values;  // rows = spans
    std::vector<RowKey> rows;
    std::vector<int> labels;

    bool fully_labeled() const;
};

// Rows ordered by input trace then span index. Throws InputError on mixed (L, H).
FeatureMatrix assemble_features(std::span<const ScoredTrace> traces);

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;            // population std
    std::vector<std::uint8_t> constant;  // 1 where std <= tol; transformed to 0

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Standardizer fit_standardizer(const Matrix& train, double constant_tol = 1e-12);
Matrix transform(const Standardizer& s, const Matrix& X);

// Keep masks: keep[c] == 1 when column c survives. `active` (optional,
// same length as X.cols()) restricts a step to columns that survived the
// previous ones; inactive columns are never kept.
struct ColumnMask {
    std::vector<std::uint8_t> keep;
    std::vector<std::string> warnings;

    std::size_t kept() const;
    std::vector<std::size_t> kept_indices() const;
};

ColumnMask drop_constant(const Matrix& X, double tol = 1e-12, std::span<const std::uint8_t> active = {});
ColumnMask drop_duplicates(const Matrix& X, std::span<const std::uint8_t> active = {}, double tol = 1e-12);

struct SelectionConfig {
    double threshold = 0.9;
    ForestConfig estimator{.n_trees = 50, .max_depth = 5};

    friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

// Greedy seed clustering on |pearson| > threshold; each multi-column cluster
// keeps the column the estimator forest ranks most important (ties -> lowest
// index). Rounds repeat on the survivors until no surviving pair exceeds the
// threshold.
ColumnMask correlated_selection(const Matrix& X, std::span<const int> labels, const SelectionConfig& cfg,
                                std::span<const std::uint8_t> active = {});

struct PreprocessConfig {
    double constant_tol = 1e-12;
    double duplicate_tol = 1e-12;
    SelectionConfig selection;

    friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

struct PreprocessState {
    PreprocessConfig config;
    Standardizer scaler;
    std::vector<std::size_t> dropped_constant;
    std::vector<std::size_t> dropped_duplicate;
    std::vector<std::size_t> dropped_correlated;
    std::vector<std::size_t> kept;  // final column indices, ascending
    std::vector<std::string> warnings;

    std::size_t input_columns() const { return scaler.mean.size(); }
    friend bool operator==(const PreprocessState&, const PreprocessState&) = default;
};

// standardize -> drop constant -> drop duplicate -> correlated selection
PreprocessState fit_pipeline(const Matrix& X, std::span<const int> labels, const PreprocessConfig& cfg = {});
// Standardizes with the fitted statistics, then keeps `state.kept` columns.
Matrix apply_pipeline(const PreprocessState& state, const Matrix& X);

}  // namespace mechdet
