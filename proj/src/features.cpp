#include "mechdet/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mechdet/error.hpp"
#include "mechdet/rng.hpp"
#include "mechdet/stats.hpp"

namespace mechdet {

namespace {

std::vector<std::uint8_t> resolve_active(std::span<const std::uint8_t> active, std::size_t cols) {
    if (active.empty()) return std::vector<std::uint8_t>(cols, 1);
    if (active.size() != cols) {
        throw InputError("SHAPE_MISMATCH", "active mask length differs from the column count");
    }
    return {active.begin(), active.end()};
}

}  // namespace

std::string FeatureColumn::name() const {
    if (kind == FeatureKind::ecs) {
        return "ECS(" + std::to_string(layer) + "," + std::to_string(head) + ")";
    }
    return "PKS(" + std::to_string(layer) + ")";
}

std::vector<FeatureColumn> feature_schema(std::int64_t n_layers, std::int64_t n_heads) {
    std::vector<FeatureColumn> cols;
    cols.reserve(static_cast<std::size_t>(n_layers * n_heads + n_layers));
    for (std::int64_t l = 0; l < n_layers; ++l)
        for (std::int64_t h = 0; h < n_heads; ++h) cols.push_back({FeatureKind::ecs, l, h});
    for (std::int64_t l = 0; l < n_layers; ++l) cols.push_back({FeatureKind::pks, l, -1});
    return cols;
}

std::uint64_t schema_hash(std::span<const FeatureColumn> columns) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& c : columns) {
        for (char ch : c.name() + ";") {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

bool FeatureMatrix::fully_labeled() const {
    return std::none_of(labels.begin(), labels.end(), [](int l) { return l != 0 && l != 1; });
}

FeatureMatrix assemble_features(std::span<const ScoredTrace> traces) {
    FeatureMatrix fm;
    if (traces.empty()) return fm;
    fm.n_layers = traces.front().scores.n_layers;
    fm.n_heads = traces.front().scores.n_heads;
    fm.columns = feature_schema(fm.n_layers, fm.n_heads);
    const auto L = fm.n_layers;
    const auto H = fm.n_heads;

    std::size_t n_rows = 0;
    for (const auto& t : traces) {
        if (t.scores.n_layers != L || t.scores.n_heads != H) {
            throw InputError("MIXED_SHAPES", "trace '" + t.trace_id + "' has (L, H) = (" +
                                                 std::to_string(t.scores.n_layers) + ", " +
                                                 std::to_string(t.scores.n_heads) + "), expected (" +
                                                 std::to_string(L) + ", " + std::to_string(H) + ")");
        }
        if (!t.labels.empty() && t.labels.size() != static_cast<std::size_t>(t.scores.n_chunks)) {
            throw InputError("LABEL_COUNT", "trace '" + t.trace_id + "' label count differs from its span count");
        }
        n_rows += static_cast<std::size_t>(t.scores.n_chunks);
    }

    fm.values = Matrix(n_rows, fm.columns.size());
    std::size_t r = 0;
    for (const auto& t : traces) {
        for (std::int64_t j = 0; j < t.scores.n_chunks; ++j, ++r) {
            auto row = fm.values.row(r);
            std::size_t c = 0;
            for (std::int64_t l = 0; l < L; ++l)
                for (std::int64_t h = 0; h < H; ++h) row[c++] = t.scores.ecs_at(l, h, j);
            for (std::int64_t l = 0; l < L; ++l) row[c++] = t.scores.pks_at(l, j);
            fm.rows.push_back({t.trace_id, j});
            fm.labels.push_back(t.labels.empty() ? kUnlabeled : t.labels[static_cast<std::size_t>(j)]);
        }
    }
    return fm;
}

Standardizer fit_standardizer(const Matrix& train, double constant_tol) {
    if (train.rows() == 0) {
        throw InputError("EMPTY_INPUT", "cannot fit a standardizer on zero rows");
    }
    Standardizer s;
    s.mean.resize(train.cols());
    s.std.resize(train.cols());
    s.constant.resize(train.cols());
    for (std::size_t c = 0; c < train.cols(); ++c) {
        const auto col = train.column(c);
        s.mean[c] = mean(col);
        s.std[c] = population_std(col);
        s.constant[c] = is_constant(col, constant_tol) ? 1 : 0;
    }
    return s;
}

Matrix transform(const Standardizer& s, const Matrix& X) {
    if (X.cols() != s.mean.size()) {
        throw InputError("COLUMN_MISMATCH", "matrix has " + std::to_string(X.cols()) + " columns, standardizer expects " +
                                                std::to_string(s.mean.size()));
    }
    Matrix out(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r)
        for (std::size_t c = 0; c < X.cols(); ++c)
            out(r, c) = s.constant[c] ? 0.0 : (X(r, c) - s.mean[c]) / s.std[c];
    return out;
}

std::size_t ColumnMask::kept() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1)); }

std::vector<std::size_t> ColumnMask::kept_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < keep.size(); ++c)
        if (keep[c]) out.push_back(c);
    return out;
}

ColumnMask drop_constant(const Matrix& X, double tol, std::span<const std::uint8_t> active) {
    ColumnMask m{resolve_active(active, X.cols()), {}};
    for (std::size_t c = 0; c < X.cols(); ++c) {
        if (m.keep[c] && population_std(X.column(c)) <= tol) m.keep[c] = 0;
    }
    if (m.kept() == 0) {
        m.warnings.push_back("every column is constant; no features remain");
    }
    return m;
}

ColumnMask drop_duplicates(const Matrix& X, std::span<const std::uint8_t> active, double tol) {
    ColumnMask m{resolve_active(active, X.cols()), {}};
    std::vector<std::size_t> survivors;
    for (std::size_t c = 0; c < X.cols(); ++c) {
        if (!m.keep[c]) continue;
        const bool dup = std::any_of(survivors.begin(), survivors.end(), [&](std::size_t s) {
            for (std::size_t r = 0; r < X.rows(); ++r) {
                if (std::abs(X(r, c) - X(r, s)) > tol) return false;
            }
            return true;
        });
        if (dup) {
            m.keep[c] = 0;
        } else {
            survivors.push_back(c);
        }
    }
    return m;
}

ColumnMask correlated_selection(const Matrix& X, std::span<const int> labels, const SelectionConfig& cfg,
                                std::span<const std::uint8_t> active) {
    if (!(cfg.threshold > 0.0 && cfg.threshold <= 1.0)) {
        throw InputError("BAD_THRESHOLD", "correlation threshold must lie in (0, 1]");
    }
    if (labels.size() != X.rows()) {
        throw InputError("SHAPE_MISMATCH", "label count differs from the row count");
    }
    ColumnMask m{resolve_active(active, X.cols()), {}};
    if (X.rows() < 2) return m;

    std::vector<std::vector<double>> cols(X.cols());
    for (std::size_t c = 0; c < X.cols(); ++c)
        if (m.keep[c]) cols[c] = X.column(c);

    std::vector<std::size_t> current = m.kept_indices();
    for (std::uint64_t round = 0;; ++round) {
        std::vector<std::vector<std::size_t>> clusters;
        for (std::size_t c : current) {
            auto it = std::find_if(clusters.begin(), clusters.end(), [&](const std::vector<std::size_t>& cl) {
                return std::abs(pearson(cols[c], cols[cl.front()]).r) > cfg.threshold;
            });
            if (it == clusters.end()) {
                clusters.push_back({c});
            } else {
                it->push_back(c);
            }
        }
        if (clusters.size() == current.size()) break;

        std::vector<std::size_t> next;
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            const auto& cl = clusters[k];
            if (cl.size() == 1) {
                next.push_back(cl.front());
                continue;
            }
            ForestConfig fc = cfg.estimator;
            fc.seed = derive_seed(cfg.estimator.seed, round * 0x10000 + k);
            const ForestModel f = train_random_forest(X.select_cols(cl), labels, fc);
            std::size_t best = 0;
            for (std::size_t i = 1; i < cl.size(); ++i)
                if (f.importances[i] > f.importances[best]) best = i;
            next.push_back(cl[best]);
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    std::fill(m.keep.begin(), m.keep.end(), 0);
    for (auto c : current) m.keep[c] = 1;
    return m;
}

PreprocessState fit_pipeline(const Matrix& X, std::span<const int> labels, const PreprocessConfig& cfg) {
    if (X.rows() == 0) {
        throw InputError("EMPTY_INPUT", "cannot fit a pipeline on zero rows");
    }
    if (std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0 && l != 1; })) {
        throw InputError("UNLABELED", "pipeline fitting needs a 0/1 label on every row");
    }
    PreprocessState st;
    st.config = cfg;
    st.scaler = fit_standardizer(X, cfg.constant_tol);
    const Matrix Z = transform(st.scaler, X);

    ColumnMask constant = drop_constant(Z, cfg.constant_tol);
    for (std::size_t c = 0; c < Z.cols(); ++c)
        if (st.scaler.constant[c]) constant.keep[c] = 0;
    const ColumnMask dup = drop_duplicates(Z, constant.keep, cfg.duplicate_tol);
    const ColumnMask sel = correlated_selection(Z, labels, cfg.selection, dup.keep);

    for (std::size_t c = 0; c < Z.cols(); ++c) {
        if (!constant.keep[c]) {
            st.dropped_constant.push_back(c);
        } else if (!dup.keep[c]) {
            st.dropped_duplicate.push_back(c);
        } else if (!sel.keep[c]) {
            st.dropped_correlated.push_back(c);
        } else {
            st.kept.push_back(c);
        }
    }
    const ColumnMask* masks[] = {&constant, &dup, &sel};
    for (const ColumnMask* mask : masks) {
        st.warnings.insert(st.warnings.end(), mask->warnings.begin(), mask->warnings.end());
    }
    return st;
}

Matrix apply_pipeline(const PreprocessState& state, const Matrix& X) {
    return transform(state.scaler, X).select_cols(state.kept);
}

}  // namespace mechdet
