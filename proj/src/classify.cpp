#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "mechdet/classify.hpp"
#include "mechdet/error.hpp"
#include "mechdet/rng.hpp"

namespace mechdet {

SplitIndices stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InputError("BAD_FRACTION", "train fraction must lie strictly between 0 and 1");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw InputError("UNLABELED", "split needs every row labeled 0 or 1");
        }
        by_class[labels[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < 2) {
            throw InputError("CLASS_TOO_SMALL", "each class needs at least 2 rows to split");
        }
    }

    std::size_t take[2];
    double frac[2];
    for (int c = 0; c < 2; ++c) {
        const double want = train_fraction * static_cast<double>(by_class[c].size());
        take[c] = static_cast<std::size_t>(std::floor(want));
        frac[c] = want - static_cast<double>(take[c]);
    }
    const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(labels.size())));
    std::size_t have = take[0] + take[1];
    // at most two units to hand out; largest fractional part first, ties to class 0
    const int order[2] = {frac[1] > frac[0] ? 1 : 0, frac[1] > frac[0] ? 0 : 1};
    for (int k = 0; k < 2 && have < target; ++k) {
        const int c = order[k];
        if (take[c] < by_class[c].size()) {
            ++take[c];
            ++have;
        }
    }

    SplitIndices out;
    for (int c = 0; c < 2; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        auto idx = by_class[c];
        rng.shuffle(idx);
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
        out.val.insert(out.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    return out;
}

std::vector<double> balanced_sample_weights(std::span<const int> y) {
    std::size_t count[2] = {0, 0};
    for (int v : y) ++count[v == 1 ? 1 : 0];
    std::vector<double> w(y.size(), 1.0);
    const double n = static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t c = count[y[i] == 1 ? 1 : 0];
        w[i] = n / (2.0 * static_cast<double>(c));
    }
    return w;
}

std::string_view to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::logistic: return "logistic";
        case ClassifierKind::linear_svm: return "linear_svm";
        case ClassifierKind::rbf_svm: return "rbf_svm";
        case ClassifierKind::random_forest: return "forest";
    }
    return "?";
}

ClassifierKind parse_classifier_kind(std::string_view s) {
    if (s == "logistic") return ClassifierKind::logistic;
    if (s == "linear_svm") return ClassifierKind::linear_svm;
    if (s == "rbf_svm") return ClassifierKind::rbf_svm;
    if (s == "forest" || s == "random_forest") return ClassifierKind::random_forest;
    throw InputError("BAD_CLASSIFIER", "unknown classifier kind: " + std::string(s));
}

ClassifierKind ClassifierModel::kind() const { return static_cast<ClassifierKind>(params.index()); }

ClassifierModel train_classifier(const Matrix& X, std::span<const int> y, const ClassifierConfig& cfg) {
    ClassifierModel m;
    m.n_features = X.cols();
    switch (cfg.kind) {
        case ClassifierKind::logistic:
            m.params = train_logistic(X, y, cfg.logistic);
            break;
        case ClassifierKind::linear_svm: {
            auto c = cfg.linear_svm;
            c.seed = cfg.seed;
            m.params = train_linear_svm(X, y, c);
            break;
        }
        case ClassifierKind::rbf_svm:
            m.params = train_rbf_svm(X, y, cfg.rbf_svm);
            break;
        case ClassifierKind::random_forest: {
            auto c = cfg.forest;
            c.seed = cfg.seed;
            m.params = train_random_forest(X, y, c);
            break;
        }
    }
    return m;
}

Predictions predict(const ClassifierModel& model, const Matrix& X) {
    if (X.cols() != model.n_features) {
        throw InputError("SCHEMA_MISMATCH", "feature count differs from the trained model");
    }
    Predictions out;
    out.labels.resize(X.rows());
    out.scores.resize(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const auto x = X.row(r);
        double score = 0.0, threshold = 0.0;
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, LogisticModel>) {
                    score = logistic_probability(p, x);
                    threshold = 0.5;
                } else if constexpr (std::is_same_v<T, LinearSvmModel>) {
                    score = linear_svm_margin(p, x);
                } else if constexpr (std::is_same_v<T, RbfSvmModel>) {
                    score = rbf_svm_decision(p, x);
                } else {
                    score = forest_vote_fraction(p, x);
                    threshold = 0.5;
                }
            },
            model.params);
        out.scores[r] = score;
        out.labels[r] = score > threshold ? 1 : 0;
    }
    return out;
}

EvalResult evaluate(std::span<const int> pred, std::span<const int> gold) {
    if (pred.size() != gold.size()) {
        throw InputError("LENGTH_MISMATCH", "prediction and gold lengths differ");
    }
    EvalResult r;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == 1, g = gold[i] == 1;
        if (p && g) ++r.tp;
        else if (p) ++r.fp;
        else if (g) ++r.fn;
        else ++r.tn;
    }
    r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

}  // namespace mechdet
