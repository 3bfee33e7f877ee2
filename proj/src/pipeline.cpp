#include "mechdet/pipeline.hpp"

#include <istream>
#include <ostream>

#include "mechdet/container.hpp"
#include "mechdet/error.hpp"

namespace mechdet {

using nlohmann::json;

namespace {

std::vector<std::size_t> as_indices(const json& j) {
    std::vector<std::size_t> out;
    for (const auto& v : j) out.push_back(v.get<std::size_t>());
    return out;
}

json forest_config_json(const ForestConfig& c) {
    return {{"n_trees", c.n_trees},     {"max_depth", c.max_depth},   {"min_samples_split", c.min_samples_split},
            {"min_samples_leaf", c.min_samples_leaf}, {"max_features", c.max_features}, {"bootstrap", c.bootstrap},
            {"seed", c.seed}};  // jobs is an execution detail and stays out of saved configs
}

// Missing keys keep their defaults, so partial config files work.
template <typename T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

ForestConfig forest_config_from(const json& j) {
    ForestConfig c;
    take(j, "n_trees", c.n_trees);
    take(j, "max_depth", c.max_depth);
    take(j, "min_samples_split", c.min_samples_split);
    take(j, "min_samples_leaf", c.min_samples_leaf);
    take(j, "max_features", c.max_features);
    take(j, "bootstrap", c.bootstrap);
    take(j, "seed", c.seed);
    return c;
}

const TensorBlob& need(const Container& c, std::string_view name) {
    const auto* t = c.find(name);
    if (!t) {
        throw FormatError("MISSING_TENSOR", "pipeline file lacks tensor '" + std::string(name) + "'");
    }
    return *t;
}

std::vector<double> doubles(const Container& c, std::string_view name) { return unpack_doubles(need(c, name)); }
std::vector<std::int64_t> ints(const Container& c, std::string_view name) { return unpack_ints(need(c, name)); }

std::int64_t len(std::size_t n) { return static_cast<std::int64_t>(n); }

}  // namespace

json to_json(const PreprocessConfig& c) {
    return {{"constant_tol", c.constant_tol},
            {"duplicate_tol", c.duplicate_tol},
            {"selection", {{"threshold", c.selection.threshold}, {"estimator", forest_config_json(c.selection.estimator)}}}};
}

PreprocessConfig preprocess_config_from_json(const json& j) {
    PreprocessConfig c;
    take(j, "constant_tol", c.constant_tol);
    take(j, "duplicate_tol", c.duplicate_tol);
    if (j.contains("selection")) {
        const auto& s = j.at("selection");
        take(s, "threshold", c.selection.threshold);
        if (s.contains("estimator")) c.selection.estimator = forest_config_from(s.at("estimator"));
    }
    return c;
}

json to_json(const ClassifierConfig& c) {
    const auto& lg = c.logistic;
    const auto& ls = c.linear_svm;
    const auto& rb = c.rbf_svm;
    return {{"kind", to_string(c.kind)},
            {"seed", c.seed},
            {"logistic",
             {{"l2", lg.l2}, {"tol", lg.tol}, {"max_iter", lg.max_iter}, {"allow_degenerate", lg.allow_degenerate},
              {"class_weighting", lg.class_weighting}}},
            {"linear_svm", {{"lambda", ls.lambda}, {"epochs", ls.epochs}, {"class_weighting", ls.class_weighting}}},
            {"rbf_svm",
             {{"C", rb.C}, {"gamma", rb.gamma}, {"tol", rb.tol}, {"max_iter", rb.max_iter}, {"cache_mb", rb.cache_mb},
              {"class_weighting", rb.class_weighting}}},
            {"forest", forest_config_json(c.forest)}};
}

ClassifierConfig classifier_config_from_json(const json& j) {
    ClassifierConfig c;
    if (j.contains("kind")) c.kind = parse_classifier_kind(j.at("kind").get<std::string>());
    take(j, "seed", c.seed);
    if (j.contains("logistic")) {
        const auto& s = j.at("logistic");
        take(s, "l2", c.logistic.l2);
        take(s, "tol", c.logistic.tol);
        take(s, "max_iter", c.logistic.max_iter);
        take(s, "allow_degenerate", c.logistic.allow_degenerate);
        take(s, "class_weighting", c.logistic.class_weighting);
    }
    if (j.contains("linear_svm")) {
        const auto& s = j.at("linear_svm");
        take(s, "lambda", c.linear_svm.lambda);
        take(s, "epochs", c.linear_svm.epochs);
        take(s, "class_weighting", c.linear_svm.class_weighting);
    }
    if (j.contains("rbf_svm")) {
        const auto& s = j.at("rbf_svm");
        take(s, "C", c.rbf_svm.C);
        take(s, "gamma", c.rbf_svm.gamma);
        take(s, "tol", c.rbf_svm.tol);
        take(s, "max_iter", c.rbf_svm.max_iter);
        take(s, "cache_mb", c.rbf_svm.cache_mb);
        take(s, "class_weighting", c.rbf_svm.class_weighting);
    }
    if (j.contains("forest")) c.forest = forest_config_from(j.at("forest"));
    return c;
}

FittedPipeline train_pipeline(const FeatureMatrix& train, const PreprocessConfig& pre, const ClassifierConfig& cls,
                              json config) {
    if (!train.fully_labeled()) {
        throw InputError("UNLABELED", "training rows must all carry a 0/1 label");
    }
    FittedPipeline p;
    p.preprocess = fit_pipeline(train.values, train.labels, pre);
    const Matrix Xt = apply_pipeline(p.preprocess, train.values);
    p.model = train_classifier(Xt, train.labels, cls);
    p.schema_hash = schema_hash(train.columns);
    p.n_layers = train.n_layers;
    p.n_heads = train.n_heads;
    p.config = std::move(config);
    return p;
}

void check_schema(const FittedPipeline& p, std::span<const FeatureColumn> columns) {
    const auto h = schema_hash(columns);
    if (h != p.schema_hash) {
        throw InputError("SCHEMA_MISMATCH", "feature schema (" + std::to_string(columns.size()) +
                                                " columns) does not match the pipeline's training schema");
    }
}

Predictions predict_pipeline(const FittedPipeline& p, const FeatureMatrix& fm) {
    check_schema(p, fm.columns);
    return predict(p.model, apply_pipeline(p.preprocess, fm.values));
}

std::vector<std::byte> encode_pipeline(const FittedPipeline& p) {
    Container c;
    std::copy(kPipelineMagic.begin(), kPipelineMagic.end(), c.magic.begin());
    const auto& st = p.preprocess;
    const std::size_t C = st.input_columns();

    json pre = {{"config", to_json(st.config)},
                {"constant", st.scaler.constant},
                {"dropped_constant", st.dropped_constant},
                {"dropped_duplicate", st.dropped_duplicate},
                {"dropped_correlated", st.dropped_correlated},
                {"kept", st.kept},
                {"warnings", st.warnings}};
    c.tensors.push_back(pack_doubles("scaler_mean", {len(C)}, st.scaler.mean));
    c.tensors.push_back(pack_doubles("scaler_std", {len(st.scaler.std.size())}, st.scaler.std));

    json model = {{"kind", to_string(p.model.kind())}, {"n_features", p.model.n_features}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) {
                model["iterations"] = m.iterations;
                model["converged"] = m.converged;
                c.tensors.push_back(pack_doubles("weights", {len(m.weights.size())}, m.weights));
                c.tensors.push_back(pack_doubles("bias", {1}, std::span(&m.bias, 1)));
            } else if constexpr (std::is_same_v<T, LinearSvmModel>) {
                c.tensors.push_back(pack_doubles("weights", {len(m.weights.size())}, m.weights));
                c.tensors.push_back(pack_doubles("bias", {1}, std::span(&m.bias, 1)));
                c.tensors.push_back(pack_doubles("epoch_objective", {len(m.epoch_objective.size())}, m.epoch_objective));
            } else if constexpr (std::is_same_v<T, RbfSvmModel>) {
                model["converged"] = m.converged;
                const auto& sv = m.support_vectors;
                c.tensors.push_back(pack_doubles("support_vectors", {len(sv.rows()), len(sv.cols())}, sv.data()));
                c.tensors.push_back(pack_doubles("dual_coef", {len(m.dual_coef.size())}, m.dual_coef));
                const double gb[2] = {m.gamma, m.bias};
                c.tensors.push_back(pack_doubles("gamma_bias", {2}, gb));
            } else {
                model["forest_n_features"] = m.n_features;
                std::vector<std::int64_t> sizes, feature, left, right;
                std::vector<double> threshold, value;
                for (const auto& tree : m.trees) {
                    sizes.push_back(len(tree.nodes.size()));
                    for (const auto& n : tree.nodes) {
                        feature.push_back(n.feature);
                        left.push_back(n.left);
                        right.push_back(n.right);
                        threshold.push_back(n.threshold);
                        value.push_back(n.value);
                    }
                }
                const auto N = len(feature.size());
                c.tensors.push_back(pack_doubles("importances", {len(m.importances.size())}, m.importances));
                c.tensors.push_back(pack_ints("tree_sizes", {len(sizes.size())}, sizes));
                c.tensors.push_back(pack_ints("node_feature", {N}, feature));
                c.tensors.push_back(pack_ints("node_left", {N}, left));
                c.tensors.push_back(pack_ints("node_right", {N}, right));
                c.tensors.push_back(pack_doubles("node_threshold", {N}, threshold));
                c.tensors.push_back(pack_doubles("node_value", {N}, value));
            }
        },
        p.model.params);

    c.meta = {{"kind", "fitted_pipeline"}, {"schema_hash", p.schema_hash}, {"n_layers", p.n_layers},
              {"n_heads", p.n_heads},      {"config", p.config},           {"preprocess", pre},
              {"model", model}};
    return encode_container(c);
}

FittedPipeline decode_pipeline(std::span<const std::byte> data) {
    const Container c = decode_container(data, kPipelineMagic);
    FittedPipeline p;
    try {
        const auto& meta = c.meta;
        if (meta.value("kind", "") != "fitted_pipeline") {
            throw FormatError("BAD_HEADER", "container is not a fitted pipeline");
        }
        p.schema_hash = meta.at("schema_hash").get<std::uint64_t>();
        p.n_layers = meta.at("n_layers").get<std::int64_t>();
        p.n_heads = meta.at("n_heads").get<std::int64_t>();
        p.config = meta.at("config");

        const auto& pre = meta.at("preprocess");
        auto& st = p.preprocess;
        st.config = preprocess_config_from_json(pre.at("config"));
        st.scaler.mean = doubles(c, "scaler_mean");
        st.scaler.std = doubles(c, "scaler_std");
        st.scaler.constant = pre.at("constant").get<std::vector<std::uint8_t>>();
        st.dropped_constant = as_indices(pre.at("dropped_constant"));
        st.dropped_duplicate = as_indices(pre.at("dropped_duplicate"));
        st.dropped_correlated = as_indices(pre.at("dropped_correlated"));
        st.kept = as_indices(pre.at("kept"));
        st.warnings = pre.at("warnings").get<std::vector<std::string>>();
        if (st.scaler.std.size() != st.scaler.mean.size() || st.scaler.constant.size() != st.scaler.mean.size()) {
            throw FormatError("BAD_HEADER", "standardizer vectors disagree in length");
        }
        for (auto k : st.kept) {
            if (k >= st.scaler.mean.size()) throw FormatError("BAD_HEADER", "kept column index out of range");
        }

        const auto& model = meta.at("model");
        p.model.n_features = model.at("n_features").get<std::size_t>();
        switch (parse_classifier_kind(model.at("kind").get<std::string>())) {
            case ClassifierKind::logistic: {
                LogisticModel m;
                m.weights = doubles(c, "weights");
                m.bias = doubles(c, "bias").at(0);
                m.iterations = model.at("iterations").get<int>();
                m.converged = model.at("converged").get<bool>();
                p.model.params = std::move(m);
                break;
            }
            case ClassifierKind::linear_svm: {
                LinearSvmModel m;
                m.weights = doubles(c, "weights");
                m.bias = doubles(c, "bias").at(0);
                m.epoch_objective = doubles(c, "epoch_objective");
                p.model.params = std::move(m);
                break;
            }
            case ClassifierKind::rbf_svm: {
                RbfSvmModel m;
                const auto& sv = need(c, "support_vectors");
                if (sv.shape.size() != 2) throw FormatError("BAD_HEADER", "support_vectors must be 2-D");
                m.support_vectors = Matrix(static_cast<std::size_t>(sv.shape[0]), static_cast<std::size_t>(sv.shape[1]),
                                           unpack_doubles(sv));
                m.dual_coef = doubles(c, "dual_coef");
                const auto gb = doubles(c, "gamma_bias");
                if (gb.size() != 2 || m.dual_coef.size() != m.support_vectors.rows()) {
                    throw FormatError("BAD_HEADER", "rbf svm tensors disagree in shape");
                }
                m.gamma = gb[0];
                m.bias = gb[1];
                m.converged = model.at("converged").get<bool>();
                p.model.params = std::move(m);
                break;
            }
            case ClassifierKind::random_forest: {
                ForestModel m;
                m.n_features = model.at("forest_n_features").get<std::size_t>();
                m.importances = doubles(c, "importances");
                const auto sizes = ints(c, "tree_sizes");
                const auto feature = ints(c, "node_feature");
                const auto left = ints(c, "node_left");
                const auto right = ints(c, "node_right");
                const auto threshold = doubles(c, "node_threshold");
                const auto value = doubles(c, "node_value");
                std::size_t k = 0;
                for (auto sz : sizes) {
                    DecisionTree t;
                    for (std::int64_t i = 0; i < sz; ++i, ++k) {
                        if (k >= feature.size()) throw FormatError("BAD_HEADER", "forest node tensors truncated");
                        t.nodes.push_back({static_cast<std::int32_t>(feature[k]), threshold.at(k),
                                           static_cast<std::int32_t>(left.at(k)), static_cast<std::int32_t>(right.at(k)),
                                           value.at(k)});
                    }
                    m.trees.push_back(std::move(t));
                }
                p.model.params = std::move(m);
                break;
            }
        }
    } catch (const json::exception& e) {
        throw FormatError("BAD_HEADER", std::string("malformed pipeline header: ") + e.what());
    } catch (const std::out_of_range&) {
        throw FormatError("BAD_HEADER", "pipeline tensor shorter than declared");
    } catch (const InputError& e) {
        throw FormatError("BAD_HEADER", e.what());
    }
    return p;
}

void save_pipeline(const FittedPipeline& p, std::ostream& out) {
    const auto bytes = encode_pipeline(p);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("WRITE_FAILED", "could not write pipeline");
}

FittedPipeline load_pipeline(std::istream& in) { return decode_pipeline(read_all(in)); }

void save_pipeline(const FittedPipeline& p, const std::filesystem::path& path) { write_file(path, encode_pipeline(p)); }

FittedPipeline load_pipeline(const std::filesystem::path& path) { return decode_pipeline(read_file(path)); }

}  // namespace mechdet
