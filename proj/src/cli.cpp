#include "mechdet/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mechdet/analysis.hpp"
#include "mechdet/classify.hpp"
#include "mechdet/detect.hpp"
#include "mechdet/error.hpp"
#include "mechdet/features.hpp"
#include "mechdet/pipeline.hpp"
#include "mechdet/rng.hpp"
#include "mechdet/scores.hpp"
#include "mechdet/synth.hpp"
#include "mechdet/trace_format.hpp"

namespace mechdet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr const char* kTraceExt = ".mhtr";
constexpr const char* kScoreExt = ".mhsc";

// Bad paths / missing inputs: exit 2 rather than 1.
class UsageError : public Error {
public:
    using Error::Error;
};

// TOML/INI reader whose top-level keys belong to the subcommand being run, so
// `mechdet train --config t.toml` can say `classifier = "forest"` without a
// [train] section.
class SubcommandConfig : public CLI::ConfigTOML {
public:
    explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        auto items = CLI::ConfigTOML::from_config(in);
        const auto subs = app_->get_subcommands();
        if (subs.empty()) return items;
        for (auto& item : items) {
            if (item.parents.empty()) item.parents = {subs.front()->get_name()};
        }
        return items;
    }

private:
    const CLI::App* app_;
};

struct Options {
    std::vector<std::string> traces;
    std::vector<std::string> scores;
    std::string head;
    std::string pipeline;
    std::string out;
    std::string metrics;
    std::string verdicts;
    std::uint64_t seed = 0;
    std::string classifier = "rbf_svm";
    double threshold = 0.9;
    double confidence_floor = 0.0;
    unsigned jobs = 1;
    std::string format = "csv";
    std::string aggregation = "mean";
    std::string gold = "response_label";
    double train_fraction = 0.9;
    bool no_invert_ecs = false;
    bool class_weighting = false;
    // classifier hyperparameters
    double l2 = 1e-3;
    double lambda = 1e-3;
    int epochs = 60;
    double svm_c = 1.0;
    double gamma = 0.0;
    int n_trees = 100;
    int max_depth = 5;
    // synth
    std::string kind = "planted";
    int count = 20;
    std::int64_t layers = 4;
    std::int64_t heads = 2;
    std::int64_t d_model = 16;
    std::int64_t vocab = 64;
    std::int64_t spans = 5;
    std::string dtype = "f32";
};

// Directories contribute their `ext` files (sorted by name); files are taken as given.
std::vector<fs::path> collect(const std::vector<std::string>& inputs, const char* ext, const char* what) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ext) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p, ec)) {
            out.push_back(p);
        } else {
            throw UsageError("NO_SUCH_PATH", std::string(what) + " path does not exist: " + in);
        }
    }
    if (out.empty()) {
        throw UsageError("NO_INPUTS", std::string("no ") + what + " files found");
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("WRITE_FAILED", "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("WRITE_FAILED", "could not write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path sidecar(const fs::path& out, const char* suffix) { return fs::path(out.string() + suffix); }

json eval_json(const EvalResult& r) {
    return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
            {"tp", r.tp},               {"fp", r.fp},         {"tn", r.tn},
            {"fn", r.fn}};
}

std::vector<std::string> paths_json(const std::vector<fs::path>& ps) {
    std::vector<std::string> out;
    for (const auto& p : ps) out.push_back(p.generic_string());
    return out;
}

ScoreOptions score_options(const Options& o) {
    ScoreOptions s;
    s.aggregation = parse_aggregation(o.aggregation);
    s.jobs = o.jobs;
    return s;
}

ClassifierConfig classifier_config(const Options& o) {
    ClassifierConfig c;
    c.kind = parse_classifier_kind(o.classifier);
    c.seed = o.seed;
    c.logistic.l2 = o.l2;
    c.logistic.class_weighting = o.class_weighting;
    c.linear_svm.lambda = o.lambda;
    c.linear_svm.epochs = o.epochs;
    c.linear_svm.class_weighting = o.class_weighting;
    c.rbf_svm.C = o.svm_c;
    c.rbf_svm.gamma = o.gamma;
    c.rbf_svm.class_weighting = o.class_weighting;
    c.forest.n_trees = o.n_trees;
    c.forest.max_depth = o.max_depth;
    c.forest.jobs = o.jobs;
    return c;
}

PreprocessConfig preprocess_config(const Options& o) {
    PreprocessConfig p;
    p.selection.threshold = o.threshold;
    p.selection.estimator.seed = o.seed;
    return p;
}

// The pool size is left out on purpose: outputs must not depend on it.
json base_config(const std::string& sub) { return {{"subcommand", sub}, {"tool_version", kToolVersion}}; }

std::vector<ScoreRecord> load_score_records(const Options& o, std::vector<fs::path>& paths) {
    paths = collect(o.scores, kScoreExt, "score");
    std::vector<ScoreRecord> recs;
    for (const auto& p : paths) recs.push_back(load_scores(p));
    return recs;
}

std::vector<ScoredTrace> labeled_traces(const std::vector<ScoreRecord>& recs, double floor, std::ostream& err) {
    std::vector<ScoredTrace> out;
    for (const auto& r : recs) {
        if (has_labels(r)) out.push_back(to_scored_trace(r, floor));
    }
    if (out.empty()) {
        throw InputError("UNLABELED", "none of the score files carries labels");
    }
    if (out.size() != recs.size()) {
        err << "warning: skipped " << recs.size() - out.size() << " unlabeled score file(s)\n";
    }
    return out;
}

std::vector<ActivationTrace> load_traces(const std::vector<fs::path>& paths) {
    std::vector<ActivationTrace> traces;
    traces.reserve(paths.size());
    for (const auto& p : paths) {
        try {
            traces.push_back(load_trace(p));
        } catch (const Error& e) {
            throw Error(e.code(), p.generic_string() + ": " + e.what());
        }
    }
    return traces;
}

ProjectionHead load_head(const Options& o, std::int64_t d_model) {
    if (o.head.empty()) throw UsageError("MISSING_HEAD", "--head is required");
    return load_projection_head(fs::path(o.head), d_model);
}

// ---- subcommands -----------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out) {
    const auto paths = collect(o.traces, kTraceExt, "trace");
    json results = json::array();
    bool all_ok = true;
    for (const auto& p : paths) {
        json entry = {{"path", p.generic_string()}};
        try {
            const auto tr = load_trace(p, false);
            const auto rep = validate_trace(tr);
            entry["ok"] = rep.ok();
            entry["codes"] = rep.codes();
            json issues = json::array();
            for (const auto& i : rep.issues) issues.push_back({{"code", i.code}, {"message", i.message}});
            entry["issues"] = issues;
            if (rep.ok()) {
                out << "OK " << p.generic_string() << "\n";
            } else {
                all_ok = false;
                out << "INVALID " << p.generic_string() << ": " << rep.summary() << "\n";
            }
        } catch (const Error& e) {
            all_ok = false;
            entry["ok"] = false;
            entry["codes"] = {e.code()};
            entry["issues"] = json::array({{{"code", e.code()}, {"message", e.what()}}});
            out << "UNREADABLE " << p.generic_string() << ": " << e.what() << "\n";
        }
        results.push_back(entry);
    }
    if (!o.out.empty()) {
        auto cfg = base_config("validate");
        cfg["traces"] = paths_json(paths);
        write_json(o.out, {{"run_config", cfg}, {"results", results}, {"all_valid", all_ok}});
    }
    return all_ok ? kExitOk : kExitData;
}

int cmd_score(const Options& o, std::ostream& out) {
    const auto paths = collect(o.traces, kTraceExt, "trace");
    if (o.out.empty()) throw UsageError("MISSING_OUT", "--out directory is required");
    const auto traces = load_traces(paths);
    const auto head = load_head(o, traces.front().meta.d_model);
    DetectOptions opts{score_options(o), o.jobs};
    const auto scores = score_traces(traces, head, opts);

    fs::create_directories(o.out);
    auto cfg = base_config("score");
    cfg["head"] = fs::path(o.head).generic_string();
    cfg["aggregation"] = o.aggregation;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        auto c = cfg;
        c["trace"] = paths[i].generic_string();
        const fs::path dest = fs::path(o.out) / (paths[i].stem().string() + kScoreExt);
        save_scores(make_score_record(traces[i], scores[i]), dest, c);
    }
    out << "scored " << traces.size() << " trace(s) into " << fs::path(o.out).generic_string() << "\n";
    return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> paths;
    const auto recs = load_score_records(o, paths);
    if (o.out.empty()) throw UsageError("MISSING_OUT", "--out file is required");
    if (o.format != "csv" && o.format != "json") throw UsageError("BAD_FORMAT", "--format must be csv or json");
    const auto traces = labeled_traces(recs, o.confidence_floor, err);
    const auto fm = assemble_features(traces);
    const auto report = correlation_report(fm, !o.no_invert_ecs);

    auto cfg = base_config("analyze");
    cfg["scores"] = paths_json(paths);
    cfg["confidence_floor"] = o.confidence_floor;
    cfg["invert_labels_for_ecs"] = !o.no_invert_ecs;
    cfg["format"] = o.format;
    if (o.format == "csv") {
        write_text(o.out, report_to_csv(report));
        write_json(sidecar(o.out, ".run_config.json"), cfg);
    } else {
        write_json(o.out, {{"run_config", cfg}, {"report", report_to_json(report)}});
    }
    out << "analyzed " << fm.rows.size() << " span(s), " << fm.columns.size() << " feature(s)\n";
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> paths;
    const auto recs = load_score_records(o, paths);
    if (o.out.empty()) throw UsageError("MISSING_OUT", "--out pipeline path is required");
    const auto traces = labeled_traces(recs, o.confidence_floor, err);
    const auto fm = assemble_features(traces);
    const auto split = stratified_split(fm.labels, o.train_fraction, o.seed);

    auto subset = [&](const std::vector<std::size_t>& idx) {
        FeatureMatrix s;
        s.n_layers = fm.n_layers;
        s.n_heads = fm.n_heads;
        s.columns = fm.columns;
        s.values = fm.values.select_rows(idx);
        for (auto i : idx) {
            s.rows.push_back(fm.rows[i]);
            s.labels.push_back(fm.labels[i]);
        }
        return s;
    };
    const auto train = subset(split.train);
    const auto val = subset(split.val);

    const auto cls = classifier_config(o);
    const auto pre = preprocess_config(o);
    auto cfg = base_config("train");
    cfg["scores"] = paths_json(paths);
    cfg["seed"] = o.seed;
    cfg["classifier"] = to_string(cls.kind);
    cfg["classifier_config"] = to_json(cls);
    cfg["preprocess_config"] = to_json(pre);
    cfg["train_fraction"] = o.train_fraction;
    cfg["confidence_floor"] = o.confidence_floor;
    cfg["threshold"] = o.threshold;

    const auto pipe = train_pipeline(train, pre, cls, cfg);
    const auto train_eval = evaluate(predict_pipeline(pipe, train).labels, train.labels);
    const auto val_eval = evaluate(predict_pipeline(pipe, val).labels, val.labels);

    save_pipeline(pipe, fs::path(o.out));
    const fs::path metrics = o.metrics.empty() ? sidecar(o.out, ".metrics.json") : fs::path(o.metrics);
    const auto& st = pipe.preprocess;
    write_json(metrics, {{"run_config", cfg},
                         {"classifier", to_string(cls.kind)},
                         {"n_train", train.rows.size()},
                         {"n_val", val.rows.size()},
                         {"train", eval_json(train_eval)},
                         {"val", eval_json(val_eval)},
                         {"features",
                          {{"input", st.input_columns()},
                           {"dropped_constant", st.dropped_constant.size()},
                           {"dropped_duplicate", st.dropped_duplicate.size()},
                           {"dropped_correlated", st.dropped_correlated.size()},
                           {"kept", st.kept.size()}}},
                         {"warnings", st.warnings}});
    out << "trained " << to_string(cls.kind) << " on " << train.rows.size() << " span(s); val F1 " << val_eval.f1
        << "\n";
    return kExitOk;
}

struct Inference {
    std::vector<fs::path> paths;
    std::vector<ActivationTrace> traces;
    std::vector<ResponseVerdict> verdicts;
    json config;
};

Inference infer(const Options& o, const std::string& sub) {
    Inference inf;
    inf.paths = collect(o.traces, kTraceExt, "trace");
    if (o.pipeline.empty()) throw UsageError("MISSING_PIPELINE", "--pipeline is required");
    inf.traces = load_traces(inf.paths);
    const auto head = load_head(o, inf.traces.front().meta.d_model);
    const auto pipe = load_pipeline(fs::path(o.pipeline));
    const auto preds = predict_spans(inf.traces, head, pipe, {score_options(o), o.jobs});
    inf.verdicts = aggregate_all(preds);
    inf.config = base_config(sub);
    inf.config["traces"] = paths_json(inf.paths);
    inf.config["head"] = fs::path(o.head).generic_string();
    inf.config["pipeline"] = fs::path(o.pipeline).generic_string();
    inf.config["aggregation"] = o.aggregation;
    return inf;
}

std::string verdict_lines(const std::vector<ResponseVerdict>& vs) {
    std::string text;
    for (const auto& v : vs) text += verdict_to_json(v).dump() + "\n";
    return text;
}

int cmd_predict(const Options& o, std::ostream& out) {
    if (o.out.empty()) throw UsageError("MISSING_OUT", "--out JSONL path is required");
    const auto inf = infer(o, "predict");
    write_text(o.out, verdict_lines(inf.verdicts));
    write_json(sidecar(o.out, ".run_config.json"), inf.config);
    out << "wrote " << inf.verdicts.size() << " verdict(s)\n";
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    if (o.out.empty()) throw UsageError("MISSING_OUT", "--out metrics path is required");
    const auto source = parse_gold_source(o.gold);
    auto inf = infer(o, "evaluate");
    inf.config["gold"] = to_string(source);
    inf.config["confidence_floor"] = o.confidence_floor;

    std::vector<GoldLabel> gold;
    std::vector<int> span_pred, span_gold;
    std::map<std::string, const ActivationTrace*> by_id;
    for (const auto& t : inf.traces) by_id[t.meta.trace_id] = &t;
    for (const auto& t : inf.traces) {
        const auto g = gold_response_label(t.meta, source, o.confidence_floor);
        if (!g) throw InputError("MISSING_GOLD", "trace '" + t.meta.trace_id + "' has no response_label");
        gold.push_back({t.meta.trace_id, *g});
    }
    for (const auto& v : inf.verdicts) {
        const auto& m = by_id.at(v.trace_id)->meta;
        const auto labels = map_labels_to_spans(m.response_spans, m.span_labels, o.confidence_floor);
        for (const auto& p : v.spans) {
            span_pred.push_back(p.label);
            span_gold.push_back(labels.at(static_cast<std::size_t>(p.span_index)));
        }
    }
    const auto resp = evaluate_responses(inf.verdicts, gold);
    const auto span = evaluate(span_pred, span_gold);
    write_json(o.out, {{"run_config", inf.config},
                       {"n_traces", inf.verdicts.size()},
                       {"n_spans", span_pred.size()},
                       {"response", eval_json(resp)},
                       {"span", eval_json(span)}});
    if (!o.verdicts.empty()) {
        write_text(o.verdicts, verdict_lines(inf.verdicts));
        write_json(sidecar(o.verdicts, ".run_config.json"), inf.config);
    }
    out << "response F1 " << resp.f1 << ", span F1 " << span.f1 << "\n";
    return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    if (o.out.empty()) throw UsageError("MISSING_OUT", "--out directory is required");
    if (o.count < 1) throw UsageError("BAD_COUNT", "--count must be positive");
    if (o.kind != "planted" && o.kind != "random") throw UsageError("BAD_KIND", "--kind must be planted or random");
    const DType storage = parse_dtype(o.dtype);
    if (storage != DType::f16 && storage != DType::f32) throw UsageError("BAD_DTYPE", "--dtype must be f16 or f32");

    PlantedConfig pc;
    auto& sh = pc.shape;
    sh.n_layers = o.layers;
    sh.n_heads = o.heads;
    sh.d_model = o.d_model;
    sh.vocab_size = o.vocab;
    sh.n_resp_chunks = o.spans;
    sh.storage = storage;
    fs::create_directories(o.out);
    for (int i = 0; i < o.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "trace_%04d", i);
        const auto seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
        const auto tr = o.kind == "planted" ? make_planted_trace(pc, seed, name) : make_random_trace(sh, seed, name);
        save_trace(tr, fs::path(o.out) / (std::string(name) + kTraceExt));
    }
    const fs::path head_path = o.head.empty() ? fs::path(o.out) / "projection.head" : fs::path(o.head);
    if (head_path.has_parent_path()) fs::create_directories(head_path.parent_path());
    save_projection_head(make_random_head(o.d_model, o.vocab, NormKind::rms, derive_seed(o.seed, 1u << 31)), head_path);
    out << "wrote " << o.count << " " << o.kind << " trace(s) and " << head_path.generic_string() << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mechanistic hallucination detection for RAG traces"};
    app.name("mechdet");
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_config_extras(false);
    app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
    app.config_formatter(std::make_shared<SubcommandConfig>(&app));
    Options o;

    auto traces = [&](CLI::App* s, bool required = true) {
        auto* opt = s->add_option("--traces", o.traces, "trace files or directories of .mhtr files");
        if (required) opt->required();
    };
    auto jobs = [&](CLI::App* s) { s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber); };
    auto aggregation = [&](CLI::App* s) {
        s->add_option("--aggregation", o.aggregation, "token->chunk attention rule")
            ->check(CLI::IsMember({"mean", "max", "sum"}));
    };
    auto floor = [&](CLI::App* s) {
        s->add_option("--confidence-floor", o.confidence_floor, "ignore span labels below this confidence")
            ->check(CLI::Range(0.0, 1.0));
    };

    auto* validate = app.add_subcommand("validate", "check traces against the format invariants");
    traces(validate);
    validate->add_option("--out", o.out, "optional JSON report path");

    auto* score = app.add_subcommand("score", "compute ECS / PKS score files");
    traces(score);
    score->add_option("--head", o.head, "projection head file")->required();
    score->add_option("--out", o.out, "output directory")->required();
    jobs(score);
    aggregation(score);

    auto* analyze = app.add_subcommand("analyze", "per-feature correlation report");
    analyze->add_option("--scores", o.scores, "score files or directories of .mhsc files")->required();
    analyze->add_option("--out", o.out, "report path")->required();
    analyze->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    analyze->add_flag("--no-invert-ecs", o.no_invert_ecs, "correlate ECS against the raw labels");
    floor(analyze);

    auto* train = app.add_subcommand("train", "fit preprocessing + classifier on labeled score files");
    train->add_option("--scores", o.scores, "score files or directories of .mhsc files")->required();
    train->add_option("--out", o.out, "pipeline output path")->required();
    train->add_option("--metrics", o.metrics, "metrics JSON path (default <out>.metrics.json)");
    train->add_option("--seed", o.seed, "split / model seed");
    train->add_option("--classifier", o.classifier, "logistic, linear_svm, rbf_svm or forest")
        ->check(CLI::IsMember({"logistic", "linear_svm", "rbf_svm", "forest", "random_forest"}));
    train->add_option("--threshold", o.threshold, "|pearson| above which correlated features are merged");
    train->add_option("--train-fraction", o.train_fraction, "stratified train share")
        ->check(CLI::Range(0.0, 1.0));
    train->add_flag("--class-weighting", o.class_weighting, "balance the classes by sample weights");
    train->add_option("--l2", o.l2, "logistic L2 strength");
    train->add_option("--lambda", o.lambda, "linear SVM regularization");
    train->add_option("--epochs", o.epochs, "linear SVM epochs");
    train->add_option("--svm-c", o.svm_c, "RBF SVM box bound C");
    train->add_option("--gamma", o.gamma, "RBF width (<= 0: 1 / (n_features * Var X))");
    train->add_option("--n-trees", o.n_trees, "forest size");
    train->add_option("--max-depth", o.max_depth, "forest depth limit (0: unlimited)");
    floor(train);
    jobs(train);

    auto* predict = app.add_subcommand("predict", "span predictions and response verdicts as JSONL");
    auto* evaluate = app.add_subcommand("evaluate", "response- and span-level metrics against gold labels");
    for (auto* s : {predict, evaluate}) {
        traces(s);
        s->add_option("--head", o.head, "projection head file")->required();
        s->add_option("--pipeline", o.pipeline, "fitted pipeline file")->required();
        s->add_option("--out", o.out, s == predict ? "verdict JSONL path" : "metrics JSON path")->required();
        jobs(s);
        aggregation(s);
    }
    evaluate->add_option("--gold", o.gold, "response_label or span_or")
        ->check(CLI::IsMember({"response_label", "span_or"}));
    evaluate->add_option("--verdicts", o.verdicts, "also write the verdict JSONL here");
    floor(evaluate);

    auto* synth = app.add_subcommand("synth", "write synthetic traces and a projection head");
    synth->add_option("--out", o.out, "output directory")->required();
    synth->add_option("--head", o.head, "head path (default <out>/projection.head)");
    synth->add_option("--kind", o.kind, "planted or random")->check(CLI::IsMember({"planted", "random"}));
    synth->add_option("--count", o.count, "number of traces");
    synth->add_option("--seed", o.seed, "master seed");
    synth->add_option("--layers", o.layers)->check(CLI::PositiveNumber);
    synth->add_option("--heads", o.heads)->check(CLI::PositiveNumber);
    synth->add_option("--d-model", o.d_model)->check(CLI::PositiveNumber);
    synth->add_option("--vocab", o.vocab)->check(CLI::Range(2, 1 << 24));
    synth->add_option("--spans", o.spans, "response spans per trace")->check(CLI::PositiveNumber);
    synth->add_option("--dtype", o.dtype, "activation storage")->check(CLI::IsMember({"f16", "f32"}));


    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(o, out);
        if (score->parsed()) return cmd_score(o, out);
        if (analyze->parsed()) return cmd_analyze(o, out, err);
        if (train->parsed()) return cmd_train(o, out, err);
        if (predict->parsed()) return cmd_predict(o, out);
        if (evaluate->parsed()) return cmd_evaluate(o, out);
        if (synth->parsed()) return cmd_synth(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace mechdet::cli
