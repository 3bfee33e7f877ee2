// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit on any failure.
// Runtime budgets count toward the verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli_harness.hpp"
#include "mechdet/analysis.hpp"
#include "mechdet/classify.hpp"
#include "mechdet/detect.hpp"
#include "mechdet/features.hpp"
#include "mechdet/pipeline.hpp"
#include "mechdet/rng.hpp"
#include "mechdet/scores.hpp"
#include "mechdet/stats.hpp"
#include "mechdet/synth.hpp"
#include "mechdet/trace_format.hpp"
#include "mutations.hpp"
#include "test_util.hpp"

using namespace mechdet;

namespace {

// Collects failed expectations; the first few are echoed in the result line.
struct Check {
    std::size_t checks = 0;
    std::vector<std::string> failures;
    std::string note;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (!ok) failures.push_back(what);
    }
};

struct Criterion {
    const char* name;
    double budget_s;  // <= 0: no runtime budget
    std::function<void(Check&)> body;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double max_abs_pair_r(const Matrix& X) {
    double worst = 0.0;
    for (std::size_t a = 0; a < X.cols(); ++a) {
        const auto ca = X.column(a);
        for (std::size_t b = a + 1; b < X.cols(); ++b) worst = std::max(worst, std::abs(pearson(ca, X.column(b)).r));
    }
    return worst;
}

// ---------------------------------------------------------------------------

void jsd_suite(Check& c) {
    // mpmath, 30 digits: 0.5*(0.5 ln(2/3) + 0.5 ln 2) + 0.5*ln(4/3)
    constexpr double kOracle = 0.215761554338835695579;
    const std::vector<double> half{0.5, 0.5}, one{1.0, 0.0};
    c.expect(std::abs(jsd(half, one) - kOracle) <= 1e-9, "jsd([.5,.5],[1,0]) oracle");

    Rng rng(1);
    double worst_sym = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const std::size_t n = 1 + rng.index(64);
        const auto p = testutil::random_distribution(rng, n, k % 3 == 0 ? 0.4 : 0.0);
        const auto q = testutil::random_distribution(rng, n, k % 5 == 0 ? 0.4 : 0.0);
        const double a = jsd(p, q), b = jsd(q, p);
        worst_sym = std::max(worst_sym, std::abs(a - b));
        c.expect(a >= 0.0 && a <= std::numbers::ln2 + 1e-9, "range");
        c.expect(jsd(p, p) == 0.0, "jsd(p,p) == 0");
    }
    c.expect(worst_sym <= 1e-12, "symmetry");
    // disjoint supports reach the upper end
    c.expect(std::abs(jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) - std::numbers::ln2) <= 1e-12,
             "disjoint = ln 2");
    c.note = "max |jsd(p,q)-jsd(q,p)| = " + fmt(worst_sym);
}

void logit_lens_suite(Check& c) {
    const auto head = make_random_head(64, 1000, NormKind::rms, 3);
    Rng rng(4);
    std::vector<float> x(64);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double scale = std::pow(10.0, rng.uniform(-3, 4));
        for (auto& v : x) v = static_cast<float>(rng.normal(0, scale));
        const auto p = logit_lens(x, head);
        double s = 0.0;
        bool finite = p.size() == 1000;
        for (double v : p) {
            finite = finite && std::isfinite(v) && v >= 0.0;
            s += v;
        }
        c.expect(finite, "finite non-negative probabilities");
        worst = std::max(worst, std::abs(s - 1.0));
    }
    c.expect(worst <= 1e-6, "sum 1 +- 1e-6");

    const auto id = testutil::identity_head(2);
    const auto p = logit_lens(std::vector<float>{1000.0f, 0.0f}, id);
    c.expect(std::isfinite(p[0]) && std::isfinite(p[1]), "[1000, 0] finite");
    c.expect(p[0] == 1.0 && p[1] >= 0.0 && p[1] < 1e-300, "[1000, 0] -> [1, ~0]");
    c.note = "max |sum-1| = " + fmt(worst);
}

void aggregation_equivalence(Check& c) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SynthShape sh;
        sh.n_layers = 2 + static_cast<std::int64_t>(seed % 3);
        sh.n_heads = 1 + static_cast<std::int64_t>(seed % 2);
        sh.n_ctx_chunks = 1 + static_cast<std::int64_t>(seed % 4);
        sh.n_resp_chunks = 1 + static_cast<std::int64_t>(seed % 5);
        sh.max_tokens_per_chunk = 2 + static_cast<std::int64_t>(seed % 6);
        const auto head = make_random_head(sh.d_model, sh.vocab_size,
                                           seed % 2 ? NormKind::layernorm : NormKind::rms, 100 + seed);
        const auto tok = make_random_trace(sh, seed, "agg");
        const auto chk = pre_aggregate(tok);
        c.expect(validate_trace(chk).ok(), "pre-aggregated trace validates");
        const auto a = score_trace(tok, head);
        const auto b = score_trace(chk, head);
        c.expect(a.ecs.size() == b.ecs.size() && a.pks.size() == b.pks.size(), "shapes");
        for (std::size_t k = 0; k < std::min(a.ecs.size(), b.ecs.size()); ++k)
            worst = std::max(worst, std::abs(a.ecs[k] - b.ecs[k]));
        for (std::size_t k = 0; k < std::min(a.pks.size(), b.pks.size()); ++k)
            worst = std::max(worst, std::abs(a.pks[k] - b.pks[k]));
    }
    c.expect(worst <= 1e-6, "token vs chunk within 1e-6");
    c.note = "50 traces, max diff = " + fmt(worst);
}

void feature_count(Check& c) {
    c.expect(feature_schema(28, 16).size() == 476, "L=28 H=16 -> 476");
    c.expect(feature_schema(2, 2).size() == 6, "L=2 H=2 -> 6");
    c.note = "476 / 6";
}

void pipeline_postcondition(Check& c) {
    Rng rng(23);
    const std::size_t n = 200, C = 476, base = 326;
    Matrix X(n, C);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < base; ++k) X(r, k) = rng.normal();
    // 75 exact duplicates, 75 near-linear correlates (|r| ~ 0.99+)
    for (std::size_t k = 0; k < 75; ++k) {
        const std::size_t src = rng.index(base);
        for (std::size_t r = 0; r < n; ++r) X(r, base + k) = X(r, src);
    }
    for (std::size_t k = 0; k < 75; ++k) {
        const std::size_t src = rng.index(base);
        const double a = (k % 2 ? 1.0 : -1.0) * rng.uniform(0.5, 3.0);
        for (std::size_t r = 0; r < n; ++r) X(r, base + 75 + k) = a * X(r, src) + 0.05 * rng.normal();
    }
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) y[r] = (X(r, 0) + 0.5 * rng.normal()) > 0;

    const auto st = fit_pipeline(X, y);
    const auto Z = apply_pipeline(st, X);
    const double worst = max_abs_pair_r(Z);
    c.expect(worst <= 0.9 + 1e-9, "no surviving |r| > 0.9");
    c.expect(C - st.kept.size() >= 150, "duplicates and correlates dropped");
    c.expect(drop_duplicates(Z).kept() == Z.cols(), "no duplicate survives");
    c.note = std::to_string(st.kept.size()) + "/476 kept, max |r| = " + fmt(worst);
}

struct Data {
    Matrix X;
    std::vector<int> y;
};

Data noisy(std::uint64_t seed, std::size_t n, std::size_t d, double flip) {
    Rng rng(seed);
    Data D{Matrix(n, d), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += (D.X(i, k) = rng.normal()) * (k < 2 ? 1.0 : 0.0);
        D.y[i] = (s > 0) != (rng.uniform() < flip);
    }
    return D;
}

void optimizer_suite(Check& c) {
    Rng rng(2);
    double worst_log = 0.0, worst_svm = 0.0;

    // logistic: central differences, with and without sample weights
    const auto D = noisy(3, 60, 5, 0.2);
    const auto sw = balanced_sample_weights(D.y);
    for (int point = 0; point < 20; ++point) {
        std::vector<double> w(5);
        for (auto& v : w) v = rng.normal(0, 0.7);
        const double b = rng.normal();
        for (bool weighted : {false, true}) {
            const std::span<const double> s = weighted ? std::span<const double>(sw) : std::span<const double>{};
            std::vector<double> g(5);
            double gb = 0;
            logistic_gradient(D.X, D.y, w, b, 0.1, g, gb, s);
            const double h = 1e-5;
            for (std::size_t k = 0; k <= 5; ++k) {
                auto wp = w, wm = w;
                double bp = b, bm = b;
                if (k < 5) wp[k] += h, wm[k] -= h;
                else bp += h, bm -= h;
                const double fd =
                    (logistic_loss(D.X, D.y, wp, bp, 0.1, s) - logistic_loss(D.X, D.y, wm, bm, 0.1, s)) / (2 * h);
                const double an = k < 5 ? g[k] : gb;
                worst_log = std::max(worst_log, std::abs(fd - an) / std::max(1.0, std::abs(an)));
            }
        }
    }
    c.expect(worst_log < 1e-5, "logistic gradient rel-err < 1e-5");

    // linear SVM: subgradient equals the gradient away from hinge kinks
    const auto S = noisy(5, 40, 4, 0.2);
    int checked = 0;
    for (int point = 0; point < 200 && checked < 20; ++point) {
        std::vector<double> w(4);
        for (auto& v : w) v = rng.normal(0, 0.8);
        const double b = rng.normal(0, 0.5);
        bool near_kink = false;
        for (std::size_t i = 0; i < S.X.rows(); ++i) {
            double z = b;
            for (std::size_t k = 0; k < 4; ++k) z += w[k] * S.X(i, k);
            near_kink |= std::abs(1.0 - (S.y[i] ? 1.0 : -1.0) * z) < 1e-3;
        }
        if (near_kink) continue;
        ++checked;
        std::vector<double> g(4);
        double gb = 0;
        svm_subgradient(S.X, S.y, w, b, 0.05, g, gb);
        const double h = 1e-6;
        for (std::size_t k = 0; k <= 4; ++k) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (k < 4) wp[k] += h, wm[k] -= h;
            else bp += h, bm -= h;
            const double fd =
                (svm_objective(S.X, S.y, wp, bp, 0.05) - svm_objective(S.X, S.y, wm, bm, 0.05)) / (2 * h);
            const double an = k < 4 ? g[k] : gb;
            worst_svm = std::max(worst_svm, std::abs(fd - an) / std::max(1.0, std::abs(an)));
        }
    }
    c.expect(checked == 20, "20 kink-free SVM points");
    c.expect(worst_svm < 1e-5, "linear SVM gradient rel-err < 1e-5");

    // SMO termination state
    double worst_kkt = 0.0, worst_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto R = noisy(seed + 40, 200, 4, 0.2);
        SmoReport rep;
        const RbfSvmConfig cfg{.C = 2.0};
        const auto m = train_rbf_svm(R.X, R.y, cfg, &rep);
        c.expect(m.converged, "SMO converged");
        double sum = 0;
        for (std::size_t i = 0; i < rep.alpha.size(); ++i) {
            c.expect(rep.alpha[i] >= 0.0 && rep.alpha[i] <= rep.upper[i] + 1e-12, "0 <= alpha <= C");
            sum += rep.alpha[i] * (R.y[i] ? 1 : -1);
        }
        worst_sum = std::max(worst_sum, std::abs(sum));
        worst_kkt = std::max(worst_kkt, rep.max_violation);
    }
    c.expect(worst_sum <= 1e-6, "sum alpha y = 0 +- 1e-6");
    c.expect(worst_kkt < 1e-3, "KKT violation < 1e-3");

    // XOR
    Matrix X(4, 2, std::vector<double>{0, 0, 1, 1, 0, 1, 1, 0});
    const std::vector<int> y{0, 0, 1, 1};
    const auto xm = train_rbf_svm(X, y, {.C = 10, .gamma = 1});
    std::size_t ok = 0;
    for (std::size_t i = 0; i < 4; ++i) ok += (rbf_svm_decision(xm, X.row(i)) > 0) == (y[i] == 1);
    c.expect(ok == 4, "XOR accuracy 1.0");

    c.note = "grad rel-err logistic " + fmt(worst_log) + ", svm " + fmt(worst_svm) + "; KKT " + fmt(worst_kkt) +
             ", |sum ay| " + fmt(worst_sum) + "; XOR " + std::to_string(ok) + "/4";
}

FeatureMatrix subset(const FeatureMatrix& fm, const std::vector<std::size_t>& idx) {
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
}

void end_to_end(Check& c) {
    PlantedConfig cfg;  // J = 5 spans per trace
    const auto head = make_random_head(cfg.shape.d_model, cfg.shape.vocab_size, NormKind::rms, 2024);
    std::vector<ScoredTrace> scored;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto t = make_planted_trace(cfg, 1000 + s, "e2e" + std::to_string(s));
        scored.push_back(to_scored_trace(make_score_record(t, score_trace(t, head))));
    }
    const auto fm = assemble_features(scored);
    c.expect(fm.values.rows() == 500, "500 spans");
    c.expect(fm.fully_labeled(), "all spans labeled");

    const auto split = stratified_split(fm.labels, 0.9, 7);
    const auto train = subset(fm, split.train);
    const auto val = subset(fm, split.val);
    c.expect(val.values.rows() == 50, "10% validation");

    std::string f1s;
    for (auto kind : {ClassifierKind::logistic, ClassifierKind::rbf_svm}) {
        const auto p = train_pipeline(train, {}, {.kind = kind, .seed = 7});
        const auto pred = predict_pipeline(p, val);
        const auto ev = evaluate(pred.labels, val.labels);
        c.expect(ev.f1 >= 0.9, std::string(to_string(kind)) + " val F1 >= 0.90");
        f1s += std::string(to_string(kind)) + " F1 " + fmt(ev.f1) + ", ";
    }

    const auto rep = correlation_report(fm);
    std::size_t planted = 0;
    double min_r = 1.0;
    for (const auto& r : rep.records) {
        const bool signal = r.feature.kind == FeatureKind::ecs ||
                            (r.feature.kind == FeatureKind::pks && is_planted_layer(r.feature.layer, fm.n_layers));
        if (!signal) continue;
        ++planted;
        min_r = std::min(min_r, r.pearson_r);
        c.expect(!r.degenerate && r.pearson_r > 0.0, "r > 0 for " + r.feature.name());
    }
    c.note = f1s + "min planted r " + fmt(min_r) + " over " + std::to_string(planted) + " features";
}

void determinism(Check& c) {
    using testutil::mechdet_cli;
    using testutil::snapshot;
    testutil::TempDir d("acceptance_det");
    const auto traces = (d / "traces").string();
    const auto head = traces + "/projection.head";
    const auto scores = (d / "scores").string();
    const auto out = d / "out";

    // Runs `args` twice against a fresh output area; outputs include stdout,
    // stderr and every file written.
    std::set<std::string> covered;
    auto twice = [&](const std::string& sub, std::vector<std::string> args, const std::filesystem::path& area) {
        std::map<std::string, std::string> first;
        for (int run = 0; run < 2; ++run) {
            std::filesystem::remove_all(area);
            std::filesystem::create_directories(area);
            const auto r = mechdet_cli(args);
            auto files = snapshot(area);
            files["<code>"] = std::to_string(r.code);
            files["<stdout>"] = r.out;
            files["<stderr>"] = r.err;
            if (run == 0) {
                c.expect(r.code == 0, sub + " exits 0");
                first = std::move(files);
            } else {
                c.expect(files == first, sub + " byte-identical rerun");
            }
        }
        covered.insert(sub);
    };

    // synth into a scratch area, then keep one copy as the shared input
    twice("synth", {"synth", "--out", (out / "t").string(), "--count", "30", "--seed", "5"}, out);
    c.expect(mechdet_cli({"synth", "--out", traces, "--count", "30", "--seed", "5"}).code == 0, "synth input");
    twice("validate", {"validate", "--traces", traces, "--out", (out / "report.json").string()}, out);
    twice("score", {"score", "--traces", traces, "--head", head, "--out", (out / "s").string()}, out);
    c.expect(mechdet_cli({"score", "--traces", traces, "--head", head, "--out", scores}).code == 0, "score input");
    twice("analyze", {"analyze", "--scores", scores, "--out", (out / "r.csv").string()}, out);
    twice("analyze json", {"analyze", "--scores", scores, "--out", (out / "r.json").string(), "--format", "json"}, out);
    for (const char* cls : {"logistic", "linear_svm", "rbf_svm", "forest"}) {
        twice(std::string("train ") + cls,
              {"train", "--scores", scores, "--out", (out / "m.mhpl").string(), "--classifier", cls, "--seed", "3"},
              out);
    }
    const auto pipe = (d / "m.mhpl").string();
    c.expect(mechdet_cli({"train", "--scores", scores, "--out", pipe, "--seed", "3"}).code == 0, "train input");
    twice("predict",
          {"predict", "--traces", traces, "--head", head, "--pipeline", pipe, "--out", (out / "v.jsonl").string()},
          out);
    twice("evaluate",
          {"evaluate", "--traces", traces, "--head", head, "--pipeline", pipe, "--out", (out / "e.json").string(),
           "--verdicts", (out / "v.jsonl").string()},
          out);
    c.note = std::to_string(covered.size()) + " invocations over synth/validate/score/analyze/train/predict/evaluate";
}

void performance(Check& c) {
    SynthShape sh{.n_layers = 28, .n_heads = 1, .d_model = 1024, .vocab_size = 32768, .d_emb = 8,
                  .n_ctx_chunks = 1, .n_resp_chunks = 32, .min_tokens_per_chunk = 8, .max_tokens_per_chunk = 8};
    const auto trace = make_random_trace(sh, 1, "perf");
    const auto head = make_random_head(1024, 32768, NormKind::rms, 1);
    const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    c.expect(trace.meta.token_to_span.size() == 256, "256 response tokens");

    const auto t0 = std::chrono::steady_clock::now();
    const auto r = parametric_knowledge_score(trace, head, {.jobs = jobs});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_range = r.chunk_pks.size() == 28 * 32;
    for (double v : r.chunk_pks) in_range = in_range && v >= 0.0 && v <= std::numbers::ln2;
    c.expect(in_range, "PKS in [0, ln 2]");
    c.expect(secs < 60.0, "PKS < 60 s");
    c.note = "PKS " + fmt(secs) + " s with jobs=" + std::to_string(jobs) + " (criterion is stated for 8 cores)";
}

void format_suite(Check& c) {
    // traces: encode -> decode -> encode is the identity on bytes
    std::vector<ActivationTrace> traces{testutil::minimal_trace(), testutil::labeled_fixture()};
    for (auto storage : {DType::f32, DType::f16})
        for (auto gran : {Granularity::token, Granularity::chunk})
            traces.push_back(make_random_trace({.n_layers = 3, .granularity = gran, .storage = storage}, 5, "rt"));
    PlantedConfig pc;
    traces.push_back(make_planted_trace(pc, 3, "planted"));
    for (const auto& t : traces) {
        const auto bytes = encode_trace(t);
        const auto back = decode_trace(bytes);
        c.expect(back == t, "trace round trip equal: " + t.meta.trace_id);
        c.expect(encode_trace(back) == bytes, "trace bytes identical: " + t.meta.trace_id);
    }

    // pipelines, one per classifier
    const auto head = make_random_head(pc.shape.d_model, pc.shape.vocab_size, NormKind::rms, 5);
    std::vector<ScoredTrace> scored;
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto t = make_planted_trace(pc, s, "f" + std::to_string(s));
        scored.push_back(to_scored_trace(make_score_record(t, score_trace(t, head))));
    }
    const auto fm = assemble_features(scored);
    std::size_t pipes = 0;
    for (auto kind : {ClassifierKind::logistic, ClassifierKind::linear_svm, ClassifierKind::rbf_svm,
                      ClassifierKind::random_forest}) {
        ClassifierConfig cc{.kind = kind, .seed = 4};
        cc.forest.n_trees = 15;
        const auto p = train_pipeline(fm, {}, cc);
        const auto bytes = encode_pipeline(p);
        const auto back = decode_pipeline(bytes);
        c.expect(back == p, std::string("pipeline round trip equal: ") + std::string(to_string(kind)));
        c.expect(encode_pipeline(back) == bytes, "pipeline bytes identical");
        c.expect(predict_pipeline(back, fm).scores == predict_pipeline(p, fm).scores, "identical scores after reload");
        ++pipes;
    }

    // each validation code: exactly one mutation raises it, and raises only it
    const auto ms = testutil::mutations();
    std::map<std::string, int> raised_by;
    c.expect(validate_trace(testutil::labeled_fixture()).ok(), "fixture clean");
    for (const auto& m : ms) {
        auto t = testutil::labeled_fixture();
        m.apply(t);
        const auto codes = validate_trace(t).codes();
        c.expect(codes == std::vector<std::string>{std::string(m.code)}, "mutation " + std::string(m.code));
        for (const auto& code : codes) ++raised_by[code];
    }
    for (auto code : all_validation_codes())
        c.expect(raised_by[std::string(code)] == 1, "exactly one mutation for " + std::string(code));
    c.note = std::to_string(traces.size()) + " traces, " + std::to_string(pipes) + " pipelines, " +
             std::to_string(all_validation_codes().size()) + " validation codes";
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"JSD suite", 1.0, jsd_suite},
        {"Logit-lens suite", 1.0, logit_lens_suite},
        {"Aggregation equivalence", 10.0, aggregation_equivalence},
        {"Feature-count identity", 0.0, feature_count},
        {"Pipeline postcondition", 30.0, pipeline_postcondition},
        {"Optimizer suite", 30.0, optimizer_suite},
        {"End-to-end synthetic detection", 120.0, end_to_end},
        {"Determinism", 0.0, determinism},
        {"Performance budget", 60.0, performance},
        {"Format suite", 0.0, format_suite},
    };

    int failed = 0;
    for (const auto& cr : criteria) {
        Check c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.body(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (cr.budget_s > 0 && secs >= cr.budget_s)
            c.failures.push_back("runtime " + fmt(secs) + " s over the " + fmt(cr.budget_s) + " s budget");
        const bool ok = c.failures.empty();
        failed += !ok;

        std::string line = std::string(ok ? "[PASS] " : "[FAIL] ") + cr.name + " (" + fmt(secs) + " s) " + c.note;
        if (!ok) {
            line += " | failed " + std::to_string(c.failures.size()) + ":";
            for (std::size_t k = 0; k < std::min<std::size_t>(c.failures.size(), 5); ++k) line += " " + c.failures[k] + ";";
        }
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
