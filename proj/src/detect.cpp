#include "mechdet/detect.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include "mechdet/container.hpp"
#include "mechdet/error.hpp"

namespace mechdet {

using nlohmann::json;

std::vector<int> map_labels_to_spans(std::span<const Span> spans, std::span<const SpanLabel> labels,
                                     double confidence_floor) {
    std::vector<int> out(spans.size(), 0);
    for (std::size_t j = 0; j < spans.size(); ++j) {
        for (const auto& l : labels) {
            if (l.confidence >= confidence_floor && overlaps(spans[j], l.span)) {
                out[j] = 1;
                break;
            }
        }
    }
    return out;
}

// ---- score files ----------------------------------------------------------------

ScoreRecord make_score_record(const ActivationTrace& trace, ScoreTensor scores) {
    return {trace.meta.trace_id,    trace.meta.model_name,     std::move(scores),
            trace.meta.response_spans, trace.meta.span_labels, trace.meta.response_label};
}

std::vector<std::byte> encode_scores(const ScoreRecord& r, const json& extra) {
    const auto& s = r.scores;
    Container c;
    std::copy(kScoreMagic.begin(), kScoreMagic.end(), c.magic.begin());
    json spans = json::array();
    for (const auto& sp : r.response_spans) spans.push_back({sp.start, sp.end});
    json labels = json::array();
    for (const auto& l : r.span_labels) {
        labels.push_back({{"start", l.span.start},
                          {"end", l.span.end},
                          {"confidence", l.confidence},
                          {"source", l.source == LabelSource::dataset ? "dataset" : "predicted"}});
    }
    c.meta = {{"kind", "scores"},
              {"trace_id", r.trace_id},
              {"model_name", r.model_name},
              {"n_layers", s.n_layers},
              {"n_heads", s.n_heads},
              {"n_chunks", s.n_chunks},
              {"response_spans", spans},
              {"span_labels", labels},
              {"response_label", r.response_label ? json(*r.response_label) : json(nullptr)},
              {"run_config", extra}};
    c.tensors.push_back(pack_doubles("ecs", {s.n_layers, s.n_heads, s.n_chunks}, s.ecs));
    c.tensors.push_back(pack_doubles("pks", {s.n_layers, s.n_chunks}, s.pks));
    const std::vector<std::int64_t> empty(s.empty_chunk.begin(), s.empty_chunk.end());
    c.tensors.push_back(pack_ints("empty_chunk", {s.n_chunks}, empty));
    return encode_container(c);
}

ScoreRecord decode_scores(std::span<const std::byte> data) {
    const Container c = decode_container(data, kScoreMagic);
    ScoreRecord r;
    try {
        const auto& m = c.meta;
        if (m.value("kind", "") != "scores") throw FormatError("BAD_HEADER", "container is not a score file");
        r.trace_id = m.at("trace_id").get<std::string>();
        r.model_name = m.at("model_name").get<std::string>();
        auto& s = r.scores;
        s.n_layers = m.at("n_layers").get<std::int64_t>();
        s.n_heads = m.at("n_heads").get<std::int64_t>();
        s.n_chunks = m.at("n_chunks").get<std::int64_t>();
        for (const auto& sp : m.at("response_spans")) {
            r.response_spans.push_back({sp.at(0).get<std::int64_t>(), sp.at(1).get<std::int64_t>()});
        }
        for (const auto& l : m.at("span_labels")) {
            r.span_labels.push_back({{l.at("start").get<std::int64_t>(), l.at("end").get<std::int64_t>()},
                                     l.at("confidence").get<double>(),
                                     l.value("source", "dataset") == "predicted" ? LabelSource::predicted
                                                                                 : LabelSource::dataset});
        }
        if (!m.at("response_label").is_null()) r.response_label = m.at("response_label").get<int>();

        const auto* ecs = c.find("ecs");
        const auto* pks = c.find("pks");
        const auto* empty = c.find("empty_chunk");
        if (!ecs || !pks || !empty) throw FormatError("MISSING_TENSOR", "score file lacks ecs / pks / empty_chunk");
        if (ecs->shape != std::vector<std::int64_t>{s.n_layers, s.n_heads, s.n_chunks} ||
            pks->shape != std::vector<std::int64_t>{s.n_layers, s.n_chunks} ||
            empty->shape != std::vector<std::int64_t>{s.n_chunks} ||
            r.response_spans.size() != static_cast<std::size_t>(s.n_chunks)) {
            throw FormatError("BAD_HEADER", "score tensors disagree with the declared dimensions");
        }
        s.ecs = unpack_doubles(*ecs);
        s.pks = unpack_doubles(*pks);
        for (auto v : unpack_ints(*empty)) s.empty_chunk.push_back(static_cast<std::uint8_t>(v != 0));
    } catch (const json::exception& e) {
        throw FormatError("BAD_HEADER", std::string("malformed score header: ") + e.what());
    }
    return r;
}

void save_scores(const ScoreRecord& r, const std::filesystem::path& path, const json& extra) {
    write_file(path, encode_scores(r, extra));
}

ScoreRecord load_scores(const std::filesystem::path& path) { return decode_scores(read_file(path)); }

bool has_labels(const ScoreRecord& r) { return !r.span_labels.empty() || r.response_label.has_value(); }

ScoredTrace to_scored_trace(const ScoreRecord& r, double confidence_floor) {
    if (!has_labels(r)) return to_unlabeled_trace(r);
    return {r.trace_id, r.scores, map_labels_to_spans(r.response_spans, r.span_labels, confidence_floor)};
}

ScoredTrace to_unlabeled_trace(const ScoreRecord& r) {
    return {r.trace_id, r.scores, std::vector<int>(static_cast<std::size_t>(r.scores.n_chunks), kUnlabeled)};
}

// ---- inference -------------------------------------------------------------------

std::vector<ScoreTensor> score_traces(std::span<const ActivationTrace> traces, const ProjectionHead& head,
                                      const DetectOptions& options) {
    std::vector<ScoreTensor> out(traces.size());
    const unsigned jobs = std::max(1u, options.jobs);
    if (traces.size() <= 1 || jobs == 1) {
        // a lone trace gets the whole pool for its projection work
        auto opts = options.scoring;
        if (traces.size() == 1) opts.jobs = std::max(opts.jobs, jobs);
        for (std::size_t i = 0; i < traces.size(); ++i) out[i] = score_trace(traces[i], head, opts);
        return out;
    }
    auto opts = options.scoring;
    opts.jobs = 1;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(traces.size());
    {
        std::vector<std::jthread> pool;
        const auto n_workers = std::min<std::size_t>(jobs, traces.size());
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < traces.size(); i = next++) {
                    try {
                        out[i] = score_trace(traces[i], head, opts);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);  // first failing trace in input order
    }
    return out;
}

std::vector<SpanPrediction> predict_scored(std::span<const ScoredTrace> traces, const FittedPipeline& pipeline) {
    if (traces.empty()) return {};
    const FeatureMatrix fm = assemble_features(traces);
    const Predictions pred = predict_pipeline(pipeline, fm);
    std::vector<SpanPrediction> out(fm.rows.size());
    for (std::size_t r = 0; r < fm.rows.size(); ++r) {
        out[r] = {fm.rows[r].trace_id, fm.rows[r].span_index, pred.labels[r], pred.scores[r]};
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SpanPrediction& a, const SpanPrediction& b) { return a.trace_id < b.trace_id; });
    return out;
}

std::vector<SpanPrediction> predict_spans(std::span<const ActivationTrace> traces, const ProjectionHead& head,
                                          const FittedPipeline& pipeline, const DetectOptions& options) {
    for (const auto& t : traces) {
        if (t.meta.n_layers != pipeline.n_layers || t.meta.n_heads != pipeline.n_heads) {
            throw InputError("SCHEMA_MISMATCH", "trace '" + t.meta.trace_id + "' has L=" +
                                                    std::to_string(t.meta.n_layers) + ", H=" +
                                                    std::to_string(t.meta.n_heads) + "; pipeline expects L=" +
                                                    std::to_string(pipeline.n_layers) + ", H=" +
                                                    std::to_string(pipeline.n_heads));
        }
    }
    auto scores = score_traces(traces, head, options);
    std::vector<ScoredTrace> scored;
    scored.reserve(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto J = traces[i].meta.n_response_chunks();
        scored.push_back({traces[i].meta.trace_id, std::move(scores[i]), std::vector<int>(J, kUnlabeled)});
    }
    return predict_scored(scored, pipeline);
}

ResponseVerdict aggregate_response(std::span<const SpanPrediction> preds) {
    if (preds.empty()) {
        throw InputError("EMPTY_INPUT", "a response verdict needs at least one span prediction");
    }
    ResponseVerdict v;
    v.trace_id = preds.front().trace_id;
    for (const auto& p : preds) {
        if (p.trace_id != v.trace_id) {
            throw InputError("MIXED_TRACES", "span predictions belong to more than one trace");
        }
        if (p.label == 1) v.contributing.push_back(p.span_index);
        v.spans.push_back(p);
    }
    std::sort(v.contributing.begin(), v.contributing.end());
    v.label = v.contributing.empty() ? 0 : 1;
    return v;
}

std::vector<ResponseVerdict> aggregate_all(std::span<const SpanPrediction> preds) {
    std::vector<ResponseVerdict> out;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= preds.size(); ++i) {
        if (i == preds.size() || preds[i].trace_id != preds[begin].trace_id) {
            out.push_back(aggregate_response(preds.subspan(begin, i - begin)));
            begin = i;
        }
    }
    return out;
}

std::optional<int> gold_response_label(const TraceMeta& meta, GoldSource source, double confidence_floor) {
    if (source == GoldSource::response_label) return meta.response_label;
    const auto spans = map_labels_to_spans(meta.response_spans, meta.span_labels, confidence_floor);
    return std::find(spans.begin(), spans.end(), 1) != spans.end() ? 1 : 0;
}

GoldSource parse_gold_source(std::string_view s) {
    if (s == "response_label") return GoldSource::response_label;
    if (s == "span_or") return GoldSource::span_or;
    throw InputError("BAD_GOLD_SOURCE", "gold source must be response_label or span_or");
}

std::string_view to_string(GoldSource s) { return s == GoldSource::response_label ? "response_label" : "span_or"; }

EvalResult evaluate_responses(std::span<const ResponseVerdict> verdicts, std::span<const GoldLabel> gold) {
    std::map<std::string, int> by_id;
    for (const auto& g : gold) {
        if (!by_id.emplace(g.trace_id, g.label).second) {
            throw InputError("ID_MISMATCH", "duplicate gold trace id '" + g.trace_id + "'");
        }
    }
    if (by_id.size() != verdicts.size()) {
        throw InputError("ID_MISMATCH", std::to_string(verdicts.size()) + " verdicts for " +
                                            std::to_string(by_id.size()) + " gold labels");
    }
    std::vector<int> pred, truth;
    for (const auto& v : verdicts) {
        auto it = by_id.find(v.trace_id);
        if (it == by_id.end()) {
            throw InputError("ID_MISMATCH", "no gold label for trace '" + v.trace_id + "'");
        }
        pred.push_back(v.label);
        truth.push_back(it->second);
        by_id.erase(it);  // a repeated verdict id then fails the lookup
    }
    return evaluate(pred, truth);
}

json verdict_to_json(const ResponseVerdict& v) {
    json spans = json::array();
    for (const auto& p : v.spans) {
        spans.push_back({{"span_index", p.span_index}, {"label", p.label}, {"score", p.score}});
    }
    return {{"trace_id", v.trace_id}, {"label", v.label}, {"contributing", v.contributing}, {"spans", spans}};
}

}  // namespace mechdet
