#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mechdet/classify.hpp"
#include "mechdet/features.hpp"
#include "mechdet/pipeline.hpp"
#include "mechdet/scores.hpp"
#include "mechdet/trace_format.hpp"

namespace mechdet {

// 1 for each span that overlaps (half-open) a label with confidence >= floor.
std::vector<int> map_labels_to_spans(std::span<const Span> spans, std::span<const SpanLabel> labels,
                                     double confidence_floor = 0.0);

// ---- score files ----------------------------------------------------------------

inline constexpr std::string_view kScoreMagic = "MHSC";

// A scored trace with everything needed to label it later; written by
// `mechdet score`, read by analyze / train.
struct ScoreRecord {
    std::string trace_id;
    std::string model_name;
    ScoreTensor scores;
    std::vector<Span> response_spans;
    std::vector<SpanLabel> span_labels;
    std::optional<int> response_label;

    friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

ScoreRecord make_score_record(const ActivationTrace& trace, ScoreTensor scores);
// `extra` is stored under meta.run_config.
std::vector<std::byte> encode_scores(const ScoreRecord& r, const nlohmann::json& extra = nlohmann::json::object());
ScoreRecord decode_scores(std::span<const std::byte> data);
void save_scores(const ScoreRecord& r, const std::filesystem::path& path,
                 const nlohmann::json& extra = nlohmann::json::object());
ScoreRecord load_scores(const std::filesystem::path& path);

// A record with neither span labels nor a response label is unlabeled.
bool has_labels(const ScoreRecord& r);
// Span labels via map_labels_to_spans; kUnlabeled rows when !has_labels(r).
ScoredTrace to_scored_trace(const ScoreRecord& r, double confidence_floor = 0.0);
ScoredTrace to_unlabeled_trace(const ScoreRecord& r);

// ---- inference -------------------------------------------------------------------

struct SpanPrediction {
    std::string trace_id;
    std::int64_t span_index = 0;
    int label = 0;
    double score = 0.0;

    friend bool operator==(const SpanPrediction&, const SpanPrediction&) = default;
};

struct ResponseVerdict {
    std::string trace_id;
    int label = 0;
    std::vector<std::int64_t> contributing;  // span indices predicted 1, ascending
    std::vector<SpanPrediction> spans;

    friend bool operator==(const ResponseVerdict&, const ResponseVerdict&) = default;
};

struct DetectOptions {
    ScoreOptions scoring;
    unsigned jobs = 1;  // traces scored in parallel
};

// Scores every trace in parallel; `scores[i]` belongs to `traces[i]`.
std::vector<ScoreTensor> score_traces(std::span<const ActivationTrace> traces, const ProjectionHead& head,
                                      const DetectOptions& options = {});

// score -> assemble -> preprocess -> classify, one prediction per response
// span. Output is sorted by trace id (stable), spans ascending. Only the
// activations and spans feed the scores; no provenance metadata is read.
std::vector<SpanPrediction> predict_spans(std::span<const ActivationTrace> traces, const ProjectionHead& head,
                                          const FittedPipeline& pipeline, const DetectOptions& options = {});
std::vector<SpanPrediction> predict_scored(std::span<const ScoredTrace> traces, const FittedPipeline& pipeline);

// OR rule over the spans of one trace. Throws on empty input or mixed ids.
ResponseVerdict aggregate_response(std::span<const SpanPrediction> preds);
// Groups consecutive runs of equal trace id (predict_spans output order).
std::vector<ResponseVerdict> aggregate_all(std::span<const SpanPrediction> preds);

struct GoldLabel {
    std::string trace_id;
    int label = 0;
};

enum class GoldSource { response_label, span_or };

// response_label: the stored response label (nullopt when absent);
// span_or: OR over map_labels_to_spans at the given floor.
std::optional<int> gold_response_label(const TraceMeta& meta, GoldSource source, double confidence_floor = 0.0);
GoldSource parse_gold_source(std::string_view s);
std::string_view to_string(GoldSource s);

// Throws InputError ID_MISMATCH unless the verdict and gold id sets match.
EvalResult evaluate_responses(std::span<const ResponseVerdict> verdicts, std::span<const GoldLabel> gold);

nlohmann::json verdict_to_json(const ResponseVerdict& v);

}  // namespace mechdet
