#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mechdet/container.hpp"

namespace mechdet {

inline constexpr std::string_view kTraceMagic = "MHTR";

// Half-open character range [start, end) over a prompt or response text.
// Offsets count Unicode code points, not bytes.
struct Span {
    std::int64_t start = 0;
    std::int64_t end = 0;

    friend bool operator==(const Span&, const Span&) = default;
};

// Non-empty intersection; an empty span overlaps nothing.
inline bool overlaps(const Span& a, const Span& b) { return std::max(a.start, b.start) < std::min(a.end, b.end); }

enum class LabelSource { dataset, predicted };

struct SpanLabel {
    Span span;
    double confidence = 1.0;
    LabelSource source = LabelSource::dataset;

    friend bool operator==(const SpanLabel&, const SpanLabel&) = default;
};

enum class Granularity { token, chunk };

struct TraceMeta {
    std::string trace_id;
    std::string model_name;
    std::int64_t n_layers = 0;
    std::int64_t n_heads = 0;
    std::int64_t d_model = 0;
    std::int64_t vocab_size = 0;
    std::string prompt_text;
    std::string response_text;
    std::vector<Span> prompt_spans;    // context chunks, M of them
    std::vector<Span> response_spans;  // response chunks, J of them
    std::vector<SpanLabel> span_labels;
    std::optional<int> response_label;
    std::vector<std::int64_t> token_to_span;      // response token -> index into response_spans
    std::vector<std::int64_t> ctx_token_to_span;  // context token -> index into prompt_spans (token granularity)
    Granularity attention_granularity = Granularity::token;
    std::string encoder_name;

    std::size_t n_context_chunks() const { return prompt_spans.size(); }
    std::size_t n_response_chunks() const { return response_spans.size(); }
    std::size_t n_response_tokens() const { return token_to_span.size(); }

    friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

// In-memory tensors are always f32; `storage` remembers the on-disk dtype so
// a write after read reproduces the original bytes.
struct FloatTensor {
    std::vector<std::int64_t> shape;
    std::vector<float> values;
    DType storage = DType::f32;

    bool empty() const { return shape.empty(); }
    std::int64_t dim(std::size_t i) const { return i < shape.size() ? shape[i] : 0; }

    friend bool operator==(const FloatTensor&, const FloatTensor&) = default;
};

// One (prompt, response) example with its captured activations.
//   attention: token granularity [L][H][n_resp_tokens][n_ctx_tokens],
//              chunk granularity [L][H][J][M]
//   x_mid, x_post: [L][n_resp_tokens][d_model] (residual before / after the FFN)
//   ctx_emb [M][d_emb], resp_emb [J][d_emb]
struct ActivationTrace {
    TraceMeta meta;
    FloatTensor attention;
    FloatTensor x_mid;
    FloatTensor x_post;
    FloatTensor ctx_emb;
    FloatTensor resp_emb;

    friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

namespace codes {
inline constexpr std::string_view kMetaDims = "META_DIMS";
inline constexpr std::string_view kSpanListEmpty = "SPAN_LIST_EMPTY";
inline constexpr std::string_view kSpanBounds = "SPAN_BOUNDS";
inline constexpr std::string_view kSpanOrder = "SPAN_ORDER";
inline constexpr std::string_view kSpanTextRange = "SPAN_TEXT_RANGE";
inline constexpr std::string_view kLabelConfidence = "LABEL_CONFIDENCE";
inline constexpr std::string_view kResponseLabelMismatch = "RESPONSE_LABEL_MISMATCH";
inline constexpr std::string_view kTensorMissing = "TENSOR_MISSING";
inline constexpr std::string_view kTokenMapSize = "TOKEN_MAP_SIZE";
inline constexpr std::string_view kSpanIndexRange = "SPAN_INDEX_RANGE";
inline constexpr std::string_view kAttnShape = "ATTN_SHAPE";
inline constexpr std::string_view kAttnNonFinite = "ATTN_NONFINITE";
inline constexpr std::string_view kAttnNegative = "ATTN_NEGATIVE";
inline constexpr std::string_view kAttnRowSum = "ATTN_ROW_SUM";
inline constexpr std::string_view kResidShape = "RESID_SHAPE";
inline constexpr std::string_view kResidNonFinite = "RESID_NONFINITE";
inline constexpr std::string_view kEmbShape = "EMB_SHAPE";
inline constexpr std::string_view kEmbNonFinite = "EMB_NONFINITE";
inline constexpr std::string_view kEmbZero = "EMB_ZERO";
}  // namespace codes

// All invariant codes validate_trace can emit.
std::span<const std::string_view> all_validation_codes();

struct ValidationIssue {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    bool has(std::string_view code) const;
    std::vector<std::string> codes() const;  // sorted, unique
    std::string summary() const;
};

inline constexpr double kAttentionRowSumTolerance = 1e-3;

ValidationReport validate_trace(const ActivationTrace& trace);

// Refuses invalid traces (ValidationError) before touching the sink.
void write_trace(const ActivationTrace& trace, std::ostream& out);
std::vector<std::byte> encode_trace(const ActivationTrace& trace);

// Structural problems throw FormatError. With `validate`, invariant
// violations throw ValidationError listing every code.
ActivationTrace read_trace(std::istream& in, bool validate = true);
ActivationTrace decode_trace(std::span<const std::byte> data, bool validate = true);

void save_trace(const ActivationTrace& trace, const std::filesystem::path& path);
ActivationTrace load_trace(const std::filesystem::path& path, bool validate = true);

nlohmann::json meta_to_json(const TraceMeta& meta);
TraceMeta meta_from_json(const nlohmann::json& j);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);
// Code-point substring [start, end).
std::string utf8_slice(std::string_view s, std::int64_t start, std::int64_t end);

enum class NormKind { rms, layernorm, none };

std::string_view to_string(NormKind k);
NormKind parse_norm_kind(std::string_view s);

// Final normalization + unembedding used for logit-lens projection.
struct ProjectionHead {
    NormKind norm_kind = NormKind::rms;
    double norm_eps = 1e-6;
    std::int64_t d_model = 0;
    std::int64_t vocab_size = 0;
    std::vector<float> norm_weight;  // [d_model], empty for NormKind::none
    std::vector<float> norm_bias;    // [d_model] or empty
    std::vector<float> unembed;      // [vocab_size][d_model], row-major
    DType storage = DType::f32;

    std::span<const float> row(std::size_t v) const {
        return {unembed.data() + v * static_cast<std::size_t>(d_model), static_cast<std::size_t>(d_model)};
    }

    friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;
};

// Throws ValidationError("HEAD_INVALID") on non-finite entries, V < 2, or
// inconsistent parameter sizes.
void validate_projection_head(const ProjectionHead& head);

void write_projection_head(const ProjectionHead& head, std::ostream& out);
// expected_d_model < 0 skips the dimension check.
ProjectionHead load_projection_head(std::istream& in, std::int64_t expected_d_model = -1);
void save_projection_head(const ProjectionHead& head, const std::filesystem::path& path);
ProjectionHead load_projection_head(const std::filesystem::path& path, std::int64_t expected_d_model = -1);

}  // namespace mechdet
