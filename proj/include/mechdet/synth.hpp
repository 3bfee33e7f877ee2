#pragma once

// Seeded generators for valid traces, projection heads, and planted-signal
// datasets. Used by the tests, the acceptance suite, and `mechdet synth`.

#include <cstdint>
#include <vector>

#include "mechdet/container.hpp"
#include "mechdet/scores.hpp"
#include "mechdet/trace_format.hpp"

namespace mechdet {

struct SynthShape {
    std::int64_t n_layers = 2;
    std::int64_t n_heads = 2;
    std::int64_t d_model = 16;
    std::int64_t vocab_size = 64;
    std::int64_t d_emb = 8;
    std::int64_t n_ctx_chunks = 3;   // M
    std::int64_t n_resp_chunks = 3;  // J
    std::int64_t min_tokens_per_chunk = 1;
    std::int64_t max_tokens_per_chunk = 4;
    Granularity granularity = Granularity::token;
    DType storage = DType::f32;
};

// Random but valid trace: attention rows are slices of a softmax over a
// longer sequence, residuals Gaussian, embeddings non-zero. Span labels and
// response_label are left empty.
ActivationTrace make_random_trace(const SynthShape& shape, std::uint64_t seed, std::string trace_id = "synth");

// Gaussian unembedding scaled by gain / sqrt(d), norm weights near 1.
ProjectionHead make_random_head(std::int64_t d_model, std::int64_t vocab_size, NormKind kind, std::uint64_t seed,
                                double gain = 3.0);

// Replaces token attention by its chunk aggregate; scores are unchanged.
ActivationTrace pre_aggregate(const ActivationTrace& trace, AggregationRule rule = AggregationRule::mean);

struct PlantedConfig {
    SynthShape shape{.n_layers = 4, .n_heads = 2, .d_model = 16, .vocab_size = 64, .d_emb = 16,
                     .n_ctx_chunks = 4, .n_resp_chunks = 5, .min_tokens_per_chunk = 2, .max_tokens_per_chunk = 3};
    double hallucination_rate = 0.45;
    double noise = 0.25;            // Gaussian noise on the planted magnitudes
    double pks_shift_truthful = 0.15;
    double pks_shift_hallucinated = 0.9;
    double ecs_align_truthful = 0.9;
    double ecs_align_hallucinated = 0.2;
};

// Hallucinated spans get a larger pre/post-FFN shift in the upper half of
// the layers (elevated late-layer PKS) and a response embedding less aligned
// with the context chunk those layers attend to (depressed ECS). Labels are
// written as span_labels plus a consistent response_label.
ActivationTrace make_planted_trace(const PlantedConfig& cfg, std::uint64_t seed, std::string trace_id);

// Late layers carry the planted signal: l >= L / 2.
inline bool is_planted_layer(std::int64_t layer, std::int64_t n_layers) { return layer >= n_layers / 2; }

}  // namespace mechdet
