#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mechdet/trace_format.hpp"

namespace mechdet {

// How token-level attention collapses to a (response chunk, context chunk) cell.
enum class AggregationRule { mean, max, sum };

std::string_view to_string(AggregationRule r);
AggregationRule parse_aggregation(std::string_view s);

struct ChunkAttention {
    std::int64_t n_layers = 0;
    std::int64_t n_heads = 0;
    std::int64_t n_resp_chunks = 0;  // J
    std::int64_t n_ctx_chunks = 0;   // M
    std::vector<float> values;       // [L][H][J][M]

    std::span<const float> row(std::int64_t l, std::int64_t h, std::int64_t j) const {
        const auto M = static_cast<std::size_t>(n_ctx_chunks);
        const auto off = ((static_cast<std::size_t>(l) * n_heads + h) * n_resp_chunks + j) * M;
        return {values.data() + off, M};
    }
};

// Chunk-granularity traces pass through unchanged; token-granularity traces
// are reduced over (response token in span j) x (context token in span i).
// Accumulation is in double, rounded to f32 once per cell.
ChunkAttention aggregate_attention(const ActivationTrace& trace, AggregationRule rule = AggregationRule::mean);

// Argmax with ties going to the lowest index.
std::size_t argmax_lowest(std::span<const float> row);
std::size_t select_context_chunk(const ChunkAttention& attn, std::int64_t l, std::int64_t h, std::int64_t j);

// Cosine similarity; 0 when either vector is all zeros.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Softmax(unembed . normalize(state)) in double precision.
std::vector<double> logit_lens(std::span<const float> state, const ProjectionHead& head);
// Same map with the state, normalization and logits kept in double; the f32
// path rounds the normalized state and the logits to float.
std::vector<double> logit_lens(std::span<const double> state, const ProjectionHead& head);

// Natural-log Jensen-Shannon divergence, result in [0, ln 2].
double jsd(std::span<const double> p, std::span<const double> q);

struct ScoreOptions {
    AggregationRule aggregation = AggregationRule::mean;
    unsigned jobs = 1;
    std::size_t token_block = 32;  // tokens projected per kernel call
};

// ecs[L][H][J]
std::vector<double> external_context_score(const ActivationTrace& trace,
                                           AggregationRule rule = AggregationRule::mean);

struct PksResult {
    std::int64_t n_layers = 0;
    std::int64_t n_tokens = 0;
    std::int64_t n_chunks = 0;
    std::vector<double> token_pks;       // [L][T]
    std::vector<double> chunk_pks;       // [L][J]
    std::vector<std::uint8_t> empty_chunk;  // [J], 1 where no token maps to the chunk (PKS set to 0)
};

PksResult parametric_knowledge_score(const ActivationTrace& trace, const ProjectionHead& head,
                                     const ScoreOptions& options = {});

struct ScoreTensor {
    std::int64_t n_layers = 0;
    std::int64_t n_heads = 0;
    std::int64_t n_chunks = 0;
    std::vector<double> ecs;  // [L][H][J], in [-1, 1]
    std::vector<double> pks;  // [L][J], in [0, ln 2]
    std::vector<std::uint8_t> empty_chunk;

    double ecs_at(std::int64_t l, std::int64_t h, std::int64_t j) const {
        return ecs[(static_cast<std::size_t>(l) * n_heads + h) * n_chunks + j];
    }
    double pks_at(std::int64_t l, std::int64_t j) const { return pks[static_cast<std::size_t>(l) * n_chunks + j]; }

    friend bool operator==(const ScoreTensor&, const ScoreTensor&) = default;
};

ScoreTensor score_trace(const ActivationTrace& trace, const ProjectionHead& head, const ScoreOptions& options = {});

}  // namespace mechdet
