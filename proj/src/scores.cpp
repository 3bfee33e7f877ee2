#include "mechdet/scores.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "mechdet/error.hpp"
#include "mechdet/projection.hpp"

namespace mechdet {

std::string_view to_string(AggregationRule r) {
    switch (r) {
        case AggregationRule::mean: return "mean";
        case AggregationRule::max: return "max";
        case AggregationRule::sum: return "sum";
    }
    return "?";
}

AggregationRule parse_aggregation(std::string_view s) {
    if (s == "mean") return AggregationRule::mean;
    if (s == "max") return AggregationRule::max;
    if (s == "sum") return AggregationRule::sum;
    throw InputError("BAD_AGGREGATION", "unknown aggregation rule '" + std::string(s) + "'");
}

ChunkAttention aggregate_attention(const ActivationTrace& trace, AggregationRule rule) {
    const auto& m = trace.meta;
    ChunkAttention out;
    out.n_layers = m.n_layers;
    out.n_heads = m.n_heads;
    out.n_resp_chunks = static_cast<std::int64_t>(m.n_response_chunks());
    out.n_ctx_chunks = static_cast<std::int64_t>(m.n_context_chunks());
    const auto J = static_cast<std::size_t>(out.n_resp_chunks);
    const auto M = static_cast<std::size_t>(out.n_ctx_chunks);
    const auto LH = static_cast<std::size_t>(m.n_layers * m.n_heads);

    if (m.attention_granularity == Granularity::chunk) {
        if (trace.attention.values.size() != LH * J * M) {
            throw InputError("ATTN_SHAPE", "chunk attention does not match [L][H][J][M]");
        }
        out.values = trace.attention.values;
        return out;
    }

    const auto rows = trace.attention.dim(2);
    const auto cols = trace.attention.dim(3);
    if (static_cast<std::size_t>(rows) != m.token_to_span.size() ||
        static_cast<std::size_t>(cols) != m.ctx_token_to_span.size() ||
        trace.attention.values.size() != LH * rows * cols) {
        throw InputError("ATTN_SHAPE", "token attention does not match the token maps");
    }
    for (auto s : m.token_to_span) {
        if (s < 0 || static_cast<std::size_t>(s) >= J) throw InputError("SPAN_INDEX_RANGE", "response token outside every span");
    }
    for (auto s : m.ctx_token_to_span) {
        if (s < 0 || static_cast<std::size_t>(s) >= M) throw InputError("SPAN_INDEX_RANGE", "context token outside every span");
    }

    std::vector<double> count(J * M, 0.0);
    for (auto j : m.token_to_span)
        for (auto i : m.ctx_token_to_span) count[j * M + i] += 1.0;

    out.values.assign(LH * J * M, 0.0f);
    std::vector<double> acc(J * M);
    for (std::size_t lh = 0; lh < LH; ++lh) {
        const float* a = trace.attention.values.data() + lh * rows * cols;
        std::fill(acc.begin(), acc.end(), rule == AggregationRule::max ? -1.0 : 0.0);
        for (std::int64_t r = 0; r < rows; ++r) {
            double* cell_row = acc.data() + m.token_to_span[r] * M;
            for (std::int64_t c = 0; c < cols; ++c) {
                const double v = a[r * cols + c];
                double& cell = cell_row[m.ctx_token_to_span[c]];
                cell = rule == AggregationRule::max ? std::max(cell, v) : cell + v;
            }
        }
        float* dst = out.values.data() + lh * J * M;
        for (std::size_t k = 0; k < J * M; ++k) {
            if (count[k] == 0.0) {
                dst[k] = 0.0f;
            } else if (rule == AggregationRule::mean) {
                dst[k] = static_cast<float>(acc[k] / count[k]);
            } else {
                dst[k] = static_cast<float>(acc[k]);
            }
        }
    }
    return out;
}

std::size_t argmax_lowest(std::span<const float> row) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

std::size_t select_context_chunk(const ChunkAttention& attn, std::int64_t l, std::int64_t h, std::int64_t j) {
    return argmax_lowest(attn.row(l, h, j));
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw InputError("LENGTH_MISMATCH", "cosine of vectors with different widths");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += static_cast<double>(a[k]) * b[k];
        na += static_cast<double>(a[k]) * a[k];
        nb += static_cast<double>(b[k]) * b[k];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> logit_lens(std::span<const float> state, const ProjectionHead& head) {
    std::vector<float> normed(state.size());
    normalize_state(state, head, normed);
    std::vector<float> logits(static_cast<std::size_t>(head.vocab_size));
    project_logits(normed, 1, head, logits);
    return softmax(logits);
}

std::vector<double> logit_lens(std::span<const double> state, const ProjectionHead& head) {
    const auto d = state.size();
    if (d != static_cast<std::size_t>(head.d_model)) {
        throw InputError("D_MODEL_MISMATCH", "state width does not match the projection head");
    }
    std::vector<double> x(state.begin(), state.end());
    if (head.norm_kind != NormKind::none) {
        double mu = 0.0;
        if (head.norm_kind == NormKind::layernorm) {
            for (double v : x) mu += v;
            mu /= static_cast<double>(d);
        }
        double ss = 0.0;
        for (double v : x) ss += (v - mu) * (v - mu);
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + head.norm_eps);
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = (x[k] - mu) * inv * head.norm_weight[k];
            if (!head.norm_bias.empty()) x[k] += head.norm_bias[k];
        }
    }
    const auto V = static_cast<std::size_t>(head.vocab_size);
    std::vector<double> p(V);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < V; ++v) {
        const auto w = head.row(v);
        double z = 0.0;
        for (std::size_t k = 0; k < d; ++k) z += x[k] * w[k];
        p[v] = z;
        mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (auto& v : p) sum += (v = std::exp(v - mx));
    for (auto& v : p) v /= sum;
    return p;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw InputError("LENGTH_MISMATCH", "jsd of distributions with different lengths");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = p[i] + q[i];
        if (s <= 0.0) continue;
        const double r = (p[i] - q[i]) / s;
        double t = 0.0;
        if (p[i] > 0.0) t += p[i] * std::log1p(r);
        if (q[i] > 0.0) t += q[i] * std::log1p(-r);
        acc += t;
    }
    return std::clamp(0.5 * acc, 0.0, std::numbers::ln2);
}

std::vector<double> external_context_score(const ActivationTrace& trace, AggregationRule rule) {
    const auto& m = trace.meta;
    const auto J = static_cast<std::int64_t>(m.n_response_chunks());
    const auto M = static_cast<std::int64_t>(m.n_context_chunks());
    if (trace.ctx_emb.empty() || trace.resp_emb.empty()) {
        throw InputError("MISSING_EMBEDDINGS", "trace has no chunk embeddings");
    }
    const auto d = static_cast<std::size_t>(trace.ctx_emb.dim(1));
    if (trace.ctx_emb.dim(0) != M || trace.resp_emb.dim(0) != J || static_cast<std::size_t>(trace.resp_emb.dim(1)) != d) {
        throw InputError("EMB_SHAPE", "chunk embeddings do not match the span lists");
    }
    const ChunkAttention attn = aggregate_attention(trace, rule);

    // cosines only depend on (j, selected i), so compute the J x M table once
    std::vector<double> cos(static_cast<std::size_t>(J * M));
    for (std::int64_t j = 0; j < J; ++j) {
        std::span<const float> r(trace.resp_emb.values.data() + j * d, d);
        for (std::int64_t i = 0; i < M; ++i) {
            std::span<const float> c(trace.ctx_emb.values.data() + i * d, d);
            cos[j * M + i] = cosine_similarity(r, c);
        }
    }
    std::vector<double> ecs(static_cast<std::size_t>(m.n_layers * m.n_heads * J));
    std::size_t k = 0;
    for (std::int64_t l = 0; l < m.n_layers; ++l)
        for (std::int64_t h = 0; h < m.n_heads; ++h)
            for (std::int64_t j = 0; j < J; ++j) ecs[k++] = cos[j * M + select_context_chunk(attn, l, h, j)];
    return ecs;
}

PksResult parametric_knowledge_score(const ActivationTrace& trace, const ProjectionHead& head,
                                     const ScoreOptions& options) {
    const auto& m = trace.meta;
    const auto L = m.n_layers;
    const auto T = trace.x_mid.dim(1);
    const auto J = static_cast<std::int64_t>(m.n_response_chunks());
    const auto d = static_cast<std::size_t>(head.d_model);
    const auto V = static_cast<std::size_t>(head.vocab_size);
    if (head.d_model != m.d_model || trace.x_mid.dim(2) != m.d_model) {
        throw InputError("D_MODEL_MISMATCH", "projection head d_model " + std::to_string(head.d_model) +
                                                 " does not match trace d_model " + std::to_string(m.d_model));
    }
    if (trace.x_mid.dim(0) != L || trace.x_post.shape != trace.x_mid.shape ||
        m.token_to_span.size() != static_cast<std::size_t>(T)) {
        throw InputError("RESID_SHAPE", "residual capture does not match the trace metadata");
    }

    PksResult res;
    res.n_layers = L;
    res.n_tokens = T;
    res.n_chunks = J;
    res.token_pks.assign(static_cast<std::size_t>(L * T), 0.0);

    const std::size_t block = std::max<std::size_t>(1, options.token_block);
    const std::size_t blocks_per_layer = (static_cast<std::size_t>(T) + block - 1) / block;
    const std::size_t n_items = static_cast<std::size_t>(L) * blocks_per_layer;

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto worker = [&] {
        std::vector<float> states(2 * block * d);
        std::vector<float> logits(2 * block * V);
        std::vector<double> scratch;
        try {
            for (std::size_t item = next++; item < n_items; item = next++) {
                const std::size_t l = item / blocks_per_layer;
                const std::size_t t0 = (item % blocks_per_layer) * block;
                const std::size_t nt = std::min(block, static_cast<std::size_t>(T) - t0);
                // rows 2t = mid, 2t+1 = post
                for (std::size_t t = 0; t < nt; ++t) {
                    const std::size_t off = (l * T + t0 + t) * d;
                    normalize_state({trace.x_mid.values.data() + off, d}, head, {states.data() + 2 * t * d, d});
                    normalize_state({trace.x_post.values.data() + off, d}, head, {states.data() + (2 * t + 1) * d, d});
                }
                project_logits({states.data(), 2 * nt * d}, 2 * nt, head, {logits.data(), 2 * nt * V});
                for (std::size_t t = 0; t < nt; ++t) {
                    res.token_pks[l * T + t0 + t] = jsd_from_logits({logits.data() + 2 * t * V, V},
                                                                    {logits.data() + (2 * t + 1) * V, V}, scratch);
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = n_items;
        }
    };

    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(n_items)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    // chunk means in ascending token order, independent of the partitioning above
    std::vector<double> count(static_cast<std::size_t>(J), 0.0);
    for (auto s : m.token_to_span) count[s] += 1.0;
    res.empty_chunk.assign(static_cast<std::size_t>(J), 0);
    for (std::int64_t j = 0; j < J; ++j) res.empty_chunk[j] = count[j] == 0.0;
    res.chunk_pks.assign(static_cast<std::size_t>(L * J), 0.0);
    for (std::int64_t l = 0; l < L; ++l) {
        double* row = res.chunk_pks.data() + l * J;
        for (std::int64_t t = 0; t < T; ++t) row[m.token_to_span[t]] += res.token_pks[l * T + t];
        for (std::int64_t j = 0; j < J; ++j) row[j] = count[j] == 0.0 ? 0.0 : row[j] / count[j];
    }
    return res;
}

ScoreTensor score_trace(const ActivationTrace& trace, const ProjectionHead& head, const ScoreOptions& options) {
    ScoreTensor st;
    st.n_layers = trace.meta.n_layers;
    st.n_heads = trace.meta.n_heads;
    st.n_chunks = static_cast<std::int64_t>(trace.meta.n_response_chunks());
    st.ecs = external_context_score(trace, options.aggregation);
    PksResult pks = parametric_knowledge_score(trace, head, options);
    st.pks = std::move(pks.chunk_pks);
    st.empty_chunk = std::move(pks.empty_chunk);
    return st;
}

}  // namespace mechdet
