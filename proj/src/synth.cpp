#include "mechdet/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mechdet/error.hpp"
#include "mechdet/half.hpp"
#include "mechdet/rng.hpp"

namespace mechdet {

namespace {

using Shape = std::vector<std::int64_t>;

float quantize(float v, DType storage) { return storage == DType::f16 ? half_to_float(float_to_half(v)) : v; }

FloatTensor make_tensor(Shape shape, DType storage) {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return {std::move(shape), std::vector<float>(n, 0.0f), storage};
}

// "<word> sentence k." pieces joined by single spaces; spans cover each piece.
std::string sentences(const char* word, std::int64_t n, std::vector<Span>& spans) {
    std::string text;
    std::int64_t pos = 0;
    for (std::int64_t k = 0; k < n; ++k) {
        if (k > 0) {
            text += ' ';
            ++pos;
        }
        const std::string piece = std::string(word) + " sentence " + std::to_string(k) + ".";
        spans.push_back({pos, pos + static_cast<std::int64_t>(piece.size())});
        text += piece;
        pos += static_cast<std::int64_t>(piece.size());
    }
    return text;
}

std::vector<std::int64_t> token_map(Rng& rng, std::int64_t chunks, std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> map;
    for (std::int64_t c = 0; c < chunks; ++c) {
        const auto n = lo + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(hi - lo + 1)));
        map.insert(map.end(), static_cast<std::size_t>(n), c);
    }
    return map;
}

// Attention row = first n_ctx entries of a softmax over a longer sequence
// (context + response prefix); `bonus` raises the logits of chosen context tokens.
void fill_attention_row(Rng& rng, std::span<float> row, std::size_t extra, std::span<const double> bonus,
                        DType storage) {
    std::vector<double> logits(row.size() + extra);
    for (std::size_t k = 0; k < logits.size(); ++k) {
        logits[k] = rng.normal(0.0, 1.0) + (k < bonus.size() ? bonus[k] : 0.0);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - mx);
        z += v;
    }
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = quantize(static_cast<float>(logits[k] / z), storage);
}

void gaussian_fill(Rng& rng, std::vector<float>& v, double sd, DType storage) {
    for (auto& x : v) x = quantize(static_cast<float>(rng.normal(0.0, sd)), storage);
}

std::vector<double> unit(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

void check_shape(const SynthShape& s) {
    if (s.n_layers < 1 || s.n_heads < 1 || s.d_model < 1 || s.vocab_size < 2 || s.d_emb < 1 || s.n_ctx_chunks < 1 ||
        s.n_resp_chunks < 1 || s.min_tokens_per_chunk < 1 || s.max_tokens_per_chunk < s.min_tokens_per_chunk) {
        throw InputError("BAD_CONFIG", "synthetic trace shape has a non-positive dimension");
    }
}

}  // namespace

ActivationTrace make_random_trace(const SynthShape& shape, std::uint64_t seed, std::string trace_id) {
    check_shape(shape);
    Rng rng(seed);
    ActivationTrace tr;
    auto& m = tr.meta;
    m.trace_id = std::move(trace_id);
    m.model_name = "synthetic";
    m.n_layers = shape.n_layers;
    m.n_heads = shape.n_heads;
    m.d_model = shape.d_model;
    m.vocab_size = shape.vocab_size;
    m.prompt_text = sentences("Context", shape.n_ctx_chunks, m.prompt_spans);
    m.response_text = sentences("Response", shape.n_resp_chunks, m.response_spans);
    m.ctx_token_to_span = token_map(rng, shape.n_ctx_chunks, shape.min_tokens_per_chunk, shape.max_tokens_per_chunk);
    m.token_to_span = token_map(rng, shape.n_resp_chunks, shape.min_tokens_per_chunk, shape.max_tokens_per_chunk);
    m.attention_granularity = Granularity::token;
    m.encoder_name = "synthetic-gaussian";

    const auto L = shape.n_layers, H = shape.n_heads;
    const auto T = static_cast<std::int64_t>(m.token_to_span.size());
    const auto C = static_cast<std::int64_t>(m.ctx_token_to_span.size());
    tr.attention = make_tensor({L, H, T, C}, shape.storage);
    for (std::int64_t r = 0; r < L * H * T; ++r) {
        const auto t = static_cast<std::size_t>(r % T);
        fill_attention_row(rng, std::span(tr.attention.values).subspan(static_cast<std::size_t>(r * C), C), t + 2, {},
                           shape.storage);
    }
    tr.x_mid = make_tensor({L, T, shape.d_model}, shape.storage);
    tr.x_post = make_tensor({L, T, shape.d_model}, shape.storage);
    gaussian_fill(rng, tr.x_mid.values, 1.0, shape.storage);
    for (std::size_t k = 0; k < tr.x_post.values.size(); ++k) {
        tr.x_post.values[k] = quantize(tr.x_mid.values[k] + static_cast<float>(rng.normal(0.0, 0.5)), shape.storage);
    }
    tr.ctx_emb = make_tensor({shape.n_ctx_chunks, shape.d_emb}, DType::f32);
    tr.resp_emb = make_tensor({shape.n_resp_chunks, shape.d_emb}, DType::f32);
    gaussian_fill(rng, tr.ctx_emb.values, 1.0, DType::f32);
    gaussian_fill(rng, tr.resp_emb.values, 1.0, DType::f32);

    if (shape.granularity == Granularity::chunk) return pre_aggregate(tr);
    return tr;
}

ProjectionHead make_random_head(std::int64_t d_model, std::int64_t vocab_size, NormKind kind, std::uint64_t seed,
                                double gain) {
    if (d_model < 1 || vocab_size < 2) {
        throw InputError("BAD_CONFIG", "head needs d_model >= 1 and vocab_size >= 2");
    }
    Rng rng(seed);
    ProjectionHead h;
    h.norm_kind = kind;
    h.norm_eps = 1e-6;
    h.d_model = d_model;
    h.vocab_size = vocab_size;
    const auto d = static_cast<std::size_t>(d_model);
    if (kind != NormKind::none) {
        h.norm_weight.resize(d);
        for (auto& w : h.norm_weight) w = static_cast<float>(1.0 + 0.1 * rng.normal());
    }
    if (kind == NormKind::layernorm) {
        h.norm_bias.resize(d);
        for (auto& b : h.norm_bias) b = static_cast<float>(0.05 * rng.normal());
    }
    h.unembed.resize(static_cast<std::size_t>(vocab_size) * d);
    const double sd = gain / std::sqrt(static_cast<double>(d_model));
    for (auto& u : h.unembed) u = static_cast<float>(rng.normal(0.0, sd));
    return h;
}

ActivationTrace pre_aggregate(const ActivationTrace& trace, AggregationRule rule) {
    const ChunkAttention ca = aggregate_attention(trace, rule);
    ActivationTrace out = trace;
    out.attention = {{ca.n_layers, ca.n_heads, ca.n_resp_chunks, ca.n_ctx_chunks}, ca.values, DType::f32};
    out.meta.attention_granularity = Granularity::chunk;
    out.meta.ctx_token_to_span.clear();
    return out;
}

ActivationTrace make_planted_trace(const PlantedConfig& cfg, std::uint64_t seed, std::string trace_id) {
    SynthShape shape = cfg.shape;
    shape.granularity = Granularity::token;
    ActivationTrace tr = make_random_trace(shape, seed, std::move(trace_id));
    Rng rng(derive_seed(seed, 1));
    auto& m = tr.meta;
    const auto L = shape.n_layers, H = shape.n_heads, J = shape.n_resp_chunks, M = shape.n_ctx_chunks;
    const auto T = static_cast<std::int64_t>(m.token_to_span.size());
    const auto C = static_cast<std::int64_t>(m.ctx_token_to_span.size());
    const auto d = static_cast<std::size_t>(shape.d_model);
    const auto de = static_cast<std::size_t>(shape.d_emb);

    std::vector<int> label(static_cast<std::size_t>(J));
    std::vector<std::int64_t> source(static_cast<std::size_t>(J));
    for (std::int64_t j = 0; j < J; ++j) {
        label[j] = rng.uniform() < cfg.hallucination_rate ? 1 : 0;
        source[j] = static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(M)));
    }

    // Attention: planted layers favor each span's source chunk; the other
    // layers favor a random chunk per (layer, head, span).
    std::vector<double> bonus(static_cast<std::size_t>(C));
    for (std::int64_t l = 0; l < L; ++l) {
        for (std::int64_t h = 0; h < H; ++h) {
            std::vector<std::int64_t> target(static_cast<std::size_t>(J));
            for (std::int64_t j = 0; j < J; ++j) {
                target[j] = is_planted_layer(l, L) ? source[j]
                                                   : static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(M)));
            }
            for (std::int64_t t = 0; t < T; ++t) {
                const auto j = m.token_to_span[t];
                for (std::int64_t c = 0; c < C; ++c) bonus[c] = m.ctx_token_to_span[c] == target[j] ? 4.0 : 0.0;
                const auto off = static_cast<std::size_t>(((l * H + h) * T + t) * C);
                fill_attention_row(rng, std::span(tr.attention.values).subspan(off, C),
                                   static_cast<std::size_t>(t) + 2, bonus, shape.storage);
            }
        }
    }

    // Residual shift relative to |x_mid|, along a random direction.
    for (std::int64_t l = 0; l < L; ++l) {
        for (std::int64_t t = 0; t < T; ++t) {
            const auto j = m.token_to_span[t];
            const double base = is_planted_layer(l, L) && label[j] ? cfg.pks_shift_hallucinated : cfg.pks_shift_truthful;
            const double s = std::abs(base + cfg.noise * base * rng.normal());
            const auto off = static_cast<std::size_t>((l * T + t)) * d;
            double norm = 0.0;
            for (std::size_t k = 0; k < d; ++k) norm += double(tr.x_mid.values[off + k]) * tr.x_mid.values[off + k];
            norm = std::sqrt(norm);
            std::vector<double> dir(d);
            for (auto& v : dir) v = rng.normal();
            dir = unit(std::move(dir));
            for (std::size_t k = 0; k < d; ++k) {
                tr.x_post.values[off + k] =
                    quantize(static_cast<float>(tr.x_mid.values[off + k] + s * norm * dir[k]), shape.storage);
            }
        }
    }

    // resp_emb[j] = a * u_src + sqrt(1 - a^2) * v, with v orthogonal to u_src.
    for (std::int64_t j = 0; j < J; ++j) {
        std::vector<double> u(de), v(de);
        for (std::size_t k = 0; k < de; ++k) u[k] = tr.ctx_emb.values[static_cast<std::size_t>(source[j]) * de + k];
        u = unit(std::move(u));
        for (auto& x : v) x = rng.normal();
        double proj = 0.0;
        for (std::size_t k = 0; k < de; ++k) proj += v[k] * u[k];
        for (std::size_t k = 0; k < de; ++k) v[k] -= proj * u[k];
        v = unit(std::move(v));
        const double base = label[j] ? cfg.ecs_align_hallucinated : cfg.ecs_align_truthful;
        const double a = std::clamp(base + cfg.noise * 0.4 * rng.normal(), -0.99, 0.99);
        const double b = std::sqrt(1.0 - a * a);
        for (std::size_t k = 0; k < de; ++k) {
            tr.resp_emb.values[static_cast<std::size_t>(j) * de + k] = static_cast<float>(a * u[k] + b * v[k]);
        }
    }

    bool any = false;
    for (std::int64_t j = 0; j < J; ++j) {
        if (label[j]) {
            m.span_labels.push_back({m.response_spans[j], 0.5 + 0.5 * rng.uniform(), LabelSource::dataset});
            any = true;
        }
    }
    m.response_label = any ? 1 : 0;
    return tr;
}

}  // namespace mechdet
