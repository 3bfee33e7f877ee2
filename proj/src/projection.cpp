#include "mechdet/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "mechdet/error.hpp"

namespace mechdet {

namespace {

constexpr std::size_t kLanes = 16;
using Vec = float __attribute__((vector_size(kLanes * sizeof(float))));

inline Vec load(const float* p) {
    Vec v;
    std::memcpy(&v, p, sizeof(Vec));
    return v;
}

inline float finish(const Vec& acc, const float* u, const float* x, std::size_t k0, std::size_t d) {
    float s = 0.0f;
    for (std::size_t i = 0; i < kLanes; ++i) {
        s += acc[i];
    }
    for (std::size_t k = k0; k < d; ++k) {
        s += u[k] * x[k];
    }
    return s;
}

// R unembedding rows x S states, accumulated lane-wise over d.
template <std::size_t R, std::size_t S>
inline void tile(const float* const* rows, const float* const* states, std::size_t d, float* out[S][R]) {
    const std::size_t dv = d / kLanes * kLanes;
    Vec acc[R][S] = {};
    for (std::size_t k = 0; k < dv; k += kLanes) {
        Vec x[S];
        for (std::size_t j = 0; j < S; ++j) {
            x[j] = load(states[j] + k);
        }
        for (std::size_t i = 0; i < R; ++i) {
            const Vec u = load(rows[i] + k);
            for (std::size_t j = 0; j < S; ++j) {
                acc[i][j] = acc[i][j] + u * x[j];
            }
        }
    }
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < S; ++j) {
            *out[j][i] = finish(acc[i][j], rows[i], states[j], dv, d);
        }
    }
}

}  // namespace

void normalize_state(std::span<const float> state, const ProjectionHead& head, std::span<float> out) {
    const auto d = state.size();
    if (d != static_cast<std::size_t>(head.d_model) || out.size() != d) {
        throw InputError("D_MODEL_MISMATCH", "state width does not match the projection head");
    }
    switch (head.norm_kind) {
        case NormKind::none:
            std::copy(state.begin(), state.end(), out.begin());
            return;
        case NormKind::rms: {
            double ss = 0.0;
            for (float v : state) ss += static_cast<double>(v) * v;
            const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + head.norm_eps);
            for (std::size_t k = 0; k < d; ++k) {
                double y = state[k] * inv * head.norm_weight[k];
                if (!head.norm_bias.empty()) y += head.norm_bias[k];
                out[k] = static_cast<float>(y);
            }
            return;
        }
        case NormKind::layernorm: {
            double mean = 0.0;
            for (float v : state) mean += v;
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (float v : state) var += (v - mean) * (v - mean);
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + head.norm_eps);
            for (std::size_t k = 0; k < d; ++k) {
                double y = (state[k] - mean) * inv * head.norm_weight[k];
                if (!head.norm_bias.empty()) y += head.norm_bias[k];
                out[k] = static_cast<float>(y);
            }
            return;
        }
    }
}

void project_logits(std::span<const float> states, std::size_t n, const ProjectionHead& head,
                    std::span<float> logits) {
    const auto d = static_cast<std::size_t>(head.d_model);
    const auto V = static_cast<std::size_t>(head.vocab_size);
    if (states.size() != n * d || logits.size() != n * V) {
        throw InputError("SHAPE_MISMATCH", "project_logits buffer sizes disagree with the head");
    }
    constexpr std::size_t kR = 4;
    constexpr std::size_t kS = 4;
    const std::size_t v_full = V / kR * kR;
    const std::size_t s_full = n / kS * kS;

    for (std::size_t v0 = 0; v0 < V; v0 += kR) {
        const std::size_t rcount = v0 < v_full ? kR : V - v0;
        const float* rows[kR];
        for (std::size_t i = 0; i < rcount; ++i) rows[i] = head.unembed.data() + (v0 + i) * d;

        for (std::size_t s0 = 0; s0 < n; s0 += kS) {
            const std::size_t scount = s0 < s_full ? kS : n - s0;
            const float* xs[kS];
            for (std::size_t j = 0; j < scount; ++j) xs[j] = states.data() + (s0 + j) * d;

            if (rcount == kR && scount == kS) {
                float* out[kS][kR];
                for (std::size_t j = 0; j < kS; ++j)
                    for (std::size_t i = 0; i < kR; ++i) out[j][i] = &logits[(s0 + j) * V + v0 + i];
                tile<kR, kS>(rows, xs, d, out);
            } else {
                for (std::size_t i = 0; i < rcount; ++i) {
                    for (std::size_t j = 0; j < scount; ++j) {
                        float* out[1][1] = {{&logits[(s0 + j) * V + v0 + i]}};
                        tile<1, 1>(&rows[i], &xs[j], d, out);
                    }
                }
            }
        }
    }
}

std::vector<double> softmax(std::span<const float> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double jsd_from_logits(std::span<const float> a, std::span<const float> b, std::vector<double>& scratch) {
    const std::size_t V = a.size();
    if (b.size() != V) {
        throw InputError("LENGTH_MISMATCH", "logit rows differ in length");
    }
    scratch.resize(2 * V);
    double* p = scratch.data();
    double* q = scratch.data() + V;

    const double ma = *std::max_element(a.begin(), a.end());
    const double mb = *std::max_element(b.begin(), b.end());
    double sa = 0.0;
    double sb = 0.0;
    for (std::size_t i = 0; i < V; ++i) {
        p[i] = std::exp(a[i] - ma);
        q[i] = std::exp(b[i] - mb);
        sa += p[i];
        sb += q[i];
    }
    const double ia = 1.0 / sa;
    const double ib = 1.0 / sb;
    double acc = 0.0;
    for (std::size_t i = 0; i < V; ++i) {
        const double pi = p[i] * ia;
        const double qi = q[i] * ib;
        const double s = pi + qi;
        if (s <= 0.0) continue;
        // KL terms against m = (p+q)/2: p*log(2p/(p+q)) = p*log1p((p-q)/(p+q))
        const double r = (pi - qi) / s;
        double t = 0.0;
        if (pi > 0.0) t += pi * std::log1p(r);
        if (qi > 0.0) t += qi * std::log1p(-r);
        acc += t;
    }
    return std::clamp(0.5 * acc, 0.0, std::numbers::ln2);
}

}  // namespace mechdet
