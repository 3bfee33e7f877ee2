#pragma once

// Logit-lens projection kernels: final normalization, the [V][d_model]
// unembedding product, and divergences computed directly from logit rows.
//
// Every logit is computed with the same lane-partitioned reduction whatever
// tile or batch the state lands in, so projecting a state alone or inside a
// batch gives bitwise-identical logits.

#include <cstddef>
#include <span>
#include <vector>

#include "mechdet/trace_format.hpp"

namespace mechdet {

// Applies head.norm_kind to one residual state.
void normalize_state(std::span<const float> state, const ProjectionHead& head, std::span<float> out);

// logits[s * V + v] = <states[s], unembed[v]> for n states stored row-major
// in `states` ([n][d_model], already normalized).
void project_logits(std::span<const float> states, std::size_t n, const ProjectionHead& head,
                    std::span<float> logits);

// Natural-log Jensen-Shannon divergence between softmax(a) and softmax(b).
// Streams over the rows; `scratch` is resized to 2 * a.size().
double jsd_from_logits(std::span<const float> a, std::span<const float> b, std::vector<double>& scratch);

// Max-subtracted softmax in double precision.
std::vector<double> softmax(std::span<const float> logits);

}  // namespace mechdet
