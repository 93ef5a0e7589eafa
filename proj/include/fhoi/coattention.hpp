#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fhoi/semantics.hpp"
#include "fhoi/tensor.hpp"

namespace fhoi {

// One asymmetric co-attention block. OSACA and OVACA each own an instance;
// the equations are identical, only the inputs differ.
struct CoAttentionParams {
    Tensor w_v, w_l;          // C1 x C2
    Tensor w1;                // 2 x C2
    Tensor w2, w3;            // C1 x C2
    Tensor w4;                // 2 x C2
    Tensor w5, w6;            // C1 x C2

    static CoAttentionParams init(std::size_t c1, std::size_t c2, SplitMix64& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

struct ProbeOutput {
    Tensor map;                         // C1 x L
    std::vector<Tensor> per_candidate;  // N of C1 x L, kept for attention export
};

// Splits v (length 2*C1) into C1 x 2: element i lands at (i mod C1, i div C1).
Tensor reshape_guide(Graph& g, const Tensor& v, std::size_t c1);
Tensor reshape_guide_const(const std::vector<double>& v, std::size_t c1);

// Gamma_n = (W_v^T V_b)^T (W_l^T cand), L x 2 per candidate.
Tensor affinity(Graph& g, const Tensor& v_b, const Tensor& cand,
                const CoAttentionParams& p);

// Full per-candidate chain ending in LN(F1 + F2) over the channel axis.
Tensor coattend_candidate(Graph& g, const Tensor& v_b, const Tensor& v_c2,
                          const Tensor& cand, const CoAttentionParams& p);

// Mean over the candidate axis of the per-candidate fused maps.
ProbeOutput probe(Graph& g, const Tensor& v_b, const Tensor& v_c2,
                  const std::vector<Tensor>& candidates, const CoAttentionParams& p);

Tensor interaction_encoding(Graph& g, const Tensor& f_a, const Tensor& f_e);

}  // namespace fhoi
