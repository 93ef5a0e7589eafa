#include "fhoi/coattention.hpp"

#include <cmath>

namespace fhoi {

CoAttentionParams CoAttentionParams::init(std::size_t c1, std::size_t c2,
                                          SplitMix64& rng) {
    const double b = std::sqrt(1.0 / static_cast<double>(c1));
    CoAttentionParams p;
    p.w_v = Tensor::uniform({c1, c2}, -b, b, rng, true);
    p.w_l = Tensor::uniform({c1, c2}, -b, b, rng, true);
    p.w1 = Tensor::uniform({2, c2}, -b, b, rng, true);
    p.w2 = Tensor::uniform({c1, c2}, -b, b, rng, true);
    p.w3 = Tensor::uniform({c1, c2}, -b, b, rng, true);
    p.w4 = Tensor::uniform({2, c2}, -b, b, rng, true);
    p.w5 = Tensor::uniform({c1, c2}, -b, b, rng, true);
    p.w6 = Tensor::uniform({c1, c2}, -b, b, rng, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> CoAttentionParams::named(
    const std::string& prefix) const {
    return {{prefix + ".w_v", w_v}, {prefix + ".w_l", w_l}, {prefix + ".w1", w1},
            {prefix + ".w2", w2},   {prefix + ".w3", w3},   {prefix + ".w4", w4},
            {prefix + ".w5", w5},   {prefix + ".w6", w6}};
}

Tensor reshape_guide_const(const std::vector<double>& v, std::size_t c1) {
    if (v.size() != 2 * c1)
        throw ConfigError("reshape_guide: d must equal 2*C1, got d=" +
                          std::to_string(v.size()) + " C1=" + std::to_string(c1));
    Tensor out = Tensor::zeros({c1, 2});
    for (std::size_t i = 0; i < v.size(); ++i)
        out.mut(i % c1, i / c1) = v[i];
    return out;
}

Tensor reshape_guide(Graph& g, const Tensor& v, std::size_t c1) {
    if (v.numel() != 2 * c1)
        throw ConfigError("reshape_guide: d must equal 2*C1, got d=" +
                          std::to_string(v.numel()) + " C1=" + std::to_string(c1));
    // Row-major reshape of v to 2 x C1 then transpose realizes the
    // (i mod C1, i div C1) placement with gradient flow.
    Tensor two_rows = g.reshape(v, {2, c1});
    return g.transpose(two_rows);
}

Tensor affinity(Graph& g, const Tensor& v_b, const Tensor& cand,
                const CoAttentionParams& p) {
    Tensor proj_v = g.matmul(g.transpose(p.w_v), v_b);   // C2 x L
    Tensor proj_l = g.matmul(g.transpose(p.w_l), cand);  // C2 x 2
    return g.matmul(g.transpose(proj_v), proj_l);        // L x 2
}

Tensor coattend_candidate(Graph& g, const Tensor& v_b, const Tensor& v_c2,
                          const Tensor& cand, const CoAttentionParams& p) {
    const std::size_t c1 = v_b.rows();
    if (v_c2.rows() != c1 || v_c2.cols() != 2 || cand.rows() != c1 || cand.cols() != 2)
        throw ShapeError("coattend_candidate: guide/candidate must be C1x2");

    Tensor gamma = affinity(g, v_b, cand, p);  // L x 2
    Tensor vbt = g.transpose(v_b);             // L x C1

    // P1 = (V_b^T V_c2 + Gamma) W1
    Tensor p1 = g.matmul(g.add(g.matmul(vbt, v_c2), gamma), p.w1);  // L x C2
    // P2 = (V_b^T + Gamma V_c2^T) W2
    Tensor p2 = g.matmul(g.add(vbt, g.matmul(gamma, g.transpose(v_c2))), p.w2);
    // Q1 = Gamma (cand^T W3)
    Tensor q1 = g.matmul(gamma, g.matmul(g.transpose(cand), p.w3));
    // Q2 = Gamma (V_c2^T cand)^T W4
    Tensor q2 = g.matmul(g.matmul(gamma, g.transpose(g.matmul(g.transpose(v_c2), cand))),
                         p.w4);

    Tensor r1 = g.tanh(g.add(p1, q1));  // L x C2
    Tensor r2 = g.tanh(g.add(p2, q2));
    // Attention over spatial positions per channel.
    Tensor f1 = g.softmax(g.matmul(p.w5, g.transpose(r1)), 1);  // C1 x L
    Tensor f2 = g.softmax(g.matmul(p.w6, g.transpose(r2)), 1);
    // LN over the channel axis per spatial position.
    return g.layer_norm(g.add(f1, f2), 0);
}

ProbeOutput probe(Graph& g, const Tensor& v_b, const Tensor& v_c2,
                  const std::vector<Tensor>& candidates, const CoAttentionParams& p) {
    if (candidates.empty()) throw ShapeError("probe: empty candidate list");
    ProbeOutput out;
    Tensor acc;
    for (const Tensor& cand : candidates) {
        Tensor m = coattend_candidate(g, v_b, v_c2, cand, p);
        out.per_candidate.push_back(m);
        acc = acc.valid() ? g.add(acc, m) : m;
    }
    out.map = g.scale(acc, 1.0 / static_cast<double>(candidates.size()));
    return out;
}

Tensor interaction_encoding(Graph& g, const Tensor& f_a, const Tensor& f_e) {
    if (f_a.shape() != f_e.shape())
        throw ShapeError("interaction_encoding: shape mismatch " + f_a.shape_str() +
                         " vs " + f_e.shape_str());
    return g.add(f_a, f_e);
}

}  // namespace fhoi
