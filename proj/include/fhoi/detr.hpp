#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fhoi/coattention.hpp"
#include "fhoi/geometry.hpp"
#include "fhoi/semantics.hpp"
#include "fhoi/tensor.hpp"

namespace fhoi {

struct StackConfig {
    std::size_t c1 = 32;
    std::size_t c2 = 16;
    std::size_t d = 64;   // always 2*c1
    std::size_t l = 16;   // grid tokens, must be a perfect square
    std::size_t n_q = 8;
    std::size_t heads = 4;
    std::size_t enc_layers = 2;
    std::size_t inst_dec_layers = 1;
    std::size_t inter_dec_layers = 1;
    std::size_t ffn_dim = 64;
    bool use_positions = true;

    void validate() const;
    std::size_t grid_side() const;
};

enum class PredictMode { Train, Eval };

struct AttnProbe {
    std::vector<Tensor>* sink = nullptr;  // row-stochastic matrices, debug only
    void put(const Tensor& t) {
        if (sink) sink->push_back(t);
    }
};

struct AttentionWeights {
    Tensor wq, wk, wv, wo;  // C1 x C1 each
};

struct EncoderLayerParams {
    AttentionWeights self_attn;
    Tensor ff1;  // ffn x C1
    Tensor ff2;  // C1 x ffn
};

struct DecoderLayerParams {
    AttentionWeights self_attn;
    AttentionWeights cross_attn;
    Tensor ff1, ff2;
};

struct ModelParams {
    StackConfig cfg;
    CoAttentionParams osaca;
    CoAttentionParams ovaca;
    std::vector<EncoderLayerParams> enc;
    std::vector<DecoderLayerParams> inst_dec;
    std::vector<DecoderLayerParams> inter_dec;
    Tensor queries;   // C1 x N_q
    Tensor w_proj;    // C1 x d
    Tensor obj_head;  // C1 x (N+1), fixed at init from the object count
    Tensor box1, box2, box3;  // C1xC1, C1xC1, C1x8

    static ModelParams init(const StackConfig& cfg, std::size_t num_objects,
                            std::uint64_t seed);
    std::vector<std::pair<std::string, Tensor>> named() const;
    void zero_grads();
};

struct Predictions {
    Tensor hoi_logits;  // N_q x S (train) or N_q x C (eval)
    Tensor obj_logits;  // N_q x (N+1)
    Tensor human_box;   // N_q x 4, cx cy w h in [0,1]
    Tensor object_box;  // N_q x 4
};

struct DetectionOut {
    int slot = 0;
    int hoi_class = 0;
    double score = 0.0;
    Box human, object;
};

// CLIP-style logit temperature, fixed.
inline constexpr double kLogitTau = 1.0 / 0.07;

Tensor sinusoidal_positions(const StackConfig& cfg);

// tokens + fixed 2-D positions -> post-norm transformer encoder -> F_e.
Tensor encode(Graph& g, const Tensor& v_b, const ModelParams& p,
              AttnProbe probe = {});

// Instance decoder over F_i, then interaction decoder over the same memory.
// Returns interaction embeddings F_d, N_q x C1.
Tensor decode(Graph& g, const Tensor& f_i, const ModelParams& p,
              AttnProbe probe = {});

Predictions predict(Graph& g, const Tensor& f_d, const Tensor& class_embed,
                    const ModelParams& p, PredictMode mode,
                    std::size_t total_classes);

// score(slot, c) = sigmoid(hoi_logit) * softmax(obj_logits)[object(c)];
// top_n detections by score across all (slot, class) pairs.
std::vector<DetectionOut> postprocess(const Predictions& preds, const Taxonomy& tax,
                                      std::size_t top_n = 100);

void save_checkpoint(const ModelParams& p, const std::string& path);
void load_checkpoint(ModelParams& p, const std::string& path);

}  // namespace fhoi
