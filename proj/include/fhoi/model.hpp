#pragma once

#include <utility>
#include <vector>

#include "fhoi/dataset.hpp"
#include "fhoi/detr.hpp"
#include "fhoi/matching.hpp"
#include "fhoi/nominators.hpp"

namespace fhoi {

struct PipelineConfig {
    std::size_t k_o = 5;  // nominated objects
    std::size_t k = 10;   // related verbs per object
    std::size_t k_a = 5;  // nominated verbs
};

struct ForwardOutputs {
    ObjectNomination obj_nom;
    ActionNomination act_nom;
    ProbeOutput f_o, f_a;
    Tensor f_e, f_i, f_d;
    Predictions preds;
};

// Full pipeline for one scene: nominate objects, object-probed co-attention,
// nominate verbs, encoder, verb-probed co-attention over the conditioned
// grid, fusion, decoders, heads.
ForwardOutputs forward_scene(Graph& g, const Scene& scene, const ModelParams& p,
                             const GeneratedData& data, const OverMatrix& over,
                             const Tensor& class_embed, PredictMode mode,
                             std::size_t total_classes, const PipelineConfig& pipe,
                             AttnProbe probe = {});

// Matching and the loss reweighting matrix are constants of the forward
// pass; freezing them lets finite differences probe the same objective the
// analytic gradient describes.
struct SceneFreeze {
    bool valid = false;
    MatchResult match;
    std::vector<std::vector<double>> omega;
};

struct LossBreakdown {
    double total = 0, box = 0, iou = 0, obj = 0, ordis = 0;
};

struct LossConfig {
    CostWeights cost;  // box/iou/obj weights double as loss lambdas
    FocalConfig focal;
    OrdisConfig ordis;
    double no_object_weight = 0.1;
};

// Scalar training loss over a batch of scenes. `freeze`, when given, must
// have one entry per scene; invalid entries are filled on first use.
Tensor batch_loss(Graph& g, const std::vector<const Scene*>& scenes,
                  const ModelParams& p, const GeneratedData& data,
                  const OverMatrix& over, const Tensor& class_embed_seen,
                  const std::vector<int>& seen_cols, const ZsSplit& split,
                  const PipelineConfig& pipe, const LossConfig& lc,
                  std::vector<SceneFreeze>* freeze, LossBreakdown* breakdown);

// Gradient descent with decoupled weight decay and first/second moment
// accumulators.
struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 1e-4;
    std::size_t t = 0;
    std::vector<std::vector<double>> m, v;

    void step(const std::vector<std::pair<std::string, Tensor>>& params, double lr);
};

std::vector<EvalDetection> eval_detections(
    const std::vector<Scene>& scenes, const ModelParams& p, const GeneratedData& data,
    const OverMatrix& over, const Tensor& class_embed_all, const PipelineConfig& pipe,
    std::size_t top_n = 100);

}  // namespace fhoi
