#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fhoi/geometry.hpp"
#include "fhoi/semantics.hpp"
#include "fhoi/tensor.hpp"

namespace fhoi {

struct GroundTruth {
    Box human;
    Box object;
    int hoi_class = 0;
};

// Frozen synthetic inputs standing in for backbone + CLIP image features.
struct Scene {
    Tensor v_b;               // C1 x L
    std::vector<double> v_c;  // d
    std::vector<GroundTruth> gts;
};

enum class ZsSetting { UC, RF_UC, NF_UC, UO, UA, UV };

ZsSetting parse_zs_setting(const std::string& s);
std::string zs_setting_name(ZsSetting s);

struct ZsSplit {
    ZsSetting setting = ZsSetting::UC;
    std::vector<int> seen;    // class ids, ascending
    std::vector<int> unseen;  // class ids, ascending
    std::vector<bool> is_seen;
    std::vector<int> unseen_objects;
    std::vector<int> unseen_verbs;
};

struct GeneratedData {
    Taxonomy taxonomy;
    EmbeddingTable objects;
    EmbeddingTable actions;
};

// Random unit object embeddings; action embeddings pulled toward the mean of
// their paired objects so the OVeR matrix has real structure. Vectors are
// f32-quantized so table round trips stay bit-exact.
GeneratedData gen_taxonomy(std::uint64_t seed, std::size_t n_objects,
                           std::size_t n_actions, std::size_t n_classes,
                           std::size_t dim, double rare_fraction);

struct SceneGenConfig {
    std::size_t c1 = 32;
    std::size_t l = 16;
    double sigma = 0.1;
    std::size_t max_interactions = 3;
    double extra_action_prob = 0.3;  // second HOI on the same box pair
};

// allowed_classes: the class pool scenes may sample from (seen set for
// training scenes, the full taxonomy for evaluation scenes).
Scene gen_scene(const GeneratedData& data, const std::vector<int>& allowed_classes,
                const SceneGenConfig& cfg, SplitMix64& rng);

ZsSplit zs_split(const Taxonomy& tax, ZsSetting setting, std::uint64_t seed,
                 const std::vector<int>& unseen_objects = {},
                 const std::vector<int>& unseen_verbs = {});

void save_scenes(const std::string& path, const std::vector<Scene>& scenes,
                 std::size_t c1, std::size_t l, std::size_t d);
std::vector<Scene> load_scenes(const std::string& path, std::size_t* c1 = nullptr,
                               std::size_t* l = nullptr, std::size_t* d = nullptr);

struct EvalDetection {
    int scene = 0;
    int hoi_class = 0;
    double score = 0.0;
    Box human, object;
};

struct EvalReport {
    std::vector<double> per_class_ap;  // -1 marks classes with no ground truth
    double map_seen = 0.0;
    double map_unseen = 0.0;
    double map_full = 0.0;
};

// Greedy matching at IoU 0.5 on both boxes; all-point PR interpolation.
EvalReport hoi_map(const std::vector<EvalDetection>& detections,
                   const std::vector<Scene>& scenes, const ZsSplit& split);

}  // namespace fhoi
