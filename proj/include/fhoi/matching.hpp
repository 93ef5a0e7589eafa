#pragma once

#include <utility>
#include <vector>

#include "fhoi/dataset.hpp"
#include "fhoi/detr.hpp"
#include "fhoi/semantics.hpp"
#include "fhoi/tensor.hpp"

namespace fhoi {

// One human-object pair with all of its positive HOI classes. Ground truths
// sharing both boxes are merged so a pair carrying several actions occupies a
// single query slot.
struct GtGroup {
    Box human, object;
    std::vector<int> classes;
};

std::vector<GtGroup> group_gts(const std::vector<GroundTruth>& gts);

struct MatchResult {
    std::vector<std::pair<int, int>> pairs;  // (slot, group), ordered by group
    std::vector<double> eta;                 // assignment cost per group
    double eta_total = 0.0;
};

// Minimum-cost injective assignment of groups to slots; cost is N_q x G.
// Among optimal assignments, each group in order takes the smallest slot
// that preserves the optimal total.
MatchResult hungarian(const std::vector<std::vector<double>>& cost);

struct CostWeights {
    double box = 2.5;
    double iou = 1.0;
    double obj = 1.0;
    double cls = 1.0;
};

// L1 + (1 - GIoU) on both boxes, minus object probability, minus the mean
// predicted probability of the group's positive classes. Plain numbers: the
// match is a constant of the forward pass.
double pair_cost(const Predictions& preds, std::size_t slot, const GtGroup& gt,
                 const std::vector<int>& gt_cols, int gt_object,
                 const CostWeights& w);

MatchResult match_scene(const Predictions& preds, const std::vector<GtGroup>& groups,
                        const std::vector<int>& col_of_class, const Taxonomy& tax,
                        const CostWeights& w);

struct FocalConfig {
    double alpha = 0.25;
    double gamma = 2.0;
};

// Per-element sigmoid focal loss; targets is a constant 0/1 tensor.
Tensor focal_loss(Graph& g, const Tensor& logits, const Tensor& targets,
                  const FocalConfig& f);

struct OrdisConfig {
    double kappa = 2.0;
    double eps1 = 1e-14;
    double eps2 = 1e-7;
    bool use_beta = true;
    bool use_delta = true;
    bool use_zeta = true;
    bool omega_one = false;  // plain focal baseline
};

// beta = ln(1 + (max(eta,0)+eps1)^-kappa) on matched slots, 0 elsewhere.
std::vector<double> beta_factor(const MatchResult& m, std::size_t n_q, double kappa,
                                double eps1);

// delta[slot][col] = relatedness of the slot's matched object to the column's
// action, kept only when that (action, object) pair is a seen class.
std::vector<std::vector<double>> delta_factor(
    const MatchResult& m, const std::vector<GtGroup>& groups,
    const std::vector<int>& col_class, const OverMatrix& over, const Taxonomy& tax,
    const std::vector<bool>& is_seen, std::size_t n_q);

// zeta[slot][col] = prob - mean(prob over the slot's positive columns) for
// negative columns of matched slots; 0 on positives and unmatched slots.
std::vector<std::vector<double>> zeta_factor(
    const std::vector<std::vector<double>>& probs,
    const std::vector<std::vector<double>>& targets,
    const std::vector<bool>& matched);

// Omega = sigmoid(beta * zeta / (2 + delta + eps2)); disabled factors are
// forced to 0, omega_one forces 1 everywhere.
std::vector<std::vector<double>> compute_omega(
    const std::vector<double>& beta, const std::vector<std::vector<double>>& delta,
    const std::vector<std::vector<double>>& zeta, const OrdisConfig& cfg);

// sum(Omega .* focal); Omega is constant during backward.
Tensor ordis_loss(Graph& g, const Tensor& focal,
                  const std::vector<std::vector<double>>& omega);

// Differentiable per-box pieces; `boxes` is N_q x 4, gt is constant.
Tensor l1_box(Graph& g, const Tensor& boxes, std::size_t slot, const Box& gt);
Tensor giou_box(Graph& g, const Tensor& boxes, std::size_t slot, const Box& gt);

// Weighted cross-entropy over object logits; unnormalized sum, with the
// weight total reported so batches can normalize once.
Tensor object_ce(Graph& g, const Tensor& obj_logits,
                 const std::vector<int>& target_per_slot, double no_object_weight,
                 const std::vector<bool>& matched, double* weight_sum);

}  // namespace fhoi
