#include "fhoi/model.hpp"

#include <cmath>

#include "fhoi/coattention.hpp"

namespace fhoi {

namespace {

Tensor as_scalar(Graph& g, const Tensor& t) {
    if (t.numel() != 1) throw ShapeError("expected scalar, got " + t.shape_str());
    return t.rank() == 1 ? t : g.reshape(t, {1});
}

double sigmoid_val(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

ForwardOutputs forward_scene(Graph& g, const Scene& scene, const ModelParams& p,
                             const GeneratedData& data, const OverMatrix& over,
                             const Tensor& class_embed, PredictMode mode,
                             std::size_t total_classes, const PipelineConfig& pipe,
                             AttnProbe attn_probe) {
    const Taxonomy& tax = data.taxonomy;
    const std::size_t c1 = p.cfg.c1;
    ForwardOutputs out;

    out.obj_nom = nominate_objects(data.objects, scene.v_c, pipe.k_o,
                                   tax.person_object_idx);
    Tensor v_c2 = reshape_guide_const(scene.v_c, c1);
    std::vector<Tensor> obj_cands;
    for (int idx : out.obj_nom.indices)
        obj_cands.push_back(
            reshape_guide_const(data.objects.vec(static_cast<std::size_t>(idx)), c1));
    out.f_o = probe(g, scene.v_b, v_c2, obj_cands, p.osaca);

    // Verb nomination is driven by the scored objects only (person excluded).
    std::vector<int> scored(out.obj_nom.indices.begin(),
                            out.obj_nom.indices.end() - 1);
    const auto related = related_verbs(over, scored, pipe.k);
    Tensor s_as = action_scene_scores(out.obj_nom, related, data.actions, scene.v_c);
    out.act_nom = nominate_actions(s_as, related, pipe.k_a, scored);

    out.f_e = encode(g, scene.v_b, p, attn_probe);

    Tensor v_oc = g.add(scene.v_b, out.f_o.map);
    std::vector<Tensor> verb_cands;
    for (int idx : out.act_nom.indices)
        verb_cands.push_back(
            reshape_guide_const(data.actions.vec(static_cast<std::size_t>(idx)), c1));
    out.f_a = probe(g, v_oc, v_c2, verb_cands, p.ovaca);

    out.f_i = interaction_encoding(g, out.f_a.map, out.f_e);
    out.f_d = decode(g, out.f_i, p, attn_probe);
    out.preds = predict(g, out.f_d, class_embed, p, mode, total_classes);
    return out;
}

Tensor batch_loss(Graph& g, const std::vector<const Scene*>& scenes,
                  const ModelParams& p, const GeneratedData& data,
                  const OverMatrix& over, const Tensor& class_embed_seen,
                  const std::vector<int>& seen_cols, const ZsSplit& split,
                  const PipelineConfig& pipe, const LossConfig& lc,
                  std::vector<SceneFreeze>* freeze, LossBreakdown* breakdown) {
    if (scenes.empty()) throw DataError("batch_loss: empty batch");
    if (freeze && freeze->size() != scenes.size())
        throw ShapeError("batch_loss: freeze entries must match batch size");
    const Taxonomy& tax = data.taxonomy;
    const std::size_t n_q = p.cfg.n_q;
    const std::size_t width = seen_cols.size();
    const int no_obj_col = static_cast<int>(tax.num_objects());

    std::vector<int> col_of_class(tax.num_classes(), -1);
    for (std::size_t i = 0; i < seen_cols.size(); ++i)
        col_of_class[static_cast<std::size_t>(seen_cols[i])] = static_cast<int>(i);

    Tensor l1_sum, giou_sum, ce_sum, ordis_sum;
    double ce_weight_total = 0.0;
    std::size_t n_pairs = 0, n_interactions = 0;
    auto acc = [&](Tensor& slot, const Tensor& term) {
        Tensor s = as_scalar(g, term);
        slot = slot.valid() ? g.add(slot, s) : s;
    };

    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const Scene& scene = *scenes[si];
        ForwardOutputs fo =
            forward_scene(g, scene, p, data, over, class_embed_seen,
                          PredictMode::Train, tax.num_classes(), pipe);
        const auto groups = group_gts(scene.gts);
        if (groups.size() > n_q)
            throw DataError("batch_loss: more ground-truth pairs than query slots");

        MatchResult match;
        if (freeze && (*freeze)[si].valid) {
            match = (*freeze)[si].match;
        } else {
            match = match_scene(fo.preds, groups, col_of_class, tax, lc.cost);
        }

        std::vector<bool> matched(n_q, false);
        std::vector<int> obj_target(n_q, no_obj_col);
        Tensor targets = Tensor::zeros({n_q, width});
        for (const auto& [slot, gi] : match.pairs) {
            const auto s = static_cast<std::size_t>(slot);
            matched[s] = true;
            const GtGroup& grp = groups[static_cast<std::size_t>(gi)];
            obj_target[s] =
                tax.classes[static_cast<std::size_t>(grp.classes[0])].object;
            for (int cls : grp.classes)
                targets.mut(s, static_cast<std::size_t>(
                                   col_of_class[static_cast<std::size_t>(cls)])) = 1.0;
        }

        std::vector<std::vector<double>> omega;
        if (freeze && (*freeze)[si].valid) {
            omega = (*freeze)[si].omega;
        } else {
            std::vector<std::vector<double>> probs(n_q, std::vector<double>(width));
            std::vector<std::vector<double>> tvals(n_q, std::vector<double>(width));
            for (std::size_t s = 0; s < n_q; ++s)
                for (std::size_t c = 0; c < width; ++c) {
                    probs[s][c] = sigmoid_val(fo.preds.hoi_logits.at(s, c));
                    tvals[s][c] = targets.at(s, c);
                }
            const auto beta =
                beta_factor(match, n_q, lc.ordis.kappa, lc.ordis.eps1);
            const auto delta = delta_factor(match, groups, seen_cols, over, tax,
                                            split.is_seen, n_q);
            const auto zeta = zeta_factor(probs, tvals, matched);
            omega = compute_omega(beta, delta, zeta, lc.ordis);
            if (freeze) (*freeze)[si] = {true, match, omega};
        }

        Tensor focal = focal_loss(g, fo.preds.hoi_logits, targets, lc.focal);
        acc(ordis_sum, ordis_loss(g, focal, omega));

        for (const auto& [slot, gi] : match.pairs) {
            const auto s = static_cast<std::size_t>(slot);
            const GtGroup& grp = groups[static_cast<std::size_t>(gi)];
            acc(l1_sum, l1_box(g, fo.preds.human_box, s, grp.human));
            acc(l1_sum, l1_box(g, fo.preds.object_box, s, grp.object));
            acc(giou_sum, g.add_const(g.neg(giou_box(g, fo.preds.human_box, s,
                                                     grp.human)), 1.0));
            acc(giou_sum, g.add_const(g.neg(giou_box(g, fo.preds.object_box, s,
                                                     grp.object)), 1.0));
        }

        double ws = 0.0;
        acc(ce_sum, object_ce(g, fo.preds.obj_logits, obj_target,
                              lc.no_object_weight, matched, &ws));
        ce_weight_total += ws;
        n_pairs += groups.size();
        n_interactions += scene.gts.size();
    }

    const double box_n = 1.0 / (2.0 * static_cast<double>(n_pairs));
    Tensor l_b = g.scale(l1_sum, lc.cost.box * box_n);
    Tensor l_u = g.scale(giou_sum, lc.cost.iou * box_n);
    Tensor l_o = g.scale(ce_sum, lc.cost.obj / ce_weight_total);
    Tensor l_ord = g.scale(ordis_sum, 1.0 / static_cast<double>(n_interactions));
    Tensor total = g.add(g.add(l_b, l_u), g.add(l_o, l_ord));
    if (breakdown) {
        breakdown->box = l_b.at(0);
        breakdown->iou = l_u.at(0);
        breakdown->obj = l_o.at(0);
        breakdown->ordis = l_ord.at(0);
        breakdown->total = total.at(0);
    }
    return total;
}

void AdamW::step(const std::vector<std::pair<std::string, Tensor>>& params,
                 double lr) {
    if (m.empty()) {
        for (const auto& [name, p] : params) {
            m.emplace_back(p.numel(), 0.0);
            v.emplace_back(p.numel(), 0.0);
        }
    }
    if (m.size() != params.size())
        throw ShapeError("optimizer state does not match parameter list");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        const std::vector<double>& grad = p.grad();
        std::vector<double>& val = p.data_mut();
        for (std::size_t k = 0; k < val.size(); ++k) {
            m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * grad[k];
            v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * grad[k] * grad[k];
            const double mh = m[i][k] / bc1;
            const double vh = v[i][k] / bc2;
            val[k] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * val[k]);
        }
    }
}

std::vector<EvalDetection> eval_detections(
    const std::vector<Scene>& scenes, const ModelParams& p, const GeneratedData& data,
    const OverMatrix& over, const Tensor& class_embed_all, const PipelineConfig& pipe,
    std::size_t top_n) {
    std::vector<EvalDetection> out;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        Graph g;
        ForwardOutputs fo = forward_scene(g, scenes[si], p, data, over,
                                          class_embed_all, PredictMode::Eval,
                                          data.taxonomy.num_classes(), pipe);
        for (const DetectionOut& d : postprocess(fo.preds, data.taxonomy, top_n)) {
            EvalDetection e;
            e.scene = static_cast<int>(si);
            e.hoi_class = d.hoi_class;
            e.score = d.score;
            e.human = d.human;
            e.object = d.object;
            out.push_back(e);
        }
    }
    return out;
}

}  // namespace fhoi
