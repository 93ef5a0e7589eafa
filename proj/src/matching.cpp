#include "fhoi/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fhoi {

namespace {

double sigmoid_val(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

bool same_box(const Box& a, const Box& b) {
    return a.cx == b.cx && a.cy == b.cy && a.w == b.w && a.h == b.h;
}

// Potential-based assignment over rows x cols, rows <= cols. Returns the
// chosen column per row.
std::vector<int> assign(const std::vector<std::vector<double>>& a) {
    const std::size_t n = a.size(), m = a[0].size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_of_row(n, -1);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) col_of_row[p[j] - 1] = static_cast<int>(j - 1);
    return col_of_row;
}

double assign_total(const std::vector<std::vector<double>>& a) {
    const std::vector<int> cols = assign(a);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        total += a[i][static_cast<std::size_t>(cols[i])];
    return total;
}

}  // namespace

std::vector<GtGroup> group_gts(const std::vector<GroundTruth>& gts) {
    std::vector<GtGroup> groups;
    for (const GroundTruth& gt : gts) {
        GtGroup* hit = nullptr;
        for (GtGroup& g : groups)
            if (same_box(g.human, gt.human) && same_box(g.object, gt.object)) {
                hit = &g;
                break;
            }
        if (hit) {
            if (std::find(hit->classes.begin(), hit->classes.end(), gt.hoi_class) ==
                hit->classes.end())
                hit->classes.push_back(gt.hoi_class);
        } else {
            groups.push_back({gt.human, gt.object, {gt.hoi_class}});
        }
    }
    for (GtGroup& g : groups) std::sort(g.classes.begin(), g.classes.end());
    return groups;
}

MatchResult hungarian(const std::vector<std::vector<double>>& cost) {
    if (cost.empty() || cost[0].empty())
        throw ShapeError("hungarian: empty cost matrix");
    const std::size_t n_q = cost.size(), g_count = cost[0].size();
    if (g_count > n_q)
        throw ShapeError("hungarian: more ground truths (" + std::to_string(g_count) +
                         ") than slots (" + std::to_string(n_q) + ")");
    for (const auto& row : cost) {
        if (row.size() != g_count) throw ShapeError("hungarian: ragged cost matrix");
        for (double v : row)
            if (!std::isfinite(v)) throw NumericError("hungarian: non-finite cost");
    }
    // Rows are ground-truth groups, columns are slots.
    std::vector<std::vector<double>> a(g_count, std::vector<double>(n_q));
    for (std::size_t s = 0; s < n_q; ++s)
        for (std::size_t g = 0; g < g_count; ++g) a[g][s] = cost[s][g];
    const double total = assign_total(a);
    const double eps = 1e-9 * std::max(1.0, std::abs(total));

    // Lexicographic refinement: each group in order takes the smallest slot
    // that keeps the total optimal.
    std::vector<int> slot_of(g_count, -1);
    std::vector<bool> taken(n_q, false);
    double fixed = 0.0;
    for (std::size_t g = 0; g < g_count; ++g) {
        for (std::size_t s = 0; s < n_q; ++s) {
            if (taken[s]) continue;
            double rest = 0.0;
            if (g + 1 < g_count) {
                std::vector<std::vector<double>> sub;
                for (std::size_t g2 = g + 1; g2 < g_count; ++g2) {
                    std::vector<double> row;
                    for (std::size_t s2 = 0; s2 < n_q; ++s2)
                        if (!taken[s2] && s2 != s) row.push_back(a[g2][s2]);
                    sub.push_back(std::move(row));
                }
                rest = assign_total(sub);
            }
            if (fixed + a[g][s] + rest <= total + eps) {
                slot_of[g] = static_cast<int>(s);
                taken[s] = true;
                fixed += a[g][s];
                break;
            }
        }
        if (slot_of[g] < 0) throw NumericError("hungarian: refinement failed");
    }

    MatchResult m;
    for (std::size_t g = 0; g < g_count; ++g) {
        m.pairs.push_back({slot_of[g], static_cast<int>(g)});
        m.eta.push_back(a[g][static_cast<std::size_t>(slot_of[g])]);
        m.eta_total += m.eta.back();
    }
    return m;
}

double pair_cost(const Predictions& preds, std::size_t slot, const GtGroup& gt,
                 const std::vector<int>& gt_cols, int gt_object,
                 const CostWeights& w) {
    const Box hb{preds.human_box.at(slot, 0), preds.human_box.at(slot, 1),
                 preds.human_box.at(slot, 2), preds.human_box.at(slot, 3)};
    const Box ob{preds.object_box.at(slot, 0), preds.object_box.at(slot, 1),
                 preds.object_box.at(slot, 2), preds.object_box.at(slot, 3)};
    double l1 = std::abs(hb.cx - gt.human.cx) + std::abs(hb.cy - gt.human.cy) +
                std::abs(hb.w - gt.human.w) + std::abs(hb.h - gt.human.h) +
                std::abs(ob.cx - gt.object.cx) + std::abs(ob.cy - gt.object.cy) +
                std::abs(ob.w - gt.object.w) + std::abs(ob.h - gt.object.h);
    const double u = (1.0 - giou(hb, gt.human)) + (1.0 - giou(ob, gt.object));

    const std::size_t n_obj_cols = preds.obj_logits.cols();
    double mx = preds.obj_logits.at(slot, 0);
    for (std::size_t j = 1; j < n_obj_cols; ++j)
        mx = std::max(mx, preds.obj_logits.at(slot, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n_obj_cols; ++j)
        sum += std::exp(preds.obj_logits.at(slot, j) - mx);
    const double p_obj =
        std::exp(preds.obj_logits.at(slot, static_cast<std::size_t>(gt_object)) - mx) /
        sum;

    double p_cls = 0.0;
    for (int col : gt_cols)
        p_cls += sigmoid_val(preds.hoi_logits.at(slot, static_cast<std::size_t>(col)));
    p_cls /= static_cast<double>(gt_cols.size());

    return w.box * l1 + w.iou * u - w.obj * p_obj - w.cls * p_cls;
}

MatchResult match_scene(const Predictions& preds, const std::vector<GtGroup>& groups,
                        const std::vector<int>& col_of_class, const Taxonomy& tax,
                        const CostWeights& w) {
    const std::size_t n_q = preds.hoi_logits.rows();
    std::vector<std::vector<double>> cost(n_q, std::vector<double>(groups.size()));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<int> cols;
        for (int cls : groups[g].classes) {
            const int col = col_of_class.at(static_cast<std::size_t>(cls));
            if (col < 0)
                throw DataError("match_scene: ground-truth class not in classifier");
            cols.push_back(col);
        }
        const int obj = tax.classes.at(static_cast<std::size_t>(groups[g].classes[0]))
                            .object;
        for (std::size_t s = 0; s < n_q; ++s)
            cost[s][g] = pair_cost(preds, s, groups[g], cols, obj, w);
    }
    return hungarian(cost);
}

Tensor focal_loss(Graph& g, const Tensor& logits, const Tensor& targets,
                  const FocalConfig& f) {
    if (logits.shape() != targets.shape())
        throw ShapeError("focal_loss: logits " + logits.shape_str() +
                         " vs targets mismatch");
    Tensor p = g.sigmoid(logits);
    Tensor q = g.sigmoid(g.neg(logits));  // 1 - p, computed stably
    // -log p = softplus(-x), -log(1-p) = softplus(x)
    Tensor pos = g.scale(g.mul(g.pow_const(q, f.gamma), g.softplus(g.neg(logits))),
                         f.alpha);
    Tensor neg = g.scale(g.mul(g.pow_const(p, f.gamma), g.softplus(logits)),
                         1.0 - f.alpha);
    Tensor anti = g.neg(g.add_const(targets, -1.0));  // 1 - targets
    return g.add(g.mul(targets, pos), g.mul(anti, neg));
}

std::vector<double> beta_factor(const MatchResult& m, std::size_t n_q, double kappa,
                                double eps1) {
    std::vector<double> beta(n_q, 0.0);
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        const auto slot = static_cast<std::size_t>(m.pairs[i].first);
        const double eta = std::max(m.eta[i], 0.0);
        beta[slot] = std::log1p(std::pow(eta + eps1, -kappa));
    }
    return beta;
}

std::vector<std::vector<double>> delta_factor(
    const MatchResult& m, const std::vector<GtGroup>& groups,
    const std::vector<int>& col_class, const OverMatrix& over, const Taxonomy& tax,
    const std::vector<bool>& is_seen, std::size_t n_q) {
    std::vector<std::vector<double>> delta(n_q,
                                           std::vector<double>(col_class.size(), 0.0));
    for (const auto& [slot, gi] : m.pairs) {
        const int obj =
            tax.classes.at(static_cast<std::size_t>(
                               groups[static_cast<std::size_t>(gi)].classes[0]))
                .object;
        for (std::size_t col = 0; col < col_class.size(); ++col) {
            const int action =
                tax.classes.at(static_cast<std::size_t>(col_class[col])).action;
            const int cls = tax.class_of(action, obj);
            if (cls >= 0 && is_seen[static_cast<std::size_t>(cls)])
                delta[static_cast<std::size_t>(slot)][col] =
                    over.at(static_cast<std::size_t>(obj),
                            static_cast<std::size_t>(action));
        }
    }
    return delta;
}

std::vector<std::vector<double>> zeta_factor(
    const std::vector<std::vector<double>>& probs,
    const std::vector<std::vector<double>>& targets,
    const std::vector<bool>& matched) {
    const std::size_t n_q = probs.size();
    std::vector<std::vector<double>> zeta(n_q);
    for (std::size_t s = 0; s < n_q; ++s) {
        const std::size_t w = probs[s].size();
        zeta[s].assign(w, 0.0);
        if (!matched[s]) continue;
        double pos_sum = 0.0;
        std::size_t pos_n = 0;
        for (std::size_t c = 0; c < w; ++c)
            if (targets[s][c] > 0.5) {
                pos_sum += probs[s][c];
                ++pos_n;
            }
        if (pos_n == 0)
            throw DataError("zeta_factor: matched slot has no positive class");
        const double pos_mean = pos_sum / static_cast<double>(pos_n);
        for (std::size_t c = 0; c < w; ++c)
            if (targets[s][c] <= 0.5) zeta[s][c] = probs[s][c] - pos_mean;
    }
    return zeta;
}

std::vector<std::vector<double>> compute_omega(
    const std::vector<double>& beta, const std::vector<std::vector<double>>& delta,
    const std::vector<std::vector<double>>& zeta, const OrdisConfig& cfg) {
    const std::size_t n_q = zeta.size();
    std::vector<std::vector<double>> omega(n_q);
    for (std::size_t s = 0; s < n_q; ++s) {
        const std::size_t w = zeta[s].size();
        omega[s].assign(w, 1.0);
        if (cfg.omega_one) continue;
        const double b = cfg.use_beta ? beta[s] : 0.0;
        for (std::size_t c = 0; c < w; ++c) {
            const double d = cfg.use_delta ? delta[s][c] : 0.0;
            const double z = cfg.use_zeta ? zeta[s][c] : 0.0;
            omega[s][c] = sigmoid_val(b * z / (2.0 + d + cfg.eps2));
        }
    }
    return omega;
}

Tensor ordis_loss(Graph& g, const Tensor& focal,
                  const std::vector<std::vector<double>>& omega) {
    const std::size_t n_q = focal.rows(), w = focal.cols();
    if (omega.size() != n_q || (n_q > 0 && omega[0].size() != w))
        throw ShapeError("ordis_loss: omega extents do not match focal");
    Tensor om = Tensor::zeros({n_q, w});
    for (std::size_t s = 0; s < n_q; ++s)
        for (std::size_t c = 0; c < w; ++c) om.mut(s, c) = omega[s][c];
    return g.sum_all(g.mul(focal, om));
}

namespace {

struct BoxParts {
    Tensor x1, x2, y1, y2, w, h;
};

BoxParts box_parts(Graph& g, const Tensor& boxes, std::size_t slot) {
    Tensor row = g.slice(boxes, 0, slot, slot + 1);  // 1 x 4
    Tensor cx = g.slice(row, 1, 0, 1);
    Tensor cy = g.slice(row, 1, 1, 2);
    Tensor w = g.slice(row, 1, 2, 3);
    Tensor h = g.slice(row, 1, 3, 4);
    BoxParts p;
    p.w = w;
    p.h = h;
    p.x1 = g.add(cx, g.scale(w, -0.5));
    p.x2 = g.add(cx, g.scale(w, 0.5));
    p.y1 = g.add(cy, g.scale(h, -0.5));
    p.y2 = g.add(cy, g.scale(h, 0.5));
    return p;
}

}  // namespace

Tensor l1_box(Graph& g, const Tensor& boxes, std::size_t slot, const Box& gt) {
    Tensor row = g.slice(boxes, 0, slot, slot + 1);
    Tensor tgt = Tensor::from({1, 4}, {gt.cx, gt.cy, gt.w, gt.h});
    return g.sum_all(g.abs(g.sub(row, tgt)));
}

Tensor giou_box(Graph& g, const Tensor& boxes, std::size_t slot, const Box& gt) {
    const BoxParts p = box_parts(g, boxes, slot);
    const double gx1 = gt.cx - gt.w / 2, gx2 = gt.cx + gt.w / 2;
    const double gy1 = gt.cy - gt.h / 2, gy2 = gt.cy + gt.h / 2;
    Tensor iw = g.relu(g.sub(g.min_const(p.x2, gx2), g.max_const(p.x1, gx1)));
    Tensor ih = g.relu(g.sub(g.min_const(p.y2, gy2), g.max_const(p.y1, gy1)));
    Tensor inter = g.mul(iw, ih);
    Tensor uni = g.add_const(g.sub(g.mul(p.w, p.h), inter), gt.w * gt.h);
    Tensor ew = g.sub(g.max_const(p.x2, gx2), g.min_const(p.x1, gx1));
    Tensor eh = g.sub(g.max_const(p.y2, gy2), g.min_const(p.y1, gy1));
    Tensor enc = g.mul(ew, eh);
    // iou - (enc - uni)/enc = iou + uni/enc - 1
    return g.add_const(g.add(g.div(inter, uni), g.div(uni, enc)), -1.0);
}

Tensor object_ce(Graph& g, const Tensor& obj_logits,
                 const std::vector<int>& target_per_slot, double no_object_weight,
                 const std::vector<bool>& matched, double* weight_sum) {
    const std::size_t n_q = obj_logits.rows(), w = obj_logits.cols();
    if (target_per_slot.size() != n_q || matched.size() != n_q)
        throw ShapeError("object_ce: per-slot extents mismatch");
    Tensor logp = g.log_softmax(obj_logits, 1);
    Tensor mask = Tensor::zeros({n_q, w});
    double ws = 0.0;
    for (std::size_t s = 0; s < n_q; ++s) {
        const double wt = matched[s] ? 1.0 : no_object_weight;
        mask.mut(s, static_cast<std::size_t>(target_per_slot[s])) = wt;
        ws += wt;
    }
    if (weight_sum) *weight_sum = ws;
    return g.neg(g.sum_all(g.mul(logp, mask)));
}

}  // namespace fhoi
