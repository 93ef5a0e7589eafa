#include "fhoi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fhoi/serialize.hpp"

namespace fhoi {

namespace {
constexpr char kScenesMagic[4] = {'F', 'H', 'D', 'S'};

double q32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> random_unit_vec(std::size_t dim, SplitMix64& rng) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (double& x : v) {
        x = rng.gaussian();
        norm2 += x * x;
    }
    const double norm = std::sqrt(norm2);
    for (double& x : v) x /= norm;
    return v;
}

// Quantize to f32 and renormalize in f32 space until the stored floats are
// unit within the load tolerance, so FHEB round trips are bit-exact.
std::vector<double> quantize_unit(std::vector<double> v) {
    for (int iter = 0; iter < 4; ++iter) {
        double norm2 = 0.0;
        for (double& x : v) {
            x = q32(x);
            norm2 += x * x;
        }
        const double norm = std::sqrt(norm2);
        if (std::abs(norm - 1.0) <= 1e-6) return v;
        for (double& x : v) x /= norm;
    }
    return v;
}

// Fixed projection from embedding space into backbone channels.
Tensor scene_projection(std::size_t c1, std::size_t d) {
    SplitMix64 rng(0x5EEDC0DEULL ^ (static_cast<std::uint64_t>(c1) * 1000003ULL + d));
    Tensor p = Tensor::zeros({c1, d});
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < c1 * d; ++i) p.mut(i) = rng.gaussian() * s;
    return p;
}

bool inside(const Box& b, double x, double y) {
    return x >= b.cx - b.w / 2 && x <= b.cx + b.w / 2 && y >= b.cy - b.h / 2 &&
           y <= b.cy + b.h / 2;
}

Box sample_box(SplitMix64& rng) {
    Box b;
    b.w = rng.uniform(0.2, 0.5);
    b.h = rng.uniform(0.2, 0.5);
    b.cx = rng.uniform(b.w / 2, 1.0 - b.w / 2);
    b.cy = rng.uniform(b.h / 2, 1.0 - b.h / 2);
    return b;
}

Box quantize_box(const Box& b) { return {q32(b.cx), q32(b.cy), q32(b.w), q32(b.h)}; }

}  // namespace

ZsSetting parse_zs_setting(const std::string& s) {
    if (s == "UC" || s == "uc") return ZsSetting::UC;
    if (s == "RF-UC" || s == "rf-uc") return ZsSetting::RF_UC;
    if (s == "NF-UC" || s == "nf-uc") return ZsSetting::NF_UC;
    if (s == "UO" || s == "uo") return ZsSetting::UO;
    if (s == "UA" || s == "ua") return ZsSetting::UA;
    if (s == "UV" || s == "uv") return ZsSetting::UV;
    throw ConfigError("unknown zero-shot setting: " + s);
}

std::string zs_setting_name(ZsSetting s) {
    switch (s) {
        case ZsSetting::UC: return "UC";
        case ZsSetting::RF_UC: return "RF-UC";
        case ZsSetting::NF_UC: return "NF-UC";
        case ZsSetting::UO: return "UO";
        case ZsSetting::UA: return "UA";
        case ZsSetting::UV: return "UV";
    }
    return "?";
}

GeneratedData gen_taxonomy(std::uint64_t seed, std::size_t n_objects,
                           std::size_t n_actions, std::size_t n_classes,
                           std::size_t dim, double rare_fraction) {
    if (n_objects < 2 || n_actions < 1)
        throw ConfigError("gen_taxonomy: need at least 2 objects and 1 action");
    if (n_classes > n_objects * n_actions)
        throw ConfigError("gen_taxonomy: C exceeds N*M");
    if (dim == 0 || dim % 2 != 0) throw ConfigError("gen_taxonomy: dim must be even");

    SplitMix64 rng(seed);
    GeneratedData out;
    Taxonomy& tax = out.taxonomy;
    tax.person_object_idx = 0;
    tax.objects.push_back("person");
    for (std::size_t i = 1; i < n_objects; ++i)
        tax.objects.push_back("object_" + std::to_string(i));
    for (std::size_t j = 0; j < n_actions; ++j)
        tax.actions.push_back("action_" + std::to_string(j));

    // Sample C distinct (action, object) pairs via a seeded shuffle of the grid.
    std::vector<std::pair<int, int>> grid;
    grid.reserve(n_objects * n_actions);
    for (std::size_t a = 0; a < n_actions; ++a)
        for (std::size_t o = 0; o < n_objects; ++o)
            grid.push_back({static_cast<int>(a), static_cast<int>(o)});
    for (std::size_t i = grid.size(); i > 1; --i)
        std::swap(grid[i - 1], grid[rng.below(i)]);
    grid.resize(n_classes);
    std::sort(grid.begin(), grid.end());
    for (auto [a, o] : grid) tax.classes.push_back({a, o});

    // Power-law training frequencies; the bottom rare_fraction are Rare.
    tax.frequency.resize(n_classes);
    std::vector<std::size_t> order(n_classes);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t rank = 0; rank < n_classes; ++rank) {
        const double f = 1000.0 * std::pow(static_cast<double>(rank + 1), -1.2);
        tax.frequency[order[rank]] = static_cast<int>(f) + 1;
    }
    std::vector<std::size_t> by_freq(n_classes);
    std::iota(by_freq.begin(), by_freq.end(), 0);
    std::sort(by_freq.begin(), by_freq.end(), [&](std::size_t a, std::size_t b) {
        if (tax.frequency[a] != tax.frequency[b])
            return tax.frequency[a] < tax.frequency[b];
        return a < b;
    });
    tax.rare.assign(n_classes, false);
    const auto n_rare = static_cast<std::size_t>(
        std::llround(rare_fraction * static_cast<double>(n_classes)));
    for (std::size_t i = 0; i < std::min(n_rare, n_classes); ++i)
        tax.rare[by_freq[i]] = true;

    // Object embeddings: random unit vectors.
    out.objects.dim = dim;
    for (std::size_t i = 0; i < n_objects; ++i) {
        out.objects.names.push_back(tax.objects[i]);
        out.objects.vecs.push_back(quantize_unit(random_unit_vec(dim, rng)));
        out.objects.prompts.push_back(prompt_object(tax.objects[i]));
    }
    // Action j = normalize(0.5 * mean(paired object embeds) + 0.5 * random unit).
    out.actions.dim = dim;
    for (std::size_t j = 0; j < n_actions; ++j) {
        std::vector<double> mean(dim, 0.0);
        std::size_t count = 0;
        for (const HoiClass& c : tax.classes)
            if (c.action == static_cast<int>(j)) {
                for (std::size_t k = 0; k < dim; ++k)
                    mean[k] += out.objects.vecs[static_cast<std::size_t>(c.object)][k];
                ++count;
            }
        std::vector<double> v = random_unit_vec(dim, rng);
        if (count > 0)
            for (std::size_t k = 0; k < dim; ++k)
                v[k] = 0.5 * mean[k] / static_cast<double>(count) + 0.5 * v[k];
        double norm2 = 0.0;
        for (double x : v) norm2 += x * x;
        const double norm = std::sqrt(norm2);
        for (double& x : v) x /= norm;
        out.actions.names.push_back(tax.actions[j]);
        out.actions.vecs.push_back(quantize_unit(std::move(v)));
        out.actions.prompts.push_back(prompt_action(tax.actions[j]));
    }
    tax.validate();
    return out;
}

Scene gen_scene(const GeneratedData& data, const std::vector<int>& allowed_classes,
                const SceneGenConfig& cfg, SplitMix64& rng) {
    if (allowed_classes.empty())
        throw DataError("gen_scene: allowed class pool is empty");
    const Taxonomy& tax = data.taxonomy;
    const std::size_t d = data.objects.dim;
    const auto side = static_cast<std::size_t>(
        std::llround(std::sqrt(static_cast<double>(cfg.l))));
    if (side * side != cfg.l) throw ConfigError("gen_scene: L must be a perfect square");

    Scene scene;
    const std::size_t n_inter =
        1 + rng.below(std::min<std::uint64_t>(cfg.max_interactions, 3));
    for (std::size_t i = 0; i < n_inter; ++i) {
        const int cls = allowed_classes[rng.below(allowed_classes.size())];
        GroundTruth gt;
        gt.hoi_class = cls;
        gt.human = quantize_box(sample_box(rng));
        // Object box near the human so the pair plausibly interacts.
        Box ob = sample_box(rng);
        ob.cx = std::clamp(gt.human.cx + rng.uniform(-0.25, 0.25), ob.w / 2,
                           1.0 - ob.w / 2);
        ob.cy = std::clamp(gt.human.cy + rng.uniform(-0.25, 0.25), ob.h / 2,
                           1.0 - ob.h / 2);
        gt.object = quantize_box(ob);
        scene.gts.push_back(gt);
        // Occasionally a second action on the same pair.
        if (rng.uniform() < cfg.extra_action_prob) {
            const int obj = tax.classes[static_cast<std::size_t>(cls)].object;
            std::vector<int> others;
            for (int c2 : allowed_classes)
                if (c2 != cls && tax.classes[static_cast<std::size_t>(c2)].object == obj)
                    others.push_back(c2);
            if (!others.empty()) {
                GroundTruth extra = gt;
                extra.hoi_class = others[rng.below(others.size())];
                scene.gts.push_back(extra);
            }
        }
    }

    // Global embedding: person + involved object/action embeddings + noise.
    std::vector<double> vc(d, 0.0);
    const auto& person = data.objects.vecs[static_cast<std::size_t>(tax.person_object_idx)];
    for (std::size_t k = 0; k < d; ++k) vc[k] += person[k];
    for (const GroundTruth& gt : scene.gts) {
        const HoiClass& cls = tax.classes[static_cast<std::size_t>(gt.hoi_class)];
        const auto& ov = data.objects.vecs[static_cast<std::size_t>(cls.object)];
        const auto& av = data.actions.vecs[static_cast<std::size_t>(cls.action)];
        for (std::size_t k = 0; k < d; ++k) vc[k] += ov[k] + av[k];
    }
    for (std::size_t k = 0; k < d; ++k) vc[k] += cfg.sigma * rng.gaussian();
    double norm2 = 0.0;
    for (double x : vc) norm2 += x * x;
    const double norm = std::sqrt(norm2);
    if (norm > 0)
        for (double& x : vc) x /= norm;
    for (double& x : vc) x = q32(x);
    scene.v_c = std::move(vc);

    // Grid features: project embeddings into tokens covered by each box.
    const Tensor proj = scene_projection(cfg.c1, d);
    scene.v_b = Tensor::zeros({cfg.c1, cfg.l});
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t t = r * side + c;
            const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(side);
            const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(side);
            for (const GroundTruth& gt : scene.gts) {
                const HoiClass& cls = tax.classes[static_cast<std::size_t>(gt.hoi_class)];
                if (inside(gt.object, x, y)) {
                    const auto& ov = data.objects.vecs[static_cast<std::size_t>(cls.object)];
                    for (std::size_t ch = 0; ch < cfg.c1; ++ch) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < d; ++k) s += proj.at(ch, k) * ov[k];
                        scene.v_b.mut(ch, t) += s;
                    }
                }
                if (inside(gt.human, x, y)) {
                    for (std::size_t ch = 0; ch < cfg.c1; ++ch) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < d; ++k) s += proj.at(ch, k) * person[k];
                        scene.v_b.mut(ch, t) += s;
                    }
                }
            }
            for (std::size_t ch = 0; ch < cfg.c1; ++ch) {
                scene.v_b.mut(ch, t) =
                    q32(scene.v_b.at(ch, t) + cfg.sigma * rng.gaussian());
            }
        }
    return scene;
}

ZsSplit zs_split(const Taxonomy& tax, ZsSetting setting, std::uint64_t seed,
                 const std::vector<int>& unseen_objects,
                 const std::vector<int>& unseen_verbs) {
    const std::size_t c = tax.num_classes();
    const auto target_u = static_cast<std::size_t>(
        std::llround(0.2 * static_cast<double>(c)));
    ZsSplit split;
    split.setting = setting;
    split.is_seen.assign(c, true);
    SplitMix64 rng(seed);

    auto mark_unseen = [&](std::size_t cls) { split.is_seen[cls] = false; };

    switch (setting) {
        case ZsSetting::UC: {
            std::vector<std::size_t> ids(c);
            std::iota(ids.begin(), ids.end(), 0);
            for (std::size_t i = ids.size(); i > 1; --i)
                std::swap(ids[i - 1], ids[rng.below(i)]);
            for (std::size_t i = 0; i < target_u; ++i) mark_unseen(ids[i]);
            break;
        }
        case ZsSetting::RF_UC:
        case ZsSetting::NF_UC: {
            if (tax.frequency.size() != c)
                throw DataError("zs_split: taxonomy has no class frequencies");
            std::vector<std::size_t> ids(c);
            std::iota(ids.begin(), ids.end(), 0);
            const bool rare_first = setting == ZsSetting::RF_UC;
            std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
                if (tax.frequency[a] != tax.frequency[b])
                    return rare_first ? tax.frequency[a] < tax.frequency[b]
                                      : tax.frequency[a] > tax.frequency[b];
                return a < b;
            });
            for (std::size_t i = 0; i < target_u; ++i) mark_unseen(ids[i]);
            break;
        }
        case ZsSetting::UO: {
            std::vector<int> objs = unseen_objects;
            if (objs.empty()) {
                std::vector<int> pool;
                for (std::size_t o = 0; o < tax.num_objects(); ++o)
                    if (static_cast<int>(o) != tax.person_object_idx)
                        pool.push_back(static_cast<int>(o));
                for (std::size_t i = pool.size(); i > 1; --i)
                    std::swap(pool[i - 1], pool[rng.below(i)]);
                std::size_t unseen_count = 0;
                for (int o : pool) {
                    if (unseen_count >= target_u) break;
                    objs.push_back(o);
                    for (const HoiClass& cls : tax.classes)
                        if (cls.object == o) ++unseen_count;
                }
            }
            for (int o : objs)
                if (o == tax.person_object_idx)
                    throw ConfigError("zs_split: person cannot be an unseen object");
            for (std::size_t i = 0; i < c; ++i)
                if (std::find(objs.begin(), objs.end(), tax.classes[i].object) !=
                    objs.end())
                    mark_unseen(i);
            split.unseen_objects = objs;
            std::sort(split.unseen_objects.begin(), split.unseen_objects.end());
            break;
        }
        case ZsSetting::UA:
        case ZsSetting::UV: {
            std::vector<int> verbs = unseen_verbs;
            if (verbs.empty()) {
                std::vector<int> pool;
                for (std::size_t a = 0; a < tax.num_actions(); ++a)
                    pool.push_back(static_cast<int>(a));
                for (std::size_t i = pool.size(); i > 1; --i)
                    std::swap(pool[i - 1], pool[rng.below(i)]);
                std::size_t unseen_count = 0;
                for (int a : pool) {
                    if (unseen_count >= target_u) break;
                    verbs.push_back(a);
                    for (const HoiClass& cls : tax.classes)
                        if (cls.action == a) ++unseen_count;
                }
            }
            for (std::size_t i = 0; i < c; ++i)
                if (std::find(verbs.begin(), verbs.end(), tax.classes[i].action) !=
                    verbs.end())
                    mark_unseen(i);
            split.unseen_verbs = verbs;
            std::sort(split.unseen_verbs.begin(), split.unseen_verbs.end());
            break;
        }
    }

    for (std::size_t i = 0; i < c; ++i)
        (split.is_seen[i] ? split.seen : split.unseen).push_back(static_cast<int>(i));
    if (split.seen.empty() || split.unseen.empty())
        throw DataError("zs_split: degenerate split (seen or unseen set empty)");
    return split;
}

void save_scenes(const std::string& path, const std::vector<Scene>& scenes,
                 std::size_t c1, std::size_t l, std::size_t d) {
    BinWriter w(path);
    w.magic(kScenesMagic);
    w.u32(static_cast<std::uint32_t>(scenes.size()));
    w.u32(static_cast<std::uint32_t>(c1));
    w.u32(static_cast<std::uint32_t>(l));
    w.u32(static_cast<std::uint32_t>(d));
    for (const Scene& s : scenes) {
        if (s.v_b.rows() != c1 || s.v_b.cols() != l || s.v_c.size() != d)
            throw DataError("save_scenes: scene extents do not match header");
        for (double v : s.v_b.data()) w.f32(static_cast<float>(v));
        for (double v : s.v_c) w.f32(static_cast<float>(v));
        if (s.gts.size() > 0xffff) throw DataError("save_scenes: too many ground truths");
        w.u16(static_cast<std::uint16_t>(s.gts.size()));
        for (const GroundTruth& gt : s.gts) {
            for (double v : {gt.human.cx, gt.human.cy, gt.human.w, gt.human.h,
                             gt.object.cx, gt.object.cy, gt.object.w, gt.object.h})
                w.f32(static_cast<float>(v));
            w.u16(static_cast<std::uint16_t>(gt.hoi_class));
        }
    }
    w.close();
}

std::vector<Scene> load_scenes(const std::string& path, std::size_t* c1_out,
                               std::size_t* l_out, std::size_t* d_out) {
    BinReader r(path);
    r.expect_magic(kScenesMagic);
    const std::uint32_t count = r.u32();
    const std::size_t c1 = r.u32(), l = r.u32(), d = r.u32();
    if (c1 == 0 || l == 0 || d == 0) throw FormatError("FHDS: zero extents");
    if (c1_out) *c1_out = c1;
    if (l_out) *l_out = l;
    if (d_out) *d_out = d;
    std::vector<Scene> scenes;
    scenes.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Scene s;
        s.v_b = Tensor::zeros({c1, l});
        for (std::size_t k = 0; k < c1 * l; ++k) s.v_b.mut(k) = r.f32();
        s.v_c.resize(d);
        for (std::size_t k = 0; k < d; ++k) s.v_c[k] = r.f32();
        const std::uint16_t n_gt = r.u16();
        for (std::uint16_t gi = 0; gi < n_gt; ++gi) {
            GroundTruth gt;
            gt.human.cx = r.f32();
            gt.human.cy = r.f32();
            gt.human.w = r.f32();
            gt.human.h = r.f32();
            gt.object.cx = r.f32();
            gt.object.cy = r.f32();
            gt.object.w = r.f32();
            gt.object.h = r.f32();
            gt.hoi_class = r.u16();
            s.gts.push_back(gt);
        }
        scenes.push_back(std::move(s));
    }
    return scenes;
}

EvalReport hoi_map(const std::vector<EvalDetection>& detections,
                   const std::vector<Scene>& scenes, const ZsSplit& split) {
    const std::size_t c = split.is_seen.size();
    // Ground truths per (class, scene).
    std::vector<std::size_t> npos(c, 0);
    for (const Scene& s : scenes)
        for (const GroundTruth& gt : s.gts) {
            if (gt.hoi_class < 0 || static_cast<std::size_t>(gt.hoi_class) >= c)
                throw DataError("hoi_map: ground-truth class out of range");
            ++npos[static_cast<std::size_t>(gt.hoi_class)];
        }

    EvalReport rep;
    rep.per_class_ap.assign(c, -1.0);
    for (std::size_t cls = 0; cls < c; ++cls) {
        if (npos[cls] == 0) continue;
        std::vector<const EvalDetection*> dets;
        for (const EvalDetection& d : detections)
            if (d.hoi_class == static_cast<int>(cls)) dets.push_back(&d);
        std::stable_sort(dets.begin(), dets.end(),
                         [](const EvalDetection* a, const EvalDetection* b) {
                             return a->score > b->score;
                         });
        // Greedy TP assignment by descending score; each GT consumed once.
        std::vector<std::vector<bool>> consumed(scenes.size());
        for (std::size_t s = 0; s < scenes.size(); ++s)
            consumed[s].assign(scenes[s].gts.size(), false);
        std::vector<int> tp(dets.size(), 0);
        for (std::size_t i = 0; i < dets.size(); ++i) {
            const EvalDetection& d = *dets[i];
            if (d.scene < 0 || static_cast<std::size_t>(d.scene) >= scenes.size())
                throw DataError("hoi_map: detection scene index out of range");
            const Scene& sc = scenes[static_cast<std::size_t>(d.scene)];
            double best = -1.0;
            int best_g = -1;
            for (std::size_t gidx = 0; gidx < sc.gts.size(); ++gidx) {
                const GroundTruth& gt = sc.gts[gidx];
                if (gt.hoi_class != static_cast<int>(cls)) continue;
                if (consumed[static_cast<std::size_t>(d.scene)][gidx]) continue;
                const double ih = iou(d.human, gt.human);
                const double io = iou(d.object, gt.object);
                if (ih >= 0.5 && io >= 0.5 && ih + io > best) {
                    best = ih + io;
                    best_g = static_cast<int>(gidx);
                }
            }
            if (best_g >= 0) {
                tp[i] = 1;
                consumed[static_cast<std::size_t>(d.scene)][static_cast<std::size_t>(
                    best_g)] = true;
            }
        }
        // All-point interpolated AP.
        double ap = 0.0;
        std::size_t tp_sum = 0;
        std::vector<double> precision(dets.size()), recall(dets.size());
        for (std::size_t i = 0; i < dets.size(); ++i) {
            tp_sum += static_cast<std::size_t>(tp[i]);
            precision[i] = static_cast<double>(tp_sum) / static_cast<double>(i + 1);
            recall[i] = static_cast<double>(tp_sum) / static_cast<double>(npos[cls]);
        }
        // Precision envelope from the right.
        for (std::size_t i = dets.size(); i-- > 1;)
            precision[i - 1] = std::max(precision[i - 1], precision[i]);
        double prev_recall = 0.0;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (recall[i] > prev_recall) {
                ap += (recall[i] - prev_recall) * precision[i];
                prev_recall = recall[i];
            }
        }
        rep.per_class_ap[cls] = ap;
    }

    auto mean_over = [&](const std::vector<int>& ids) {
        double sum = 0.0;
        std::size_t n = 0;
        for (int id : ids)
            if (rep.per_class_ap[static_cast<std::size_t>(id)] >= 0.0) {
                sum += rep.per_class_ap[static_cast<std::size_t>(id)];
                ++n;
            }
        return n > 0 ? sum / static_cast<double>(n) : 0.0;
    };
    rep.map_seen = mean_over(split.seen);
    rep.map_unseen = mean_over(split.unseen);
    std::vector<int> all;
    all.insert(all.end(), split.seen.begin(), split.seen.end());
    all.insert(all.end(), split.unseen.begin(), split.unseen.end());
    rep.map_full = mean_over(all);
    return rep;
}

}  // namespace fhoi
