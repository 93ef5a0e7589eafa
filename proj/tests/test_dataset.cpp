#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "fhoi/dataset.hpp"
#include "fhoi/nominators.hpp"

namespace {

#define REQUIRE(cond, msg)                                                      \
    do {                                                                        \
        if (!(cond)) {                                                          \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << msg \
                      << "\n";                                                  \
            std::exit(1);                                                       \
        }                                                                       \
    } while (0)

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

using fhoi::Box;
using fhoi::EvalDetection;
using fhoi::Scene;
using fhoi::SplitMix64;
using fhoi::Taxonomy;
using fhoi::ZsSetting;
using fhoi::ZsSplit;

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

// Reference-scale synthetic taxonomy: 600 classes over 80 objects and 117
// actions, with the 12 objects after person covering exactly 100 classes and
// the 138 lowest-frequency classes flagged rare.
Taxonomy big_taxonomy() {
    Taxonomy t;
    for (int o = 0; o < 80; ++o)
        t.objects.push_back(o == 0 ? "person" : "obj" + std::to_string(o));
    for (int a = 0; a < 117; ++a) t.actions.push_back("act" + std::to_string(a));
    t.person_object_idx = 0;

    auto count_for = [](int o) -> int {
        if (o >= 1 && o <= 4) return 9;
        if (o >= 5 && o <= 12) return 8;   // objects 1..12 cover 36 + 64 = 100
        if (o >= 13 && o <= 43) return 8;  // 31 * 8 = 248
        return 7;                          // 36 * 7 = 252
    };
    for (int o = 1; o < 80; ++o) {
        const int k = count_for(o);
        const int offset = (o * 13) % (117 - k);
        for (int j = 0; j < k; ++j) t.classes.push_back({offset + j, o});
    }
    const std::size_t c = t.classes.size();
    for (std::size_t i = 0; i < c; ++i) {
        t.rare.push_back(i < 138);
        t.frequency.push_back(i < 138 ? static_cast<int>(i) + 1
                                      : static_cast<int>(i) + 1000);
    }
    t.validate();
    return t;
}

void test_gen_determinism() {
    fhoi::GeneratedData a = fhoi::gen_taxonomy(5, 8, 6, 20, 16, 0.25);
    fhoi::GeneratedData b = fhoi::gen_taxonomy(5, 8, 6, 20, 16, 0.25);
    REQUIRE(a.taxonomy.objects == b.taxonomy.objects, "taxonomy reproducible");
    for (std::size_t i = 0; i < a.objects.size(); ++i)
        REQUIRE(a.objects.vecs[i] == b.objects.vecs[i], "object vectors reproducible");
    for (std::size_t i = 0; i < a.actions.size(); ++i)
        REQUIRE(a.actions.vecs[i] == b.actions.vecs[i], "action vectors reproducible");
    REQUIRE(a.taxonomy.frequency == b.taxonomy.frequency, "frequencies reproducible");

    fhoi::GeneratedData cdiff = fhoi::gen_taxonomy(6, 8, 6, 20, 16, 0.25);
    REQUIRE(cdiff.objects.vecs[1] != a.objects.vecs[1], "seed changes the draw");

    bool threw = false;
    try {
        fhoi::gen_taxonomy(1, 3, 3, 10, 16, 0.25);
    } catch (const fhoi::ConfigError&) {
        threw = true;
    }
    REQUIRE(threw, "C > N*M rejected");
}

void test_taxonomy_structure() {
    fhoi::GeneratedData d = fhoi::gen_taxonomy(9, 10, 8, 30, 16, 0.3);
    const Taxonomy& t = d.taxonomy;
    REQUIRE(t.num_classes() == 30, "requested class count");
    REQUIRE(t.objects[0] == "person" && t.person_object_idx == 0, "person is object 0");
    std::size_t rare_count = 0;
    for (bool r : t.rare) rare_count += r ? 1 : 0;
    REQUIRE(rare_count == static_cast<std::size_t>(std::llround(0.3 * 30)),
            "rare fraction honored");
    std::set<std::pair<int, int>> uniq;
    for (const fhoi::HoiClass& c : t.classes)
        REQUIRE(uniq.insert({c.action, c.object}).second, "class pairs distinct");

    // Paired (action, object) relatedness exceeds unpaired on average; the
    // action embeddings are pulled toward their objects' mean.
    double paired_gap = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        fhoi::GeneratedData g = fhoi::gen_taxonomy(seed, 10, 8, 30, 16, 0.3);
        fhoi::OverMatrix over = fhoi::over_matrix(g.objects, g.actions);
        double paired = 0, unpaired = 0;
        std::size_t np = 0, nu = 0;
        for (std::size_t o = 0; o < over.n; ++o)
            for (std::size_t a = 0; a < over.m; ++a) {
                if (g.taxonomy.class_of(static_cast<int>(a), static_cast<int>(o)) >= 0) {
                    paired += over.at(o, a);
                    ++np;
                } else {
                    unpaired += over.at(o, a);
                    ++nu;
                }
            }
        paired_gap += paired / static_cast<double>(np) -
                      unpaired / static_cast<double>(nu);
    }
    REQUIRE(paired_gap / 20.0 > 0.0, "mean OVeR gap favors true pairs");
}

void test_scene_generation() {
    fhoi::GeneratedData d = fhoi::gen_taxonomy(3, 8, 6, 20, 16, 0.25);
    fhoi::SceneGenConfig cfg;
    cfg.c1 = 8;
    cfg.l = 16;
    cfg.sigma = 0.05;
    std::vector<int> allowed = {0, 2, 5, 7, 11};

    SplitMix64 rng(77);
    Scene s = fhoi::gen_scene(d, allowed, cfg, rng);
    REQUIRE(s.v_b.rows() == 8 && s.v_b.cols() == 16, "V_b is C1 x L");
    REQUIRE(s.v_c.size() == 16, "V_c matches the embedding dim");
    REQUIRE(!s.gts.empty() && s.gts.size() <= 2 * cfg.max_interactions,
            "interaction count in range");
    for (const fhoi::GroundTruth& gt : s.gts) {
        REQUIRE(std::find(allowed.begin(), allowed.end(), gt.hoi_class) != allowed.end(),
                "classes drawn from the allowed pool");
        for (const Box& b : {gt.human, gt.object}) {
            REQUIRE(b.cx - b.w / 2 >= -1e-9 && b.cx + b.w / 2 <= 1.0 + 1e-9,
                    "box inside the unit frame (x)");
            REQUIRE(b.cy - b.h / 2 >= -1e-9 && b.cy + b.h / 2 <= 1.0 + 1e-9,
                    "box inside the unit frame (y)");
            REQUIRE(b.w > 0 && b.h > 0, "positive extent");
        }
    }

    SplitMix64 r1(123), r2(123);
    Scene a = fhoi::gen_scene(d, allowed, cfg, r1);
    Scene b = fhoi::gen_scene(d, allowed, cfg, r2);
    REQUIRE(a.v_b.data() == b.v_b.data() && a.v_c == b.v_c, "scene gen reproducible");

    // Noise-free scenes put each ground-truth object (or person) in the
    // object shortlist.
    fhoi::SceneGenConfig clean = cfg;
    clean.sigma = 0.0;
    clean.max_interactions = 1;
    SplitMix64 r3(5);
    std::size_t hits = 0, total = 0;
    for (int i = 0; i < 50; ++i) {
        Scene sc = fhoi::gen_scene(d, allowed, clean, r3);
        fhoi::ObjectNomination nom = fhoi::nominate_objects(
            d.objects, sc.v_c, 5, d.taxonomy.person_object_idx);
        for (const fhoi::GroundTruth& gt : sc.gts) {
            const int obj = d.taxonomy.classes[static_cast<std::size_t>(gt.hoi_class)]
                                .object;
            ++total;
            if (std::find(nom.indices.begin(), nom.indices.end(), obj) !=
                nom.indices.end())
                ++hits;
        }
    }
    REQUIRE(hits == total, "noise-free object recall@5 is 1.0 (" << hits << "/"
                                                                 << total << ")");
}

void check_partition(const ZsSplit& split, std::size_t c) {
    REQUIRE(split.seen.size() + split.unseen.size() == c, "seen/unseen exhaustive");
    std::set<int> all(split.seen.begin(), split.seen.end());
    all.insert(split.unseen.begin(), split.unseen.end());
    REQUIRE(all.size() == c, "seen/unseen disjoint");
    for (int id : split.seen) REQUIRE(split.is_seen[static_cast<std::size_t>(id)], "flag agrees");
    for (int id : split.unseen)
        REQUIRE(!split.is_seen[static_cast<std::size_t>(id)], "flag agrees");
    REQUIRE(std::is_sorted(split.seen.begin(), split.seen.end()), "seen ascending");
    REQUIRE(std::is_sorted(split.unseen.begin(), split.unseen.end()), "unseen ascending");
}

void test_splits() {
    Taxonomy t = big_taxonomy();
    REQUIRE(t.num_classes() == 600, "reference-scale class count");

    for (ZsSetting s : {ZsSetting::UC, ZsSetting::RF_UC, ZsSetting::NF_UC}) {
        ZsSplit split = fhoi::zs_split(t, s, 11);
        check_partition(split, 600);
        REQUIRE(split.seen.size() == 480 && split.unseen.size() == 120,
                "class splits hold out 20 percent (480/120)");
    }
    {
        // Rare-first: the held-out classes are exactly the lowest frequencies.
        ZsSplit rf = fhoi::zs_split(t, ZsSetting::RF_UC, 11);
        for (int id : rf.unseen)
            REQUIRE(t.rare[static_cast<std::size_t>(id)],
                    "RF unseen classes are rare");
        REQUIRE(rf.unseen.front() == 0 && rf.unseen.back() == 119,
                "RF takes the 120 least frequent");
    }
    {
        ZsSplit nf = fhoi::zs_split(t, ZsSetting::NF_UC, 11);
        for (int id : nf.unseen)
            REQUIRE(!t.rare[static_cast<std::size_t>(id)],
                    "NF unseen classes are frequent");
        REQUIRE(nf.unseen.front() == 480 && nf.unseen.back() == 599,
                "NF takes the 120 most frequent");
    }
    {
        // UC is seeded and reproducible.
        ZsSplit a = fhoi::zs_split(t, ZsSetting::UC, 7);
        ZsSplit b = fhoi::zs_split(t, ZsSetting::UC, 7);
        ZsSplit c = fhoi::zs_split(t, ZsSetting::UC, 8);
        REQUIRE(a.unseen == b.unseen, "UC reproducible");
        REQUIRE(a.unseen != c.unseen, "UC seed-dependent");
    }
    {
        std::vector<int> objs;
        for (int o = 1; o <= 12; ++o) objs.push_back(o);
        ZsSplit uo = fhoi::zs_split(t, ZsSetting::UO, 1, objs);
        check_partition(uo, 600);
        REQUIRE(uo.seen.size() == 500 && uo.unseen.size() == 100,
                "12 unseen objects induce a 500/100 split");
        REQUIRE(uo.unseen_objects == objs, "object list recorded");
        for (int id : uo.unseen)
            REQUIRE(t.classes[static_cast<std::size_t>(id)].object <= 12,
                    "unseen classes use held-out objects");

        bool threw = false;
        try {
            fhoi::zs_split(t, ZsSetting::UO, 1, {0});
        } catch (const fhoi::ConfigError&) {
            threw = true;
        }
        REQUIRE(threw, "person cannot be held out");
    }
    {
        std::vector<int> uv_list, ua_list;
        for (int v = 0; v < 20; ++v) uv_list.push_back(v);
        for (int v = 30; v < 52; ++v) ua_list.push_back(v);
        ZsSplit uv = fhoi::zs_split(t, ZsSetting::UV, 1, {}, uv_list);
        ZsSplit ua = fhoi::zs_split(t, ZsSetting::UA, 1, {}, ua_list);
        check_partition(uv, 600);
        check_partition(ua, 600);
        REQUIRE(uv.unseen_verbs.size() == 20, "UV holds out 20 verbs");
        REQUIRE(ua.unseen_verbs.size() == 22, "UA holds out 22 verbs");
        for (int id : uv.unseen)
            REQUIRE(t.classes[static_cast<std::size_t>(id)].action < 20,
                    "UV unseen classes use held-out verbs");
        for (std::size_t i = 0; i < 600; ++i) {
            const int act = t.classes[i].action;
            const bool held = act >= 30 && act < 52;
            REQUIRE(ua.is_seen[i] == !held, "UA membership is verb-induced");
        }
    }
}

void test_scene_serialization() {
    fhoi::GeneratedData d = fhoi::gen_taxonomy(4, 8, 6, 20, 16, 0.25);
    fhoi::SceneGenConfig cfg;
    cfg.c1 = 8;
    cfg.l = 16;
    SplitMix64 rng(9);
    std::vector<int> allowed(20);
    for (int i = 0; i < 20; ++i) allowed[static_cast<std::size_t>(i)] = i;
    std::vector<Scene> scenes;
    for (int i = 0; i < 5; ++i) scenes.push_back(fhoi::gen_scene(d, allowed, cfg, rng));

    const std::string p1 = "/tmp/fhoi_ds1.fhds", p2 = "/tmp/fhoi_ds2.fhds";
    fhoi::save_scenes(p1, scenes, 8, 16, 16);
    std::size_t c1 = 0, l = 0, dim = 0;
    std::vector<Scene> back = fhoi::load_scenes(p1, &c1, &l, &dim);
    REQUIRE(c1 == 8 && l == 16 && dim == 16, "header extents round trip");
    REQUIRE(back.size() == scenes.size(), "scene count round trip");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        REQUIRE(back[i].v_b.data() == scenes[i].v_b.data(), "V_b bit-exact");
        REQUIRE(back[i].v_c == scenes[i].v_c, "V_c bit-exact");
        REQUIRE(back[i].gts.size() == scenes[i].gts.size(), "GT count");
        for (std::size_t j = 0; j < back[i].gts.size(); ++j)
            REQUIRE(back[i].gts[j].hoi_class == scenes[i].gts[j].hoi_class &&
                        back[i].gts[j].human.cx == scenes[i].gts[j].human.cx &&
                        back[i].gts[j].object.w == scenes[i].gts[j].object.w,
                    "GT fields bit-exact");
    }
    fhoi::save_scenes(p2, back, 8, 16, 16);
    REQUIRE(slurp(p1) == slurp(p2), "rewrite is byte-identical");

    std::string bytes = slurp(p1);
    std::ofstream os(p1, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    os.close();
    bool threw = false;
    try {
        fhoi::load_scenes(p1);
    } catch (const fhoi::FormatError&) {
        threw = true;
    }
    REQUIRE(threw, "truncated scene file rejected");
}

void test_iou_values() {
    Box a{1.0, 1.0, 2.0, 2.0};
    Box b{2.0, 1.0, 2.0, 2.0};
    REQUIRE(near(fhoi::iou(a, b), 1.0 / 3.0, 1e-15), "half-overlap IoU is 1/3");
    REQUIRE(fhoi::iou(a, a) == 1.0, "self IoU is 1");
    Box far{9.0, 9.0, 1.0, 1.0};
    REQUIRE(fhoi::iou(a, far) == 0.0, "disjoint IoU is 0");
    REQUIRE(fhoi::giou(a, a) == 1.0, "self GIoU is 1");
    REQUIRE(fhoi::giou(a, far) < 0.0, "disjoint GIoU negative");
}

// Independent AP: explicit PR points, area under the interpolated curve.
double ap_oracle(std::vector<std::pair<double, bool>> dets, std::size_t npos) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (!dets[i].second) continue;
        ++tp;
        const double r = static_cast<double>(tp) / static_cast<double>(npos);
        const double r_prev =
            static_cast<double>(tp - 1) / static_cast<double>(npos);
        // max precision at recall >= r
        double pmax = 0;
        std::size_t tp2 = 0;
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (dets[j].second) ++tp2;
            const double rec = static_cast<double>(tp2) / static_cast<double>(npos);
            const double prec =
                static_cast<double>(tp2) / static_cast<double>(j + 1);
            if (rec >= r) pmax = std::max(pmax, prec);
        }
        ap += (r - r_prev) * pmax;
    }
    return ap;
}

Scene scene_with_gts(std::vector<fhoi::GroundTruth> gts) {
    Scene s;
    s.v_b = fhoi::Tensor::zeros({1, 1});
    s.v_c = {0.0};
    s.gts = std::move(gts);
    return s;
}

ZsSplit trivial_split(std::size_t c) {
    ZsSplit sp;
    sp.is_seen.assign(c, true);
    sp.is_seen[c - 1] = false;
    for (std::size_t i = 0; i + 1 < c; ++i) sp.seen.push_back(static_cast<int>(i));
    sp.unseen.push_back(static_cast<int>(c - 1));
    return sp;
}

void test_map_examples() {
    const Box g1{0.5, 0.5, 0.2, 0.2};
    const Box g2{0.2, 0.2, 0.2, 0.2};
    {
        // Single perfect detection: AP 1.
        std::vector<Scene> scenes = {scene_with_gts({{g1, g2, 0}})};
        std::vector<EvalDetection> dets = {{0, 0, 0.9, g1, g2}};
        fhoi::EvalReport rep = fhoi::hoi_map(dets, scenes, trivial_split(2));
        REQUIRE(near(rep.per_class_ap[0], 1.0, 1e-15), "perfect detection AP 1");
        REQUIRE(rep.per_class_ap[1] == -1.0, "class without GT marked -1");
        REQUIRE(near(rep.map_seen, 1.0, 1e-15) && rep.map_unseen == 0.0,
                "per-split means skip empty classes");
    }
    {
        // Higher-scored miss then a hit: AP 0.5.
        const Box off{0.9, 0.9, 0.05, 0.05};
        std::vector<Scene> scenes = {scene_with_gts({{g1, g2, 0}})};
        std::vector<EvalDetection> dets = {{0, 0, 0.9, off, off},
                                           {0, 0, 0.4, g1, g2}};
        fhoi::EvalReport rep = fhoi::hoi_map(dets, scenes, trivial_split(2));
        REQUIRE(near(rep.per_class_ap[0], 0.5, 1e-15),
                "miss-then-hit AP is exactly 0.5");
    }
    {
        // Duplicate detections of one GT: the second is a false positive.
        std::vector<Scene> scenes = {scene_with_gts({{g1, g2, 0}})};
        std::vector<EvalDetection> dets = {{0, 0, 0.9, g1, g2}, {0, 0, 0.8, g1, g2}};
        fhoi::EvalReport rep = fhoi::hoi_map(dets, scenes, trivial_split(2));
        REQUIRE(near(rep.per_class_ap[0], 1.0, 1e-15),
                "duplicate does not change AP once recall is saturated");
    }
}

void test_map_brute_force() {
    SplitMix64 rng(909);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n_cls = 1 + rng.below(3);
        const std::size_t n_scenes = 1 + rng.below(2);
        std::vector<Scene> scenes;
        for (std::size_t s = 0; s < n_scenes; ++s) {
            std::vector<fhoi::GroundTruth> gts;
            const std::size_t n_gt = 1 + rng.below(3);
            for (std::size_t i = 0; i < n_gt; ++i) {
                Box h{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 0.3, 0.3};
                Box o{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 0.3, 0.3};
                gts.push_back({h, o, static_cast<int>(rng.below(n_cls))});
            }
            scenes.push_back(scene_with_gts(gts));
        }
        std::vector<EvalDetection> dets;
        const std::size_t n_det = rng.below(11);  // at most 10
        for (std::size_t i = 0; i < n_det; ++i) {
            EvalDetection d;
            d.scene = static_cast<int>(rng.below(n_scenes));
            d.hoi_class = static_cast<int>(rng.below(n_cls));
            d.score = rng.uniform(0.0, 1.0);
            d.human = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 0.3, 0.3};
            d.object = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 0.3, 0.3};
            dets.push_back(d);
        }
        ZsSplit sp = trivial_split(n_cls + 1);

        fhoi::EvalReport rep = fhoi::hoi_map(dets, scenes, sp);
        for (std::size_t cls = 0; cls < n_cls; ++cls) {
            // Re-run the greedy matching independently, then hand the
            // TP/FP labels to the PR-area oracle.
            std::vector<const EvalDetection*> mine;
            for (const EvalDetection& d : dets)
                if (d.hoi_class == static_cast<int>(cls)) mine.push_back(&d);
            std::stable_sort(mine.begin(), mine.end(),
                             [](const EvalDetection* a, const EvalDetection* b) {
                                 return a->score > b->score;
                             });
            std::vector<std::set<std::size_t>> used(n_scenes);
            std::vector<std::pair<double, bool>> labeled;
            std::size_t npos = 0;
            for (const Scene& s : scenes)
                for (const fhoi::GroundTruth& gt : s.gts)
                    if (gt.hoi_class == static_cast<int>(cls)) ++npos;
            for (const EvalDetection* d : mine) {
                const Scene& s = scenes[static_cast<std::size_t>(d->scene)];
                double best = -1;
                int pick = -1;
                for (std::size_t gi = 0; gi < s.gts.size(); ++gi) {
                    if (s.gts[gi].hoi_class != static_cast<int>(cls)) continue;
                    if (used[static_cast<std::size_t>(d->scene)].count(gi)) continue;
                    const double ih = fhoi::iou(d->human, s.gts[gi].human);
                    const double io = fhoi::iou(d->object, s.gts[gi].object);
                    if (ih >= 0.5 && io >= 0.5 && ih + io > best) {
                        best = ih + io;
                        pick = static_cast<int>(gi);
                    }
                }
                if (pick >= 0) used[static_cast<std::size_t>(d->scene)].insert(
                    static_cast<std::size_t>(pick));
                labeled.push_back({d->score, pick >= 0});
            }
            if (npos == 0) {
                REQUIRE(rep.per_class_ap[cls] == -1.0, "no-GT class stays -1");
                continue;
            }
            const double want = ap_oracle(labeled, npos);
            REQUIRE(near(rep.per_class_ap[cls], want, 1e-12),
                    "AP matches the brute-force PR area, trial " << trial);
        }

        // Detection order must not matter.
        std::vector<EvalDetection> shuffled = dets;
        std::reverse(shuffled.begin(), shuffled.end());
        fhoi::EvalReport rep2 = fhoi::hoi_map(shuffled, scenes, sp);
        for (std::size_t cls = 0; cls < n_cls; ++cls)
            REQUIRE(near(rep.per_class_ap[cls], rep2.per_class_ap[cls], 1e-12) ||
                        (rep.per_class_ap[cls] == -1 && rep2.per_class_ap[cls] == -1),
                    "input order invariance");
    }
}

}  // namespace

int main() {
    test_gen_determinism();
    test_taxonomy_structure();
    test_scene_generation();
    test_splits();
    test_scene_serialization();
    test_iou_values();
    test_map_examples();
    test_map_brute_force();
    std::cout << "test_dataset: all checks passed\n";
    return 0;
}
