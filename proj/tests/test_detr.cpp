#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fhoi/detr.hpp"

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

using fhoi::Graph;
using fhoi::ModelParams;
using fhoi::PredictMode;
using fhoi::SplitMix64;
using fhoi::StackConfig;
using fhoi::Tensor;

StackConfig small_cfg() {
    StackConfig cfg;
    cfg.c1 = 4;
    cfg.c2 = 2;
    cfg.d = 8;
    cfg.l = 4;
    cfg.n_q = 2;
    cfg.heads = 2;
    cfg.enc_layers = 1;
    cfg.inst_dec_layers = 1;
    cfg.inter_dec_layers = 1;
    cfg.ffn_dim = 8;
    return cfg;
}

void test_config_validation() {
    StackConfig cfg = small_cfg();
    cfg.validate();

    StackConfig bad = cfg;
    bad.d = 9;
    bool threw = false;
    try {
        bad.validate();
    } catch (const fhoi::ConfigError&) {
        threw = true;
    }
    REQUIRE(threw, "d must equal 2*C1");

    bad = cfg;
    bad.l = 5;
    threw = false;
    try {
        bad.validate();
    } catch (const fhoi::ConfigError&) {
        threw = true;
    }
    REQUIRE(threw, "L must be a perfect square");

    bad = cfg;
    bad.heads = 3;
    threw = false;
    try {
        bad.validate();
    } catch (const fhoi::ConfigError&) {
        threw = true;
    }
    REQUIRE(threw, "heads must divide C1");
}

void test_attention_rows() {
    StackConfig cfg = small_cfg();
    ModelParams p = ModelParams::init(cfg, 5, 7);
    SplitMix64 rng(2);
    Tensor v_b = Tensor::uniform({cfg.c1, cfg.l}, -1, 1, rng);

    std::vector<Tensor> maps;
    fhoi::AttnProbe probe{&maps};
    Graph g;
    Tensor f_e = fhoi::encode(g, v_b, p, probe);
    REQUIRE(f_e.rows() == cfg.c1 && f_e.cols() == cfg.l, "encoder keeps C1 x L");
    fhoi::decode(g, f_e, p, probe);
    REQUIRE(!maps.empty(), "probe captured attention matrices");
    for (const Tensor& m : maps)
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double s = 0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                REQUIRE(m.at(i, j) >= 0.0, "attention weights nonnegative");
                s += m.at(i, j);
            }
            REQUIRE(near(s, 1.0, 1e-12), "attention rows are stochastic");
        }
}

void test_permutation_equivariance() {
    StackConfig cfg = small_cfg();
    cfg.use_positions = false;
    ModelParams p = ModelParams::init(cfg, 5, 7);
    SplitMix64 rng(3);
    Tensor v_b = Tensor::uniform({cfg.c1, cfg.l}, -1, 1, rng);

    const std::size_t perm[4] = {2, 0, 3, 1};
    Tensor v_p = Tensor::zeros({cfg.c1, cfg.l});
    for (std::size_t i = 0; i < cfg.c1; ++i)
        for (std::size_t j = 0; j < cfg.l; ++j) v_p.mut(i, j) = v_b.at(i, perm[j]);

    Graph g;
    Tensor a = fhoi::encode(g, v_b, p);
    Tensor b = fhoi::encode(g, v_p, p);
    for (std::size_t i = 0; i < cfg.c1; ++i)
        for (std::size_t j = 0; j < cfg.l; ++j)
            REQUIRE(near(b.at(i, j), a.at(i, perm[j]), 1e-10),
                    "token permutation permutes encoder output");

    // With positions on, the symmetry must break.
    cfg.use_positions = true;
    ModelParams q = ModelParams::init(cfg, 5, 7);
    Tensor ap = fhoi::encode(g, v_b, q);
    Tensor bp = fhoi::encode(g, v_p, q);
    double diff = 0;
    for (std::size_t i = 0; i < cfg.c1; ++i)
        for (std::size_t j = 0; j < cfg.l; ++j)
            diff = std::max(diff, std::abs(bp.at(i, j) - ap.at(i, perm[j])));
    REQUIRE(diff > 1e-6, "positional encoding breaks permutation symmetry");
}

void test_predict_modes_and_boxes() {
    StackConfig cfg = small_cfg();
    ModelParams p = ModelParams::init(cfg, 5, 11);
    SplitMix64 rng(5);
    Graph g;
    Tensor f_d = Tensor::uniform({cfg.n_q, cfg.c1}, -2, 2, rng);
    const std::size_t total = 6, seen = 4;

    Tensor embed_all = Tensor::uniform({total, cfg.d}, -1, 1, rng);
    Tensor embed_seen = Tensor::uniform({seen, cfg.d}, -1, 1, rng);

    fhoi::Predictions ev = fhoi::predict(g, f_d, embed_all, p, PredictMode::Eval, total);
    REQUIRE(ev.hoi_logits.rows() == cfg.n_q && ev.hoi_logits.cols() == total,
            "eval logits cover every class");
    fhoi::Predictions tr =
        fhoi::predict(g, f_d, embed_seen, p, PredictMode::Train, total);
    REQUIRE(tr.hoi_logits.cols() == seen, "train logits restricted to seen classes");
    REQUIRE(ev.obj_logits.cols() == 6, "object head has N+1 columns");

    for (const Tensor& bx : {ev.human_box, ev.object_box})
        for (double v : bx.data())
            REQUIRE(v > 0.0 && v < 1.0, "sigmoid keeps box coords in (0,1)");

    // Temperature: logits are the cosine-style products scaled by 0.07.
    Tensor proj = g.matmul(f_d, p.w_proj);
    Tensor raw = g.matmul(proj, g.transpose(embed_all));
    for (std::size_t i = 0; i < cfg.n_q; ++i)
        for (std::size_t j = 0; j < total; ++j)
            REQUIRE(near(ev.hoi_logits.at(i, j), raw.at(i, j) / fhoi::kLogitTau, 1e-12),
                    "fixed temperature applied to class logits");

    bool threw = false;
    try {
        fhoi::predict(g, f_d, embed_all, p, PredictMode::Train, total);
    } catch (const fhoi::ShapeError&) {
        threw = true;
    }
    REQUIRE(threw, "train mode rejects a full-width classifier");
    threw = false;
    try {
        fhoi::predict(g, f_d, embed_seen, p, PredictMode::Eval, total);
    } catch (const fhoi::ShapeError&) {
        threw = true;
    }
    REQUIRE(threw, "eval mode rejects a restricted classifier");
}

void test_postprocess() {
    fhoi::Taxonomy tax;
    tax.objects = {"person", "cup", "bike"};
    tax.actions = {"hold", "ride"};
    tax.classes = {{0, 1}, {1, 2}, {0, 2}};
    tax.rare = {false, false, false};

    fhoi::Predictions preds;
    SplitMix64 rng(13);
    const std::size_t n_q = 3, c = 3, n_obj = 4;
    preds.hoi_logits = Tensor::uniform({n_q, c}, -3, 3, rng);
    preds.obj_logits = Tensor::uniform({n_q, n_obj}, -3, 3, rng);
    preds.human_box = Tensor::full({n_q, 4}, 0.5);
    preds.object_box = Tensor::full({n_q, 4}, 0.5);

    auto dets = fhoi::postprocess(preds, tax, 5);
    REQUIRE(dets.size() == 5, "top_n truncation");

    // Enumeration oracle.
    struct Row {
        double score;
        int slot, cls;
    };
    std::vector<Row> all;
    for (std::size_t s = 0; s < n_q; ++s) {
        double mx = -1e300, z = 0;
        for (std::size_t j = 0; j < n_obj; ++j) mx = std::max(mx, preds.obj_logits.at(s, j));
        std::vector<double> pr(n_obj);
        for (std::size_t j = 0; j < n_obj; ++j) {
            pr[j] = std::exp(preds.obj_logits.at(s, j) - mx);
            z += pr[j];
        }
        for (std::size_t cls = 0; cls < c; ++cls) {
            const double sig = 1.0 / (1.0 + std::exp(-preds.hoi_logits.at(s, cls)));
            all.push_back({sig * pr[static_cast<std::size_t>(tax.classes[cls].object)] / z,
                           static_cast<int>(s), static_cast<int>(cls)});
        }
    }
    std::sort(all.begin(), all.end(), [](const Row& a, const Row& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.slot != b.slot) return a.slot < b.slot;
        return a.cls < b.cls;
    });
    for (std::size_t i = 0; i < dets.size(); ++i) {
        REQUIRE(dets[i].slot == all[i].slot && dets[i].hoi_class == all[i].cls,
                "postprocess order matches full enumeration");
        REQUIRE(near(dets[i].score, all[i].score, 1e-12),
                "score is sigmoid(hoi) * softmax(obj)[object(c)]");
    }

    bool threw = false;
    fhoi::Predictions narrow = preds;
    narrow.hoi_logits = Tensor::zeros({n_q, 2});
    try {
        fhoi::postprocess(narrow, tax, 5);
    } catch (const fhoi::ShapeError&) {
        threw = true;
    }
    REQUIRE(threw, "postprocess requires eval-width predictions");
}

void test_decoder_gradients() {
    StackConfig cfg = small_cfg();
    ModelParams p = ModelParams::init(cfg, 5, 19);
    SplitMix64 rng(23);
    Tensor v_b = Tensor::uniform({cfg.c1, cfg.l}, -1, 1, rng);

    auto eval = [&]() {
        Graph g;
        return g.sum_all(g.tanh(fhoi::decode(g, fhoi::encode(g, v_b, p), p))).at(0);
    };
    {
        Graph g;
        g.backward(g.sum_all(g.tanh(fhoi::decode(g, fhoi::encode(g, v_b, p), p))));
    }
    std::vector<std::pair<std::string, Tensor>> probe_params;
    for (const auto& [name, t] : p.named())
        if (name == "queries" || name.find("enc.0.self.wq") != std::string::npos ||
            name.find("inter_dec.0") != std::string::npos)
            probe_params.push_back({name, t});
    REQUIRE(!probe_params.empty(), "found transformer parameters to probe");
    auto report = fhoi::finite_diff_check(eval, probe_params);
    REQUIRE(report.pass, "gradients flow through both decoders, worst "
                             << report.max_rel_err << " at " << report.worst_name);
}

void test_checkpoint_round_trip() {
    StackConfig cfg = small_cfg();
    ModelParams p = ModelParams::init(cfg, 5, 31);
    const std::string path = "/tmp/fhoi_detr_ck.fhck";
    fhoi::save_checkpoint(p, path);

    ModelParams q = ModelParams::init(cfg, 5, 99);  // different values, same shapes
    fhoi::load_checkpoint(q, path);
    auto pn = p.named(), qn = q.named();
    REQUIRE(pn.size() == qn.size(), "same parameter census");
    for (std::size_t i = 0; i < pn.size(); ++i) {
        REQUIRE(pn[i].first == qn[i].first, "parameter names align");
        REQUIRE(pn[i].second.data() == qn[i].second.data(),
                "loaded values bit-exact: " << pn[i].first);
    }

    const std::string path2 = "/tmp/fhoi_detr_ck2.fhck";
    fhoi::save_checkpoint(q, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    REQUIRE(sa == sb, "checkpoint rewrite is byte-identical");

    StackConfig other = cfg;
    other.n_q = 4;
    ModelParams r = ModelParams::init(other, 5, 1);
    bool threw = false;
    try {
        fhoi::load_checkpoint(r, path);
    } catch (const fhoi::DataError&) {
        threw = true;
    }
    REQUIRE(threw, "shape mismatch on load is rejected");

    std::ofstream trunc(path2, std::ios::binary);
    trunc.write(sa.data(), static_cast<std::streamsize>(sa.size() / 2));
    trunc.close();
    ModelParams s = ModelParams::init(cfg, 5, 31);
    threw = false;
    try {
        fhoi::load_checkpoint(s, path2);
    } catch (const fhoi::FormatError&) {
        threw = true;
    }
    REQUIRE(threw, "truncated checkpoint is rejected");
}

}  // namespace

int main() {
    test_config_validation();
    test_attention_rows();
    test_permutation_equivariance();
    test_predict_modes_and_boxes();
    test_postprocess();
    test_decoder_gradients();
    test_checkpoint_round_trip();
    std::cout << "test_detr: all checks passed\n";
    return 0;
}
