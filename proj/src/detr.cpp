#include "fhoi/detr.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fhoi/serialize.hpp"

namespace fhoi {

namespace {
constexpr char kCkptMagic[4] = {'F', 'H', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

Tensor init_weight(std::vector<std::size_t> shape, std::size_t fan_in, SplitMix64& rng) {
    const double b = std::sqrt(1.0 / static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -b, b, rng, true);
}

AttentionWeights init_attn(std::size_t c1, SplitMix64& rng) {
    return {init_weight({c1, c1}, c1, rng), init_weight({c1, c1}, c1, rng),
            init_weight({c1, c1}, c1, rng), init_weight({c1, c1}, c1, rng)};
}
}  // namespace

void StackConfig::validate() const {
    if (c1 == 0 || c2 == 0 || d == 0 || l == 0 || n_q == 0 || heads == 0 ||
        enc_layers == 0 || inst_dec_layers == 0 || inter_dec_layers == 0 || ffn_dim == 0)
        throw ConfigError("stack config: all extents must be positive");
    if (d != 2 * c1)
        throw ConfigError("stack config: d must equal 2*C1 (d=" + std::to_string(d) +
                          ", C1=" + std::to_string(c1) + ")");
    if (c1 % heads != 0)
        throw ConfigError("stack config: C1 must be divisible by heads");
    const std::size_t side = grid_side();
    if (side * side != l)
        throw ConfigError("stack config: L must be a perfect square, got " +
                          std::to_string(l));
}

std::size_t StackConfig::grid_side() const {
    auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(l))));
    return side;
}

ModelParams ModelParams::init(const StackConfig& cfg, std::size_t num_objects,
                              std::uint64_t seed) {
    cfg.validate();
    SplitMix64 rng(seed);
    ModelParams p;
    p.cfg = cfg;
    p.osaca = CoAttentionParams::init(cfg.c1, cfg.c2, rng);
    p.ovaca = CoAttentionParams::init(cfg.c1, cfg.c2, rng);
    for (std::size_t i = 0; i < cfg.enc_layers; ++i)
        p.enc.push_back({init_attn(cfg.c1, rng),
                         init_weight({cfg.ffn_dim, cfg.c1}, cfg.c1, rng),
                         init_weight({cfg.c1, cfg.ffn_dim}, cfg.ffn_dim, rng)});
    for (std::size_t i = 0; i < cfg.inst_dec_layers; ++i)
        p.inst_dec.push_back({init_attn(cfg.c1, rng), init_attn(cfg.c1, rng),
                              init_weight({cfg.ffn_dim, cfg.c1}, cfg.c1, rng),
                              init_weight({cfg.c1, cfg.ffn_dim}, cfg.ffn_dim, rng)});
    for (std::size_t i = 0; i < cfg.inter_dec_layers; ++i)
        p.inter_dec.push_back({init_attn(cfg.c1, rng), init_attn(cfg.c1, rng),
                               init_weight({cfg.ffn_dim, cfg.c1}, cfg.c1, rng),
                               init_weight({cfg.c1, cfg.ffn_dim}, cfg.ffn_dim, rng)});
    p.queries = init_weight({cfg.c1, cfg.n_q}, cfg.c1, rng);
    p.w_proj = init_weight({cfg.c1, cfg.d}, cfg.c1, rng);
    p.obj_head = init_weight({cfg.c1, num_objects + 1}, cfg.c1, rng);
    p.box1 = init_weight({cfg.c1, cfg.c1}, cfg.c1, rng);
    p.box2 = init_weight({cfg.c1, cfg.c1}, cfg.c1, rng);
    p.box3 = init_weight({cfg.c1, 8}, cfg.c1, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto append = [&out](std::vector<std::pair<std::string, Tensor>> v) {
        for (auto& e : v) out.push_back(std::move(e));
    };
    append(osaca.named("osaca"));
    append(ovaca.named("ovaca"));
    auto attn = [&out](const std::string& prefix, const AttentionWeights& a) {
        out.push_back({prefix + ".wq", a.wq});
        out.push_back({prefix + ".wk", a.wk});
        out.push_back({prefix + ".wv", a.wv});
        out.push_back({prefix + ".wo", a.wo});
    };
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const std::string pre = "enc." + std::to_string(i);
        attn(pre + ".self", enc[i].self_attn);
        out.push_back({pre + ".ff1", enc[i].ff1});
        out.push_back({pre + ".ff2", enc[i].ff2});
    }
    auto dec_layers = [&](const char* name, const std::vector<DecoderLayerParams>& ls) {
        for (std::size_t i = 0; i < ls.size(); ++i) {
            const std::string pre = std::string(name) + "." + std::to_string(i);
            attn(pre + ".self", ls[i].self_attn);
            attn(pre + ".cross", ls[i].cross_attn);
            out.push_back({pre + ".ff1", ls[i].ff1});
            out.push_back({pre + ".ff2", ls[i].ff2});
        }
    };
    dec_layers("inst_dec", inst_dec);
    dec_layers("inter_dec", inter_dec);
    out.push_back({"queries", queries});
    out.push_back({"w_proj", w_proj});
    out.push_back({"obj_head", obj_head});
    out.push_back({"box1", box1});
    out.push_back({"box2", box2});
    out.push_back({"box3", box3});
    return out;
}

void ModelParams::zero_grads() {
    for (auto& [name, t] : named()) t.zero_grad();
}

Tensor sinusoidal_positions(const StackConfig& cfg) {
    const std::size_t side = cfg.grid_side();
    const std::size_t half = cfg.c1 / 2;
    Tensor pos = Tensor::zeros({cfg.c1, cfg.l});
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t t = r * side + c;
            const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(side);
            const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(side);
            for (std::size_t j = 0; j < half; ++j) {
                const double freq =
                    std::pow(10000.0, 2.0 * static_cast<double>(j / 2) /
                                          static_cast<double>(half));
                const double ay = y * two_pi / freq;
                const double ax = x * two_pi / freq;
                pos.mut(j, t) = (j % 2 == 0) ? std::sin(ay) : std::cos(ay);
                pos.mut(half + j, t) = (j % 2 == 0) ? std::sin(ax) : std::cos(ax);
            }
        }
    return pos;
}

namespace {

// Multi-head attention over channel-major token maps (C1 x T).
Tensor mha(Graph& g, const AttentionWeights& w, const Tensor& xq, const Tensor& xkv,
           std::size_t heads, AttnProbe& probe) {
    const std::size_t c1 = xq.rows();
    const std::size_t dh = c1 / heads;
    Tensor q = g.matmul(w.wq, xq);
    Tensor k = g.matmul(w.wk, xkv);
    Tensor v = g.matmul(w.wv, xkv);
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = g.slice(q, 0, h * dh, (h + 1) * dh);
        Tensor kh = g.slice(k, 0, h * dh, (h + 1) * dh);
        Tensor vh = g.slice(v, 0, h * dh, (h + 1) * dh);
        Tensor scores = g.scale(g.matmul(g.transpose(qh), kh), inv_sqrt);  // Tq x Tk
        Tensor attn = g.softmax(scores, 1);
        probe.put(attn);
        head_out.push_back(g.matmul(vh, g.transpose(attn)));  // dh x Tq
    }
    return g.matmul(w.wo, g.concat_rows(head_out));
}

Tensor ffn(Graph& g, const Tensor& x, const Tensor& ff1, const Tensor& ff2) {
    return g.matmul(ff2, g.relu(g.matmul(ff1, x)));
}

// Post-norm residual block; LN over the channel axis per token.
Tensor post_norm(Graph& g, const Tensor& x, const Tensor& sub) {
    return g.layer_norm(g.add(x, sub), 0);
}

}  // namespace

Tensor encode(Graph& g, const Tensor& v_b, const ModelParams& p, AttnProbe probe) {
    const StackConfig& cfg = p.cfg;
    if (v_b.rows() != cfg.c1 || v_b.cols() != cfg.l)
        throw ShapeError("encode: V_b must be C1xL, got " + v_b.shape_str());
    Tensor x = v_b;
    if (cfg.use_positions) x = g.add(x, sinusoidal_positions(cfg));
    for (const EncoderLayerParams& layer : p.enc) {
        x = post_norm(g, x, mha(g, layer.self_attn, x, x, cfg.heads, probe));
        x = post_norm(g, x, ffn(g, x, layer.ff1, layer.ff2));
    }
    return x;
}

Tensor decode(Graph& g, const Tensor& f_i, const ModelParams& p, AttnProbe probe) {
    const StackConfig& cfg = p.cfg;
    if (f_i.rows() != cfg.c1 || f_i.cols() != cfg.l)
        throw ShapeError("decode: F_i must be C1xL, got " + f_i.shape_str());
    Tensor y = p.queries;  // C1 x N_q
    auto run = [&](const std::vector<DecoderLayerParams>& layers) {
        for (const DecoderLayerParams& layer : layers) {
            y = post_norm(g, y, mha(g, layer.self_attn, y, y, cfg.heads, probe));
            y = post_norm(g, y, mha(g, layer.cross_attn, y, f_i, cfg.heads, probe));
            y = post_norm(g, y, ffn(g, y, layer.ff1, layer.ff2));
        }
    };
    run(p.inst_dec);   // instance decoder
    run(p.inter_dec);  // its outputs feed the interaction decoder as queries
    return g.transpose(y);  // N_q x C1
}

Predictions predict(Graph& g, const Tensor& f_d, const Tensor& class_embed,
                    const ModelParams& p, PredictMode mode,
                    std::size_t total_classes) {
    const StackConfig& cfg = p.cfg;
    if (f_d.rows() != cfg.n_q || f_d.cols() != cfg.c1)
        throw ShapeError("predict: F_d must be N_q x C1, got " + f_d.shape_str());
    if (class_embed.cols() != cfg.d)
        throw ShapeError("predict: class embedding width must be d");
    if (mode == PredictMode::Eval && class_embed.rows() != total_classes)
        throw ShapeError("predict: eval-mode classifier must expose all " +
                         std::to_string(total_classes) + " classes, got " +
                         std::to_string(class_embed.rows()));
    if (mode == PredictMode::Train && class_embed.rows() >= total_classes)
        throw ShapeError("predict: train-mode classifier must be restricted to seen "
                         "classes");

    Predictions out;
    Tensor proj = g.matmul(f_d, p.w_proj);  // N_q x d
    out.hoi_logits = g.scale(g.matmul(proj, g.transpose(class_embed)), 1.0 / kLogitTau);
    out.obj_logits = g.matmul(f_d, p.obj_head);
    Tensor boxes = g.sigmoid(
        g.matmul(g.relu(g.matmul(g.relu(g.matmul(f_d, p.box1)), p.box2)), p.box3));
    out.human_box = g.slice(boxes, 1, 0, 4);
    out.object_box = g.slice(boxes, 1, 4, 8);
    return out;
}

std::vector<DetectionOut> postprocess(const Predictions& preds, const Taxonomy& tax,
                                      std::size_t top_n) {
    const std::size_t n_q = preds.hoi_logits.rows();
    const std::size_t c = preds.hoi_logits.cols();
    if (c != tax.num_classes())
        throw ShapeError("postprocess: predictions must cover all classes (eval mode)");
    const std::size_t n_obj_cols = preds.obj_logits.cols();

    std::vector<DetectionOut> all;
    all.reserve(n_q * c);
    for (std::size_t s = 0; s < n_q; ++s) {
        // softmax over object logits, max-subtracted
        std::vector<double> probs(n_obj_cols);
        double mx = -1e308;
        for (std::size_t j = 0; j < n_obj_cols; ++j)
            mx = std::max(mx, preds.obj_logits.at(s, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < n_obj_cols; ++j) {
            probs[j] = std::exp(preds.obj_logits.at(s, j) - mx);
            sum += probs[j];
        }
        for (double& v : probs) v /= sum;

        Box hb{preds.human_box.at(s, 0), preds.human_box.at(s, 1),
               preds.human_box.at(s, 2), preds.human_box.at(s, 3)};
        Box ob{preds.object_box.at(s, 0), preds.object_box.at(s, 1),
               preds.object_box.at(s, 2), preds.object_box.at(s, 3)};
        for (std::size_t cls = 0; cls < c; ++cls) {
            const double logit = preds.hoi_logits.at(s, cls);
            const double sig = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                                          : std::exp(logit) / (1.0 + std::exp(logit));
            DetectionOut det;
            det.slot = static_cast<int>(s);
            det.hoi_class = static_cast<int>(cls);
            det.score = sig * probs[static_cast<std::size_t>(tax.classes[cls].object)];
            det.human = hb;
            det.object = ob;
            all.push_back(det);
        }
    }
    std::sort(all.begin(), all.end(), [](const DetectionOut& a, const DetectionOut& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.slot != b.slot) return a.slot < b.slot;
        return a.hoi_class < b.hoi_class;
    });
    if (all.size() > top_n) all.resize(top_n);
    return all;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
    BinWriter w(path);
    w.magic(kCkptMagic);
    w.u32(kCkptVersion);
    const auto named = p.named();
    w.u32(static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        w.str(name);
        w.u8(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t ext : t.shape()) w.u32(static_cast<std::uint32_t>(ext));
        for (double v : t.data()) w.f64(v);
    }
    w.close();
}

void load_checkpoint(ModelParams& p, const std::string& path) {
    BinReader r(path);
    r.expect_magic(kCkptMagic);
    const std::uint32_t version = r.u32();
    if (version != kCkptVersion)
        throw FormatError("unsupported FHCK version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> loaded;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint8_t rank = r.u8();
        if (rank == 0 || rank > 3) throw FormatError("checkpoint tensor rank invalid");
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (std::uint8_t k = 0; k < rank; ++k) {
            shape[k] = r.u32();
            n *= shape[k];
        }
        std::vector<double> data(n);
        for (std::size_t k = 0; k < n; ++k) data[k] = r.f64();
        loaded[name] = {std::move(shape), std::move(data)};
    }
    for (auto& [name, t] : p.named()) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw DataError("checkpoint missing tensor: " + name);
        if (it->second.first != t.shape())
            throw DataError("checkpoint shape mismatch for " + name);
        Tensor tt = t;
        tt.data_mut() = it->second.second;
    }
}

}  // namespace fhoi
