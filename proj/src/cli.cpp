#include "fhoi/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace fhoi {

namespace {

using nlohmann::json;

struct Dataset {
    GeneratedData data;
    OverMatrix over;
    std::vector<Scene> train;
    std::vector<Scene> eval_scenes;
};

Dataset load_dataset(const RunConfig& cfg, const std::string& dir) {
    Dataset ds;
    ds.data.taxonomy = load_taxonomy(dir + "/taxonomy.json");
    ds.data.objects = load_table(dir + "/objects.fheb");
    ds.data.actions = load_table(dir + "/actions.fheb");
    ds.over = over_matrix(ds.data.objects, ds.data.actions);
    std::size_t c1 = 0, l = 0, d = 0;
    ds.train = load_scenes(dir + "/scenes.fhds", &c1, &l, &d);
    if (c1 != cfg.stack.c1 || l != cfg.stack.l || d != cfg.stack.d)
        throw DataError("dataset grid " + std::to_string(c1) + "x" +
                        std::to_string(l) + " dim " + std::to_string(d) +
                        " does not match the configured stack");
    ds.eval_scenes = load_scenes(dir + "/eval_scenes.fhds");
    if (ds.data.objects.dim != d || ds.data.actions.dim != d)
        throw DataError("embedding dim does not match scene dim");
    return ds;
}

ZsSplit split_for(const RunConfig& cfg, const Taxonomy& tax) {
    return zs_split(tax, parse_zs_setting(cfg.split_setting), cfg.seed,
                    cfg.unseen_objects, cfg.unseen_verbs);
}

Tensor select_rows(const Tensor& all, const std::vector<int>& rows) {
    Tensor out = Tensor::zeros({rows.size(), all.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < all.cols(); ++j)
            out.mut(i, j) = all.at(static_cast<std::size_t>(rows[i]), j);
    return out;
}

ModelParams train_model(const RunConfig& cfg, const Dataset& ds, const ZsSplit& split,
                        std::ostream* log) {
    const Taxonomy& tax = ds.data.taxonomy;
    Tensor class_embed_all = hoi_class_embedding(tax, ds.data.objects, ds.data.actions);
    Tensor seen_embed = select_rows(class_embed_all, split.seen);

    ModelParams params = ModelParams::init(cfg.stack, tax.num_objects(), cfg.seed);
    AdamW opt;
    opt.weight_decay = cfg.weight_decay;

    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr =
            cfg.lr * std::pow(cfg.lr_decay,
                              static_cast<double>((epoch - 1) / cfg.decay_every));
        SplitMix64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        LossBreakdown epoch_bd;
        std::size_t batches = 0;
        try {
            for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
                std::vector<const Scene*> batch;
                for (std::size_t i = b0;
                     i < std::min(b0 + cfg.batch_size, order.size()); ++i)
                    batch.push_back(&ds.train[order[i]]);
                params.zero_grads();
                Graph g;
                LossBreakdown bd;
                Tensor loss = batch_loss(g, batch, params, ds.data, ds.over,
                                         seen_embed, split.seen, split, cfg.pipeline,
                                         cfg.loss, nullptr, &bd);
                g.backward(loss);
                opt.step(params.named(), lr);
                epoch_bd.total += bd.total;
                epoch_bd.box += bd.box;
                epoch_bd.iou += bd.iou;
                epoch_bd.obj += bd.obj;
                epoch_bd.ordis += bd.ordis;
                ++batches;
            }
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (log) {
            const double n = static_cast<double>(batches);
            json line = {{"epoch", epoch},          {"lr", lr},
                         {"loss", epoch_bd.total / n}, {"box", epoch_bd.box / n},
                         {"iou", epoch_bd.iou / n},  {"obj", epoch_bd.obj / n},
                         {"ordis", epoch_bd.ordis / n}};
            *log << line.dump() << "\n";
        }
    }
    return params;
}

EvalReport run_eval(const RunConfig& cfg, const Dataset& ds, const ZsSplit& split,
                    const ModelParams& params) {
    Tensor class_embed_all =
        hoi_class_embedding(ds.data.taxonomy, ds.data.objects, ds.data.actions);
    const auto dets = eval_detections(ds.eval_scenes, params, ds.data, ds.over,
                                      class_embed_all, cfg.pipeline, cfg.top_n);
    return hoi_map(dets, ds.eval_scenes, split);
}

json report_json(const EvalReport& rep) {
    return {{"per_class_ap", rep.per_class_ap},
            {"map_seen", rep.map_seen},
            {"map_unseen", rep.map_unseen},
            {"map_full", rep.map_full}};
}

void write_csv_map(const std::string& path, const Tensor& map) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    for (std::size_t i = 0; i < map.rows(); ++i) {
        for (std::size_t j = 0; j < map.cols(); ++j) {
            if (j) f << ",";
            f << map.at(i, j);
        }
        f << "\n";
    }
}

void write_pgm_map(const std::string& path, const Tensor& map) {
    double lo = map.at(0), hi = map.at(0);
    for (std::size_t i = 0; i < map.numel(); ++i) {
        lo = std::min(lo, map.at(i));
        hi = std::max(hi, map.at(i));
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << "P2\n" << map.cols() << " " << map.rows() << "\n255\n";
    for (std::size_t i = 0; i < map.rows(); ++i) {
        for (std::size_t j = 0; j < map.cols(); ++j) {
            const int v = static_cast<int>(
                std::lround(255.0 * (map.at(i, j) - lo) / span));
            f << (j ? " " : "") << v;
        }
        f << "\n";
    }
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory: " + out_dir);

    GeneratedData data = gen_taxonomy(cfg.seed, cfg.n_objects, cfg.n_actions,
                                      cfg.n_classes, cfg.stack.d, cfg.rare_fraction);
    const ZsSplit split = split_for(cfg, data.taxonomy);

    SceneGenConfig sc;
    sc.c1 = cfg.stack.c1;
    sc.l = cfg.stack.l;
    sc.sigma = cfg.sigma;
    sc.max_interactions = cfg.max_interactions;
    sc.extra_action_prob = cfg.extra_action_prob;

    std::vector<int> all_classes;
    for (std::size_t i = 0; i < data.taxonomy.num_classes(); ++i)
        all_classes.push_back(static_cast<int>(i));

    SplitMix64 train_rng(cfg.seed * 2 + 1);
    std::vector<Scene> train;
    for (std::size_t i = 0; i < cfg.n_train_scenes; ++i)
        train.push_back(gen_scene(data, split.seen, sc, train_rng));
    SplitMix64 eval_rng(cfg.seed * 2 + 2);
    std::vector<Scene> evals;
    for (std::size_t i = 0; i < cfg.n_eval_scenes; ++i)
        evals.push_back(gen_scene(data, all_classes, sc, eval_rng));

    save_taxonomy(data.taxonomy, out_dir + "/taxonomy.json");
    save_table(data.objects, out_dir + "/objects.fheb");
    save_table(data.actions, out_dir + "/actions.fheb");
    save_scenes(out_dir + "/scenes.fhds", train, sc.c1, sc.l, cfg.stack.d);
    save_scenes(out_dir + "/eval_scenes.fhds", evals, sc.c1, sc.l, cfg.stack.d);

    json summary = {{"objects", data.taxonomy.num_objects()},
                    {"actions", data.taxonomy.num_actions()},
                    {"classes", data.taxonomy.num_classes()},
                    {"seen", split.seen.size()},
                    {"unseen", split.unseen.size()},
                    {"split", cfg.split_setting},
                    {"train_scenes", train.size()},
                    {"eval_scenes", evals.size()},
                    {"dir", out_dir}};
    out << summary.dump() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir,
              const std::string& ckpt_out, std::ostream& out) {
    const Dataset ds = load_dataset(cfg, data_dir);
    const ZsSplit split = split_for(cfg, ds.data.taxonomy);
    ModelParams params = train_model(cfg, ds, split, &out);
    save_checkpoint(params, ckpt_out);
    out << json{{"checkpoint", ckpt_out}}.dump() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt,
             const std::string& data_dir, const std::string& report_path,
             std::ostream& out) {
    const Dataset ds = load_dataset(cfg, data_dir);
    const ZsSplit split = split_for(cfg, ds.data.taxonomy);
    ModelParams params =
        ModelParams::init(cfg.stack, ds.data.taxonomy.num_objects(), cfg.seed);
    load_checkpoint(params, ckpt);
    const EvalReport rep = run_eval(cfg, ds, split, params);
    const json j = report_json(rep);
    if (!report_path.empty()) {
        std::ofstream f(report_path);
        if (!f) throw DataError("cannot write report: " + report_path);
        f << j.dump(2) << "\n";
    }
    out << j.dump() << "\n";
    return 0;
}

RunConfig gradcheck_profile() {
    RunConfig cfg;
    cfg.stack.c1 = 8;
    cfg.stack.c2 = 4;
    cfg.stack.d = 16;
    cfg.stack.l = 4;
    cfg.stack.n_q = 4;
    cfg.stack.heads = 2;
    cfg.stack.enc_layers = 1;
    cfg.stack.inst_dec_layers = 1;
    cfg.stack.inter_dec_layers = 1;
    cfg.stack.ffn_dim = 16;
    cfg.pipeline.k_o = 2;
    cfg.pipeline.k = 3;
    cfg.pipeline.k_a = 2;
    cfg.n_objects = 6;
    cfg.n_actions = 5;
    cfg.n_classes = 12;
    cfg.n_train_scenes = 2;
    cfg.n_eval_scenes = 2;
    return cfg;
}

int cmd_gradcheck(const RunConfig& cfg, double tol, std::ostream& out) {
    GeneratedData data = gen_taxonomy(cfg.seed, cfg.n_objects, cfg.n_actions,
                                      cfg.n_classes, cfg.stack.d, cfg.rare_fraction);
    const ZsSplit split = split_for(cfg, data.taxonomy);
    const OverMatrix over = over_matrix(data.objects, data.actions);

    SceneGenConfig sc;
    sc.c1 = cfg.stack.c1;
    sc.l = cfg.stack.l;
    sc.sigma = cfg.sigma;
    sc.max_interactions = cfg.max_interactions;
    sc.extra_action_prob = cfg.extra_action_prob;
    SplitMix64 rng(cfg.seed * 2 + 1);
    std::vector<Scene> scenes;
    const std::size_t n = std::max<std::size_t>(cfg.n_train_scenes, 1);
    for (std::size_t i = 0; i < std::min<std::size_t>(n, 2); ++i)
        scenes.push_back(gen_scene(data, split.seen, sc, rng));
    std::vector<const Scene*> batch;
    for (const Scene& s : scenes) batch.push_back(&s);

    Tensor class_embed_all =
        hoi_class_embedding(data.taxonomy, data.objects, data.actions);
    Tensor seen_embed = select_rows(class_embed_all, split.seen);
    ModelParams params =
        ModelParams::init(cfg.stack, data.taxonomy.num_objects(), cfg.seed);

    std::vector<SceneFreeze> freeze(batch.size());
    params.zero_grads();
    Graph g;
    Tensor loss = batch_loss(g, batch, params, data, over, seen_embed, split.seen,
                             split, cfg.pipeline, cfg.loss, &freeze, nullptr);
    g.backward(loss);

    const auto named = params.named();
    auto eval = [&]() {
        Graph fresh;
        return batch_loss(fresh, batch, params, data, over, seen_embed, split.seen,
                          split, cfg.pipeline, cfg.loss, &freeze, nullptr)
            .at(0);
    };
    const GradCheckReport rep = finite_diff_check(eval, named, 1e-5, tol);

    std::size_t coords = 0;
    for (const auto& [name, t] : named) coords += t.numel();
    json j = {{"pass", rep.pass},
              {"max_rel_err", rep.max_rel_err},
              {"worst_param", rep.worst_name},
              {"worst_index", rep.worst_index},
              {"parameters", named.size()},
              {"coordinates", coords},
              {"tolerance", tol}};
    out << j.dump() << "\n";
    if (!rep.pass) {
        std::vector<GradCheckEntry> worst = rep.per_param;
        std::sort(worst.begin(), worst.end(),
                  [](const GradCheckEntry& a, const GradCheckEntry& b) {
                      return a.rel_err > b.rel_err;
                  });
        json bad = json::array();
        for (std::size_t i = 0; i < std::min<std::size_t>(5, worst.size()); ++i)
            bad.push_back({{"param", worst[i].name}, {"rel_err", worst[i].rel_err}});
        out << json{{"worst_parameters", bad}}.dump() << "\n";
        return 3;
    }
    return 0;
}

int cmd_nominate(const RunConfig& cfg, const std::string& data_dir,
                 std::size_t scene_index, std::ostream& out) {
    const Dataset ds = load_dataset(cfg, data_dir);
    if (scene_index >= ds.train.size())
        throw DataError("scene index " + std::to_string(scene_index) +
                        " out of range (have " + std::to_string(ds.train.size()) +
                        " scenes)");
    const Scene& scene = ds.train[scene_index];
    const Taxonomy& tax = ds.data.taxonomy;

    const ObjectNomination obj_nom = nominate_objects(
        ds.data.objects, scene.v_c, cfg.pipeline.k_o, tax.person_object_idx);
    std::vector<int> scored(obj_nom.indices.begin(), obj_nom.indices.end() - 1);
    const auto related = related_verbs(ds.over, scored, cfg.pipeline.k);
    Tensor s_as = action_scene_scores(obj_nom, related, ds.data.actions, scene.v_c);
    const ActionNomination act_nom =
        nominate_actions(s_as, related, cfg.pipeline.k_a, scored);

    json objs = {{"indices", obj_nom.indices}, {"scores", obj_nom.scores}};
    json obj_names = json::array(), act_names = json::array();
    for (int i : obj_nom.indices)
        obj_names.push_back(tax.objects[static_cast<std::size_t>(i)]);
    objs["names"] = obj_names;
    json acts = {{"indices", act_nom.indices},
                 {"scores", act_nom.scores},
                 {"provenance", act_nom.provenance}};
    for (int i : act_nom.indices)
        act_names.push_back(tax.actions[static_cast<std::size_t>(i)]);
    acts["names"] = act_names;
    out << json{{"scene", scene_index}, {"objects", objs}, {"actions", acts}}.dump()
        << "\n";
    return 0;
}

int cmd_export_attention(const RunConfig& cfg, const std::string& data_dir,
                         const std::string& ckpt, std::size_t scene_index,
                         const std::string& out_dir, std::ostream& out) {
    const Dataset ds = load_dataset(cfg, data_dir);
    if (scene_index >= ds.train.size())
        throw DataError("scene index out of range");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory: " + out_dir);

    ModelParams params =
        ModelParams::init(cfg.stack, ds.data.taxonomy.num_objects(), cfg.seed);
    if (!ckpt.empty()) load_checkpoint(params, ckpt);
    Tensor class_embed_all =
        hoi_class_embedding(ds.data.taxonomy, ds.data.objects, ds.data.actions);

    Graph g;
    ForwardOutputs fo = forward_scene(g, ds.train[scene_index], params, ds.data,
                                      ds.over, class_embed_all, PredictMode::Eval,
                                      ds.data.taxonomy.num_classes(), cfg.pipeline);

    json files = json::array();
    auto dump_probe = [&](const char* name, const ProbeOutput& p) {
        const std::string fused = out_dir + "/" + name + "_fused.csv";
        write_csv_map(fused, p.map);
        files.push_back(fused);
        for (std::size_t i = 0; i < p.per_candidate.size(); ++i) {
            const std::string pgm = out_dir + "/" + name + "_candidate_" +
                                    std::to_string(i) + ".pgm";
            write_pgm_map(pgm, p.per_candidate[i]);
            files.push_back(pgm);
        }
    };
    dump_probe("osaca", fo.f_o);
    dump_probe("ovaca", fo.f_a);
    out << json{{"scene", scene_index}, {"files", files}}.dump() << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& data_dir,
               const std::string& csv_path, std::ostream& out) {
    const Dataset ds = load_dataset(cfg, data_dir);
    const ZsSplit split = split_for(cfg, ds.data.taxonomy);

    struct Row {
        const char* name;
        bool beta, delta, zeta, omega_one;
    };
    const Row rows[] = {
        {"beta", true, false, false, false},
        {"delta", false, true, false, false},
        {"zeta", false, false, true, false},
        {"beta+delta", true, true, false, false},
        {"beta+zeta", true, false, true, false},
        {"delta+zeta", false, true, true, false},
        {"beta+delta+zeta", true, true, true, false},
        {"focal", false, false, false, true},
    };

    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write " + csv_path);
    csv << "factors,map_unseen,map_seen,map_full\n";
    for (const Row& row : rows) {
        RunConfig rc = cfg;
        rc.loss.ordis.use_beta = row.beta;
        rc.loss.ordis.use_delta = row.delta;
        rc.loss.ordis.use_zeta = row.zeta;
        rc.loss.ordis.omega_one = row.omega_one;
        ModelParams params = train_model(rc, ds, split, nullptr);
        const EvalReport rep = run_eval(rc, ds, split, params);
        csv << row.name << "," << rep.map_unseen << "," << rep.map_seen << ","
            << rep.map_full << "\n";
        out << json{{"factors", row.name},
                    {"map_unseen", rep.map_unseen},
                    {"map_seen", rep.map_seen},
                    {"map_full", rep.map_full}}
                   .dump()
            << "\n";
    }
    out << json{{"csv", csv_path}, {"rows", 8}}.dump() << "\n";
    return 0;
}

}  // namespace fhoi
