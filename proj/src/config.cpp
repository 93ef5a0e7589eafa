#include "fhoi/config.hpp"

#include <fstream>

#include "json.hpp"

namespace fhoi {

namespace {

using nlohmann::json;

void apply(RunConfig& c, const std::string& key, const json& v) {
    try {
        if (key == "c1") c.stack.c1 = v.get<std::size_t>();
        else if (key == "c2") c.stack.c2 = v.get<std::size_t>();
        else if (key == "d") c.stack.d = v.get<std::size_t>();
        else if (key == "l") c.stack.l = v.get<std::size_t>();
        else if (key == "n_q") c.stack.n_q = v.get<std::size_t>();
        else if (key == "heads") c.stack.heads = v.get<std::size_t>();
        else if (key == "enc_layers") c.stack.enc_layers = v.get<std::size_t>();
        else if (key == "inst_dec_layers") c.stack.inst_dec_layers = v.get<std::size_t>();
        else if (key == "inter_dec_layers") c.stack.inter_dec_layers = v.get<std::size_t>();
        else if (key == "ffn_dim") c.stack.ffn_dim = v.get<std::size_t>();
        else if (key == "use_positions") c.stack.use_positions = v.get<bool>();
        else if (key == "k_o") c.pipeline.k_o = v.get<std::size_t>();
        else if (key == "k") c.pipeline.k = v.get<std::size_t>();
        else if (key == "k_a") c.pipeline.k_a = v.get<std::size_t>();
        else if (key == "lambda_b") c.loss.cost.box = v.get<double>();
        else if (key == "lambda_u") c.loss.cost.iou = v.get<double>();
        else if (key == "lambda_o") c.loss.cost.obj = v.get<double>();
        else if (key == "lambda_c") c.loss.cost.cls = v.get<double>();
        else if (key == "focal_alpha") c.loss.focal.alpha = v.get<double>();
        else if (key == "focal_gamma") c.loss.focal.gamma = v.get<double>();
        else if (key == "kappa") c.loss.ordis.kappa = v.get<double>();
        else if (key == "eps1") c.loss.ordis.eps1 = v.get<double>();
        else if (key == "eps2") c.loss.ordis.eps2 = v.get<double>();
        else if (key == "use_beta") c.loss.ordis.use_beta = v.get<bool>();
        else if (key == "use_delta") c.loss.ordis.use_delta = v.get<bool>();
        else if (key == "use_zeta") c.loss.ordis.use_zeta = v.get<bool>();
        else if (key == "omega_one") c.loss.ordis.omega_one = v.get<bool>();
        else if (key == "no_object_weight") c.loss.no_object_weight = v.get<double>();
        else if (key == "lr") c.lr = v.get<double>();
        else if (key == "weight_decay") c.weight_decay = v.get<double>();
        else if (key == "lr_decay") c.lr_decay = v.get<double>();
        else if (key == "decay_every") c.decay_every = v.get<std::size_t>();
        else if (key == "epochs") c.epochs = v.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "split_setting") c.split_setting = v.get<std::string>();
        else if (key == "unseen_objects") c.unseen_objects = v.get<std::vector<int>>();
        else if (key == "unseen_verbs") c.unseen_verbs = v.get<std::vector<int>>();
        else if (key == "n_objects") c.n_objects = v.get<std::size_t>();
        else if (key == "n_actions") c.n_actions = v.get<std::size_t>();
        else if (key == "n_classes") c.n_classes = v.get<std::size_t>();
        else if (key == "rare_fraction") c.rare_fraction = v.get<double>();
        else if (key == "sigma") c.sigma = v.get<double>();
        else if (key == "max_interactions") c.max_interactions = v.get<std::size_t>();
        else if (key == "extra_action_prob") c.extra_action_prob = v.get<double>();
        else if (key == "n_train_scenes") c.n_train_scenes = v.get<std::size_t>();
        else if (key == "n_eval_scenes") c.n_eval_scenes = v.get<std::size_t>();
        else if (key == "top_n") c.top_n = v.get<std::size_t>();
        else throw ConfigError("unknown config field: " + key);
    } catch (const json::exception& e) {
        throw ConfigError("config field '" + key + "': " + e.what());
    }
}

void apply_overrides(RunConfig& c, const std::vector<std::string>& overrides) {
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override must be key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json v = json::parse(raw, nullptr, false);
        if (v.is_discarded()) v = raw;  // bare strings need no quoting
        apply(c, key, v);
    }
}

}  // namespace

void RunConfig::validate() const {
    stack.validate();
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (n_classes > n_objects * n_actions)
        throw ConfigError("n_classes exceeds n_objects * n_actions");
    if (pipeline.k_a > pipeline.k * pipeline.k_o)
        throw ConfigError("k_a cannot exceed the nominated verb pool");
    parse_zs_setting(split_setting);
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
    RunConfig c;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    for (const auto& [key, value] : j.items()) apply(c, key, value);
    apply_overrides(c, overrides);
    c.validate();
    return c;
}

RunConfig apply_config_overrides(RunConfig base,
                                 const std::vector<std::string>& overrides) {
    apply_overrides(base, overrides);
    base.validate();
    return base;
}

}  // namespace fhoi
