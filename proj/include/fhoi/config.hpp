#pragma once

#include <string>
#include <vector>

#include "fhoi/detr.hpp"
#include "fhoi/model.hpp"

namespace fhoi {

// Flat run configuration: JSON file plus key=value overrides. Defaults are
// the desk-scale toy profile; reference-scale values live in the docs.
struct RunConfig {
    StackConfig stack;
    PipelineConfig pipeline;
    LossConfig loss;

    double lr = 1e-4;
    double weight_decay = 1e-4;
    double lr_decay = 0.1;
    std::size_t decay_every = 30;
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;

    std::string split_setting = "NF-UC";
    std::vector<int> unseen_objects;
    std::vector<int> unseen_verbs;

    std::size_t n_objects = 12;
    std::size_t n_actions = 10;
    std::size_t n_classes = 40;
    double rare_fraction = 0.23;
    double sigma = 0.1;
    std::size_t max_interactions = 3;
    double extra_action_prob = 0.3;
    std::size_t n_train_scenes = 200;
    std::size_t n_eval_scenes = 50;
    std::size_t top_n = 100;

    void validate() const;
};

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides);
RunConfig apply_config_overrides(RunConfig base,
                                 const std::vector<std::string>& overrides);

}  // namespace fhoi
