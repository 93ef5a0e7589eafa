#pragma once

#include <string>
#include <vector>

#include "fhoi/tensor.hpp"

namespace fhoi {

// Frozen unit-norm embeddings for objects or actions. Vectors are ingested
// from files and never computed from the prompt strings.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> vecs;
    std::vector<std::string> prompts;  // metadata only, not serialized

    std::size_t size() const { return names.size(); }
    const std::vector<double>& vec(std::size_t i) const { return vecs.at(i); }
    int index_of(const std::string& name) const;
};

struct HoiClass {
    int action = 0;
    int object = 0;
};

struct Taxonomy {
    std::vector<std::string> objects;
    std::vector<std::string> actions;
    std::vector<HoiClass> classes;
    std::vector<bool> rare;
    std::vector<int> frequency;
    int person_object_idx = 0;

    std::size_t num_objects() const { return objects.size(); }
    std::size_t num_actions() const { return actions.size(); }
    std::size_t num_classes() const { return classes.size(); }
    // -1 when the (action, object) pair is not an HOI class.
    int class_of(int action, int object) const;
    void validate() const;
};

struct OverMatrix {
    std::size_t n = 0, m = 0;  // objects x actions
    std::vector<double> d;
    double at(std::size_t i, std::size_t j) const { return d[i * m + j]; }
};

std::string prompt_object(const std::string& name);
std::string prompt_action(const std::string& name);

EmbeddingTable load_table(const std::string& path);
void save_table(const EmbeddingTable& table, const std::string& path);

OverMatrix over_matrix(const EmbeddingTable& objects, const EmbeddingTable& actions);

// Row c = normalize(l_a(c) + l_o(c)); used directly as classifier weights.
Tensor hoi_class_embedding(const Taxonomy& tax, const EmbeddingTable& objects,
                           const EmbeddingTable& actions);

Taxonomy load_taxonomy(const std::string& path);
void save_taxonomy(const Taxonomy& tax, const std::string& path);

}  // namespace fhoi
