#pragma once

#include <vector>

#include "fhoi/semantics.hpp"

namespace fhoi {

// K_o scored object candidates plus the always-present person entry.
// `indices` has K_o+1 entries; `scores` covers only the K_o scored ones.
struct ObjectNomination {
    std::vector<int> indices;
    std::vector<double> scores;
    int person_idx = -1;

    std::size_t k_o() const { return scores.size(); }
};

struct ActionNomination {
    std::vector<int> indices;
    std::vector<double> scores;
    std::vector<int> provenance;  // nominating object index per verb
};

// S_os = L_o^T v_c over non-person objects; top-k_o, ties to lower index,
// person appended so the list always has k_o+1 entries.
ObjectNomination nominate_objects(const EmbeddingTable& table,
                                  const std::vector<double>& v_c, std::size_t k_o,
                                  int person_idx);

// Per nominated object (person excluded), the k verbs with largest OVeR row.
std::vector<std::vector<int>> related_verbs(const OverMatrix& over,
                                            const std::vector<int>& obj_indices,
                                            std::size_t k);

// S_as[p,q] = exp(S_os^nom[p]) * <v_c, l_a(related[p][q])>.
Tensor action_scene_scores(const ObjectNomination& nom,
                           const std::vector<std::vector<int>>& related,
                           const EmbeddingTable& actions,
                           const std::vector<double>& v_c);

// Flatten, dedup verbs by max score, top-k_a, ties to lower verb index.
// row_objects maps score rows to global object indices for the provenance
// record; when empty, provenance holds row positions.
ActionNomination nominate_actions(const Tensor& scores,
                                  const std::vector<std::vector<int>>& related,
                                  std::size_t k_a,
                                  const std::vector<int>& row_objects = {});

}  // namespace fhoi
