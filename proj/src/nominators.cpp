#include "fhoi/nominators.hpp"

#include <algorithm>
#include <cmath>

namespace fhoi {

namespace {

// Stable top-k: sort by (score desc, index asc).
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    idx.resize(k);
    return idx;
}

}  // namespace

ObjectNomination nominate_objects(const EmbeddingTable& table,
                                  const std::vector<double>& v_c, std::size_t k_o,
                                  int person_idx) {
    const std::size_t n = table.size();
    if (person_idx < 0 || static_cast<std::size_t>(person_idx) >= n)
        throw ConfigError("nominate_objects: person index out of range");
    if (v_c.size() != table.dim)
        throw ShapeError("nominate_objects: v_c dim mismatch");
    if (k_o < 1 || k_o + 1 > n)
        throw ConfigError("nominate_objects: k_o out of range (need 1 <= k_o <= N-1)");

    std::vector<double> s(n, -2.0);  // person sinks below any cosine
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<int>(i) == person_idx) continue;
        double dot = 0.0;
        for (std::size_t k = 0; k < table.dim; ++k) dot += table.vecs[i][k] * v_c[k];
        s[i] = dot;
    }
    ObjectNomination nom;
    nom.person_idx = person_idx;
    for (std::size_t i : top_k(s, k_o)) {
        nom.indices.push_back(static_cast<int>(i));
        nom.scores.push_back(s[i]);
    }
    nom.indices.push_back(person_idx);
    return nom;
}

std::vector<std::vector<int>> related_verbs(const OverMatrix& over,
                                            const std::vector<int>& obj_indices,
                                            std::size_t k) {
    if (k < 1 || k > over.m) throw ConfigError("related_verbs: k out of range");
    std::vector<std::vector<int>> out;
    out.reserve(obj_indices.size());
    for (int oi : obj_indices) {
        if (oi < 0 || static_cast<std::size_t>(oi) >= over.n)
            throw ShapeError("related_verbs: object index out of range");
        std::vector<double> row(over.m);
        for (std::size_t j = 0; j < over.m; ++j) row[j] = over.at(oi, j);
        std::vector<int> verbs;
        verbs.reserve(k);
        for (std::size_t j : top_k(row, k)) verbs.push_back(static_cast<int>(j));
        out.push_back(std::move(verbs));
    }
    return out;
}

Tensor action_scene_scores(const ObjectNomination& nom,
                           const std::vector<std::vector<int>>& related,
                           const EmbeddingTable& actions,
                           const std::vector<double>& v_c) {
    if (related.size() != nom.k_o())
        throw ShapeError("action_scene_scores: related rows must match K_o");
    if (v_c.size() != actions.dim)
        throw ShapeError("action_scene_scores: v_c dim mismatch");
    const std::size_t k_o = related.size();
    const std::size_t k = related.empty() ? 0 : related[0].size();
    Tensor s = Tensor::zeros({k_o, k});
    for (std::size_t p = 0; p < k_o; ++p) {
        if (related[p].size() != k)
            throw ShapeError("action_scene_scores: ragged related rows");
        const double conf = std::exp(nom.scores[p]);
        for (std::size_t q = 0; q < k; ++q) {
            const auto& la = actions.vec(static_cast<std::size_t>(related[p][q]));
            double dot = 0.0;
            for (std::size_t t = 0; t < actions.dim; ++t) dot += v_c[t] * la[t];
            s.mut(p, q) = conf * dot;
        }
    }
    return s;
}

ActionNomination nominate_actions(const Tensor& scores,
                                  const std::vector<std::vector<int>>& related,
                                  std::size_t k_a,
                                  const std::vector<int>& row_objects) {
    const std::size_t k_o = scores.rows();
    const std::size_t k = scores.cols();
    if (related.size() != k_o) throw ShapeError("nominate_actions: shape mismatch");
    if (!row_objects.empty() && row_objects.size() != k_o)
        throw ShapeError("nominate_actions: row_objects size mismatch");

    // Per verb keep the max score and the object that produced it.
    struct Best {
        double score;
        int obj;
    };
    std::vector<std::pair<int, Best>> best;  // verb -> best, ordered by verb idx
    auto find = [&](int verb) -> Best* {
        for (auto& [v, b] : best)
            if (v == verb) return &b;
        return nullptr;
    };
    for (std::size_t p = 0; p < k_o; ++p)
        for (std::size_t q = 0; q < k; ++q) {
            const int verb = related[p][q];
            const double sc = scores.at(p, q);
            const int obj = row_objects.empty() ? static_cast<int>(p) : row_objects[p];
            if (Best* b = find(verb)) {
                if (sc > b->score) *b = {sc, obj};
            } else {
                best.push_back({verb, {sc, obj}});
            }
        }
    if (best.size() < k_a)
        throw ConfigError("nominate_actions: fewer distinct verbs than k_a");

    std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) {
        if (a.second.score != b.second.score) return a.second.score > b.second.score;
        return a.first < b.first;
    });
    ActionNomination nom;
    for (std::size_t i = 0; i < k_a; ++i) {
        nom.indices.push_back(best[i].first);
        nom.scores.push_back(best[i].second.score);
        nom.provenance.push_back(best[i].second.obj);
    }
    return nom;
}

}  // namespace fhoi
