#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
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

using fhoi::EmbeddingTable;
using fhoi::SplitMix64;

EmbeddingTable random_table(std::size_t n, std::size_t dim, SplitMix64& rng) {
    EmbeddingTable t;
    t.dim = dim;
    for (std::size_t i = 0; i < n; ++i) {
        t.names.push_back("e" + std::to_string(i));
        std::vector<double> v(dim);
        double n2 = 0;
        for (double& x : v) {
            x = rng.gaussian();
            n2 += x * x;
        }
        for (double& x : v) x /= std::sqrt(n2);
        t.vecs.push_back(std::move(v));
    }
    return t;
}

std::vector<double> random_unit(std::size_t dim, SplitMix64& rng) {
    std::vector<double> v(dim);
    double n2 = 0;
    for (double& x : v) {
        x = rng.gaussian();
        n2 += x * x;
    }
    for (double& x : v) x /= std::sqrt(n2);
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void test_object_nomination() {
    SplitMix64 rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 3 + rng.below(10);
        const std::size_t dim = 8;
        const int person = static_cast<int>(rng.below(n));
        const std::size_t k_o = 1 + rng.below(n - 1);
        EmbeddingTable t = random_table(n, dim, rng);
        std::vector<double> v_c = random_unit(dim, rng);

        fhoi::ObjectNomination nom = fhoi::nominate_objects(t, v_c, k_o, person);
        REQUIRE(nom.indices.size() == k_o + 1, "k_o + 1 entries");
        REQUIRE(nom.scores.size() == k_o, "k_o scores");
        REQUIRE(nom.indices.back() == person, "person appended last");
        REQUIRE(nom.person_idx == person, "person index recorded");

        std::set<int> seen(nom.indices.begin(), nom.indices.end());
        REQUIRE(seen.size() == nom.indices.size(), "no duplicate nominees");

        // Full-sort oracle over non-person objects, ties to lower index.
        std::vector<std::pair<double, int>> all;
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<int>(i) == person) continue;
            all.push_back({dot(t.vecs[i], v_c), static_cast<int>(i)});
        }
        std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t p = 0; p < k_o; ++p) {
            REQUIRE(nom.indices[p] == all[p].second, "top-k matches full sort");
            REQUIRE(near(nom.scores[p], all[p].first, 1e-12), "score matches dot product");
        }
    }
}

void test_tied_scores() {
    EmbeddingTable t;
    t.dim = 2;
    t.names = {"person", "a", "b", "c"};
    t.vecs = {{0, 1}, {1, 0}, {1, 0}, {1, 0}};
    std::vector<double> v_c = {1, 0};
    fhoi::ObjectNomination nom = fhoi::nominate_objects(t, v_c, 2, 0);
    REQUIRE(nom.indices[0] == 1 && nom.indices[1] == 2, "ties resolve to lower index");
}

void test_related_verbs() {
    SplitMix64 rng(55);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(6), m = 2 + rng.below(8);
        const std::size_t k = 1 + rng.below(m);
        fhoi::OverMatrix over;
        over.n = n;
        over.m = m;
        over.d.resize(n * m);
        for (double& x : over.d) x = rng.uniform(-1, 1);
        std::vector<int> objs;
        for (std::size_t i = 0; i < n; ++i) objs.push_back(static_cast<int>(i));

        auto rel = fhoi::related_verbs(over, objs, k);
        REQUIRE(rel.size() == n, "one verb list per object");
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(rel[i].size() == k, "k verbs per object");
            std::vector<std::pair<double, int>> row;
            for (std::size_t j = 0; j < m; ++j)
                row.push_back({over.at(i, j), static_cast<int>(j)});
            std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t p = 0; p < k; ++p)
                REQUIRE(rel[i][p] == row[p].second, "verb top-k matches full sort");
        }
    }
}

void test_action_scores() {
    SplitMix64 rng(77);
    EmbeddingTable actions = random_table(6, 8, rng);
    std::vector<double> v_c = random_unit(8, rng);

    fhoi::ObjectNomination nom;
    nom.indices = {2, 0, 4};  // last entry is the person slot
    nom.scores = {0.5, -0.25};
    nom.person_idx = 4;
    std::vector<std::vector<int>> related = {{1, 3}, {0, 5}};

    fhoi::Tensor s = fhoi::action_scene_scores(nom, related, actions, v_c);
    REQUIRE(s.rows() == 2 && s.cols() == 2, "k_o x k score grid");
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q) {
            const double want =
                std::exp(nom.scores[p]) * dot(actions.vecs[related[p][q]], v_c);
            REQUIRE(near(s.at(p, q), want, 1e-12), "exp(S_os) * cosine oracle");
        }

    // With unit score bound |S_os| <= 1, the confidence factor is bounded by e.
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q)
            REQUIRE(std::abs(s.at(p, q)) <= std::exp(1.0) + 1e-12,
                    "scores bounded by e for unit inputs");

    // Zero object confidence leaves the plain cosine.
    nom.scores = {0.0, 0.0};
    fhoi::Tensor s0 = fhoi::action_scene_scores(nom, related, actions, v_c);
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q)
            REQUIRE(near(s0.at(p, q), dot(actions.vecs[related[p][q]], v_c), 1e-12),
                    "neutral confidence reduces to cosine");
}

void test_action_nomination() {
    SplitMix64 rng(303);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(4);
        const std::size_t m = 6;
        std::vector<std::vector<int>> related(rows);
        fhoi::Tensor scores = fhoi::Tensor::zeros({rows, cols});
        for (std::size_t p = 0; p < rows; ++p)
            for (std::size_t q = 0; q < cols; ++q) {
                related[p].push_back(static_cast<int>(rng.below(m)));
                scores.mut(p, q) = rng.uniform(-2, 2);
            }
        const std::size_t k_a = 1 + rng.below(4);

        // Enumeration oracle: best score per verb, then top-k_a by score with
        // ties to the lower verb index.
        std::vector<std::pair<double, int>> best;
        for (std::size_t v = 0; v < m; ++v) {
            double b = -1e300;
            bool present = false;
            for (std::size_t p = 0; p < rows; ++p)
                for (std::size_t q = 0; q < cols; ++q)
                    if (related[p][q] == static_cast<int>(v)) {
                        present = true;
                        b = std::max(b, scores.at(p, q));
                    }
            if (present) best.push_back({b, static_cast<int>(v)});
        }
        std::stable_sort(best.begin(), best.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        if (best.size() < k_a) {
            bool threw = false;
            try {
                fhoi::nominate_actions(scores, related, k_a);
            } catch (const fhoi::ConfigError&) {
                threw = true;
            }
            REQUIRE(threw, "fewer distinct verbs than k_a rejected");
            continue;
        }
        fhoi::ActionNomination nom = fhoi::nominate_actions(scores, related, k_a);
        REQUIRE(nom.indices.size() == k_a, "dedup before top-k");
        std::set<int> uniq(nom.indices.begin(), nom.indices.end());
        REQUIRE(uniq.size() == nom.indices.size(), "no duplicate verbs");
        for (std::size_t p = 0; p < k_a; ++p) {
            REQUIRE(nom.indices[p] == best[p].second, "verb ranking matches oracle");
            REQUIRE(near(nom.scores[p], best[p].first, 1e-12), "kept max score per verb");
        }
    }
}

void test_row_permutation_invariance() {
    SplitMix64 rng(404);
    const std::size_t rows = 4, cols = 3;
    std::vector<std::vector<int>> related(rows);
    fhoi::Tensor scores = fhoi::Tensor::zeros({rows, cols});
    for (std::size_t p = 0; p < rows; ++p)
        for (std::size_t q = 0; q < cols; ++q) {
            related[p].push_back(static_cast<int>(rng.below(8)));
            scores.mut(p, q) = rng.uniform(-1, 1);
        }
    fhoi::ActionNomination a = fhoi::nominate_actions(scores, related, 3);

    const std::size_t perm[rows] = {2, 0, 3, 1};
    std::vector<std::vector<int>> related2(rows);
    fhoi::Tensor scores2 = fhoi::Tensor::zeros({rows, cols});
    for (std::size_t p = 0; p < rows; ++p) {
        related2[p] = related[perm[p]];
        for (std::size_t q = 0; q < cols; ++q) scores2.mut(p, q) = scores.at(perm[p], q);
    }
    fhoi::ActionNomination b = fhoi::nominate_actions(scores2, related2, 3);
    REQUIRE(a.indices == b.indices && a.scores == b.scores,
            "object row order does not change the verb shortlist");
}

}  // namespace

int main() {
    test_object_nomination();
    test_tied_scores();
    test_related_verbs();
    test_action_scores();
    test_action_nomination();
    test_row_permutation_invariance();
    std::cout << "test_nominators: all checks passed\n";
    return 0;
}
