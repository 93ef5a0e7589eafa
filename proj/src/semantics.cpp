#include "fhoi/semantics.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fhoi/serialize.hpp"

namespace fhoi {

namespace {
constexpr char kTableMagic[4] = {'F', 'H', 'E', 'B'};
constexpr std::uint32_t kTableVersion = 1;
}  // namespace

int EmbeddingTable::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

int Taxonomy::class_of(int action, int object) const {
    for (std::size_t c = 0; c < classes.size(); ++c)
        if (classes[c].action == action && classes[c].object == object)
            return static_cast<int>(c);
    return -1;
}

void Taxonomy::validate() const {
    if (person_object_idx < 0 || person_object_idx >= static_cast<int>(objects.size()))
        throw DataError("taxonomy: person_object_idx out of range");
    std::set<std::pair<int, int>> seen;
    for (const HoiClass& c : classes) {
        if (c.action < 0 || c.action >= static_cast<int>(actions.size()) ||
            c.object < 0 || c.object >= static_cast<int>(objects.size()))
            throw DataError("taxonomy: class references invalid action/object index");
        if (!seen.insert({c.action, c.object}).second)
            throw DataError("taxonomy: duplicate HOI class");
    }
    if (!rare.empty() && rare.size() != classes.size())
        throw DataError("taxonomy: rare flag count mismatch");
    if (!frequency.empty() && frequency.size() != classes.size())
        throw DataError("taxonomy: frequency count mismatch");
}

std::string prompt_object(const std::string& name) {
    if (name.empty()) throw ConfigError("prompt_object: empty name");
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(name[0])));
    const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
    return std::string("A photo of a") + (vowel ? "n " : " ") + name;
}

std::string prompt_action(const std::string& name) {
    if (name.empty()) throw ConfigError("prompt_action: empty name");
    // The verb stem is used verbatim; no morphology.
    return "A photo of a person " + name + "-ing";
}

EmbeddingTable load_table(const std::string& path) {
    BinReader r(path);
    r.expect_magic(kTableMagic);
    const std::uint32_t version = r.u32();
    if (version != kTableVersion)
        throw FormatError("unsupported FHEB version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (dim == 0 || dim % 2 != 0)
        throw FormatError("FHEB dim must be positive even, got " + std::to_string(dim));
    EmbeddingTable t;
    t.dim = dim;
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        if (!seen.insert(name).second)
            throw FormatError("duplicate name in table: " + name);
        std::vector<double> v(dim);
        double norm2 = 0.0;
        for (std::uint32_t j = 0; j < dim; ++j) {
            v[j] = static_cast<double>(r.f32());
            norm2 += v[j] * v[j];
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) throw FormatError("zero vector in table: " + name);
        // Already-unit vectors are kept bit-exact so save/load round-trips.
        if (std::abs(norm - 1.0) > 1e-6)
            for (double& x : v) x /= norm;
        t.names.push_back(std::move(name));
        t.vecs.push_back(std::move(v));
    }
    return t;
}

void save_table(const EmbeddingTable& table, const std::string& path) {
    BinWriter w(path);
    w.magic(kTableMagic);
    w.u32(kTableVersion);
    w.u32(static_cast<std::uint32_t>(table.size()));
    w.u32(static_cast<std::uint32_t>(table.dim));
    for (std::size_t i = 0; i < table.size(); ++i) {
        w.str(table.names[i]);
        for (double x : table.vecs[i]) w.f32(static_cast<float>(x));
    }
    w.close();
}

OverMatrix over_matrix(const EmbeddingTable& objects, const EmbeddingTable& actions) {
    if (objects.dim != actions.dim)
        throw ShapeError("over_matrix: dim mismatch " + std::to_string(objects.dim) +
                         " vs " + std::to_string(actions.dim));
    OverMatrix o;
    o.n = objects.size();
    o.m = actions.size();
    o.d.resize(o.n * o.m);
    for (std::size_t i = 0; i < o.n; ++i)
        for (std::size_t j = 0; j < o.m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < objects.dim; ++k)
                s += objects.vecs[i][k] * actions.vecs[j][k];
            o.d[i * o.m + j] = s;
        }
    return o;
}

Tensor hoi_class_embedding(const Taxonomy& tax, const EmbeddingTable& objects,
                           const EmbeddingTable& actions) {
    if (objects.dim != actions.dim) throw ShapeError("hoi_class_embedding: dim mismatch");
    const std::size_t d = objects.dim;
    const std::size_t c = tax.num_classes();
    Tensor e = Tensor::zeros({c, d});
    for (std::size_t i = 0; i < c; ++i) {
        const HoiClass& cls = tax.classes[i];
        if (cls.object < 0 || cls.object >= static_cast<int>(objects.size()) ||
            cls.action < 0 || cls.action >= static_cast<int>(actions.size()))
            throw DataError("hoi_class_embedding: dangling object/action index");
        double norm2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double v = actions.vecs[cls.action][k] + objects.vecs[cls.object][k];
            e.mut(i, k) = v;
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0)
            throw NumericError("hoi_class_embedding: cancelled embedding for class " +
                               std::to_string(i));
        for (std::size_t k = 0; k < d; ++k) e.mut(i, k) /= norm;
    }
    return e;
}

Taxonomy load_taxonomy(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open taxonomy: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("taxonomy parse error: " + std::string(e.what()));
    }
    Taxonomy t;
    try {
        t.objects = j.at("objects").get<std::vector<std::string>>();
        t.actions = j.at("actions").get<std::vector<std::string>>();
        for (const auto& c : j.at("hoi_classes"))
            t.classes.push_back({c.at("action_idx").get<int>(), c.at("object_idx").get<int>()});
        t.rare = j.at("rare").get<std::vector<bool>>();
        t.person_object_idx = j.at("person_object_idx").get<int>();
        if (j.contains("frequency"))
            t.frequency = j.at("frequency").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("taxonomy field error: " + std::string(e.what()));
    }
    t.validate();
    return t;
}

void save_taxonomy(const Taxonomy& tax, const std::string& path) {
    nlohmann::json j;
    j["objects"] = tax.objects;
    j["actions"] = tax.actions;
    nlohmann::json classes = nlohmann::json::array();
    for (const HoiClass& c : tax.classes)
        classes.push_back({{"action_idx", c.action}, {"object_idx", c.object}});
    j["hoi_classes"] = classes;
    j["rare"] = tax.rare;
    j["frequency"] = tax.frequency;
    j["person_object_idx"] = tax.person_object_idx;
    std::vector<std::string> op, ap;
    for (const auto& n : tax.objects) op.push_back(prompt_object(n));
    for (const auto& n : tax.actions) ap.push_back(prompt_action(n));
    j["object_prompts"] = op;
    j["action_prompts"] = ap;
    std::ofstream os(path);
    if (!os) throw DataError("cannot write taxonomy: " + path);
    os << j.dump(2) << "\n";
}

}  // namespace fhoi
