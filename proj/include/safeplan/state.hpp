#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "safeplan/jsonl.hpp"
#include "safeplan/text.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Ground atoms and world states
// ---------------------------------------------------------------------------

/// Well-known predicate names. Arity is fixed for these five; any other
/// predicate name is accepted as a user predicate with free arity.
namespace pred {
inline constexpr const char* At = "At";             // At(robot, location)
inline constexpr const char* Located = "Located";   // Located(object, location)
inline constexpr const char* Holding = "Holding";   // Holding(robot, object)
inline constexpr const char* HasSkill = "HasSkill"; // HasSkill(robot, skill)
inline constexpr const char* InList = "InList";     // InList(object, list-id)
} // namespace pred

/// Sentinel list id for the scene object list, as used in InList atoms.
inline constexpr const char* kObjectListId = "ObjectList";

/// Derived-location marker: an argument "L_x" denotes the current location
/// of symbol x, resolved against the world state at evaluation time.
inline constexpr const char* kLocationOfPrefix = "L_";

struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    auto operator<=>(const Atom&) const = default;
};

inline std::optional<int> builtin_arity(const std::string& predicate) {
    if (predicate == pred::At || predicate == pred::Located ||
        predicate == pred::Holding || predicate == pred::HasSkill ||
        predicate == pred::InList)
        return 2;
    return std::nullopt;
}

inline std::string to_string(const Atom& a) {
    return a.predicate + "(" + join(a.args, ", ") + ")";
}

struct Literal {
    Atom atom;
    bool negated = false;

    auto operator<=>(const Literal&) const = default;
};

inline std::string to_string(const Literal& l) {
    return (l.negated ? "!" : "") + to_string(l.atom);
}

struct WorldState {
    std::set<Atom> atoms;

    bool contains(const Atom& a) const { return atoms.count(a) > 0; }
    void add(const Atom& a) { atoms.insert(a); }
    void remove(const Atom& a) { atoms.erase(a); }

    auto operator<=>(const WorldState&) const = default;
};

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

/// Physical environment summary. object_list and location_tags hold canonical
/// symbols; static_objects marks immovable members of object_list.
struct SceneDescription {
    std::string text;
    std::set<std::string> object_list;
    std::set<std::string> location_tags;
    std::set<std::string> static_objects;

    auto operator<=>(const SceneDescription&) const = default;
};

inline SceneDescription scene_from_json(const json& j, int line_no = 0) {
    require_only_keys(j, line_no, {"text", "object_list", "location_tags", "static_objects"});
    SceneDescription scene;
    scene.text = require_string(j, line_no, "text");
    auto read_set = [&](const char* key, bool required) {
        std::set<std::string> out;
        auto it = j.find(key);
        if (it == j.end()) {
            if (required) throw MalformedRecord(line_no, std::string("missing key '") + key + "'");
            return out;
        }
        if (!it->is_array()) throw MalformedRecord(line_no, std::string("key '") + key + "' must be an array");
        for (const auto& v : *it) {
            if (!v.is_string()) throw MalformedRecord(line_no, std::string("key '") + key + "' must hold strings");
            out.insert(normalize(v.get<std::string>()));
        }
        return out;
    };
    scene.object_list = read_set("object_list", true);
    scene.location_tags = read_set("location_tags", true);
    scene.static_objects = read_set("static_objects", false);
    return scene;
}

inline json scene_to_json(const SceneDescription& scene) {
    json j;
    j["text"] = scene.text;
    j["object_list"] = scene.object_list;
    j["location_tags"] = scene.location_tags;
    if (!scene.static_objects.empty()) j["static_objects"] = scene.static_objects;
    return j;
}

inline SceneDescription load_scene(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw MalformedRecord(1, std::string("invalid JSON: ") + e.what());
    }
    return scene_from_json(j);
}

// ---------------------------------------------------------------------------
// Canonical synonym mapping
// ---------------------------------------------------------------------------

/// Synonym -> canonical symbol table. Idempotent by construction: entries are
/// chased to their final target at insert time and every target maps to itself.
class CanonicalMap {
public:
    CanonicalMap() = default;

    void add(const std::string& from, const std::string& to) {
        std::string src = normalize(from);
        std::string dst = normalize(to);
        // Chase dst through existing entries so chains collapse.
        std::set<std::string> seen{src};
        auto it = table_.find(dst);
        while (it != table_.end() && it->second != dst) {
            if (!seen.insert(it->second).second)
                throw Error("canonical map cycle through '" + from + "'");
            dst = it->second;
            it = table_.find(dst);
        }
        if (src == dst) return;
        table_[src] = dst;
        table_[dst] = dst;
        // Repoint anything that previously resolved to src.
        for (auto& [key, value] : table_)
            if (value == src) value = dst;
    }

    /// Normalized lookup; unmapped terms return their normal form unchanged.
    std::string canonical(std::string_view term) const {
        std::string n = normalize(term);
        auto it = table_.find(n);
        return it == table_.end() ? n : it->second;
    }

    bool has_entry(std::string_view term) const {
        return table_.count(normalize(term)) > 0;
    }

    const std::map<std::string, std::string>& entries() const { return table_; }

    bool operator==(const CanonicalMap&) const = default;

private:
    std::map<std::string, std::string> table_;
};

inline std::string canonical(std::string_view term, const CanonicalMap& map) {
    return map.canonical(term);
}

/// True iff the canonical form of `object` names a scene object.
inline bool in_list(std::string_view object, const SceneDescription& scene,
                    const CanonicalMap& map) {
    return scene.object_list.count(map.canonical(object)) > 0;
}

inline CanonicalMap load_canonical_map(const std::string& path) {
    CanonicalMap map;
    for_each_jsonl(path, [&](int line_no, const json& j) {
        require_only_keys(j, line_no, {"from", "to"});
        map.add(require_string(j, line_no, "from"), require_string(j, line_no, "to"));
    });
    return map;
}

inline void save_canonical_map(const std::string& path, const CanonicalMap& map) {
    std::vector<json> rows;
    for (const auto& [from, to] : map.entries()) {
        if (from == to) continue; // identity rows are implied
        rows.push_back(json{{"from", from}, {"to", to}});
    }
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Robot skills
// ---------------------------------------------------------------------------

struct SkillRegistry {
    std::map<std::string, std::set<std::string>> robots;

    bool has(const std::string& robot, const std::string& skill) const {
        auto it = robots.find(robot);
        return it != robots.end() && it->second.count(skill) > 0;
    }
    void grant(const std::string& robot, const std::string& skill) {
        robots[robot].insert(skill);
    }

    auto operator<=>(const SkillRegistry&) const = default;
};

inline SkillRegistry load_skills(const std::string& path) {
    SkillRegistry reg;
    for_each_jsonl(path, [&](int line_no, const json& j) {
        require_only_keys(j, line_no, {"robot", "skills"});
        std::string robot = require_string(j, line_no, "robot");
        const json& skills = require_key(j, line_no, "skills");
        if (!skills.is_array()) throw MalformedRecord(line_no, "key 'skills' must be an array");
        auto& set = reg.robots[robot];
        for (const auto& s : skills) {
            if (!s.is_string()) throw MalformedRecord(line_no, "skills must be strings");
            set.insert(s.get<std::string>());
        }
    });
    return reg;
}

inline SkillRegistry skills_from_json(const json& j, int line_no = 0) {
    if (!j.is_object()) throw MalformedRecord(line_no, "'skills' must be an object");
    SkillRegistry reg;
    for (const auto& item : j.items()) {
        if (!item.value().is_array())
            throw MalformedRecord(line_no, "skills for '" + item.key() + "' must be an array");
        auto& set = reg.robots[item.key()];
        for (const auto& s : item.value()) set.insert(s.get<std::string>());
    }
    return reg;
}

// ---------------------------------------------------------------------------
// Derived-location terms
// ---------------------------------------------------------------------------

inline bool is_location_of(const std::string& sym) {
    return starts_with(sym, kLocationOfPrefix);
}

/// Resolves "L_x" against a state: the location of x, whether x is an object
/// (Located) or a robot (At). Plain symbols resolve to themselves.
inline std::optional<std::string> resolve_symbol(const std::string& sym,
                                                 const WorldState& state) {
    if (!is_location_of(sym)) return sym;
    std::string base = sym.substr(2);
    for (const auto& a : state.atoms) {
        if (a.args.size() == 2 && a.predicate == pred::Located && a.args[0] == base)
            return a.args[1];
    }
    for (const auto& a : state.atoms) {
        if (a.args.size() == 2 && a.predicate == pred::At && a.args[0] == base)
            return a.args[1];
    }
    return std::nullopt;
}

/// Grounds every derived-location argument of an atom against the state.
inline std::optional<Atom> resolve_atom(const Atom& atom, const WorldState& state) {
    Atom out = atom;
    for (auto& arg : out.args) {
        auto r = resolve_symbol(arg, state);
        if (!r) return std::nullopt;
        arg = *r;
    }
    return out;
}

} // namespace safeplan
