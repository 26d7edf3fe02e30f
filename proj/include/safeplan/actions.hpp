#pragma once

#include <map>
#include <string>
#include <vector>

#include "safeplan/state.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Action specifications
// ---------------------------------------------------------------------------

/// An action template (params non-empty, args empty) or a grounded step
/// (params empty, args holding the bound symbols). Postconditions use STRIPS
/// add/delete semantics: positive literals are added, negated ones deleted.
struct ActionSpec {
    std::string name;
    std::vector<std::string> params; // slot names, template form only
    std::vector<std::string> args;   // bound symbols, grounded form only
    std::vector<Literal> pre;
    std::vector<Literal> post;
    std::string required_skill;

    bool is_ground() const { return params.empty(); }

    auto operator<=>(const ActionSpec&) const = default;
};

inline std::string signature(const ActionSpec& a) {
    return a.name + "(" + join(a.is_ground() ? a.args : a.params, ", ") + ")";
}

/// Named invariants every plan is expected to maintain.
inline constexpr const char* kInvariantConservation = "object-conservation";
inline constexpr const char* kInvariantStaticFixed = "static-objects-fixed";

struct PlanSpec {
    std::vector<Literal> goal;
    WorldState initial;
    std::vector<std::string> invariants{kInvariantConservation, kInvariantStaticFixed};
    std::vector<ActionSpec> steps;

    auto operator<=>(const PlanSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

namespace detail {
inline std::string substitute(const std::string& sym,
                              const std::map<std::string, std::string>& bindings) {
    auto it = bindings.find(sym);
    if (it != bindings.end()) return it->second;
    if (is_location_of(sym)) {
        auto base = bindings.find(sym.substr(2));
        if (base != bindings.end()) return kLocationOfPrefix + base->second;
    }
    return sym;
}
} // namespace detail

/// Replaces every parameter slot (and derived L_<slot> reference) with its
/// binding. All slots must be bound.
inline ActionSpec instantiate_action(const ActionSpec& tmpl,
                                     const std::map<std::string, std::string>& bindings) {
    ActionSpec grounded;
    grounded.name = tmpl.name;
    grounded.required_skill = tmpl.required_skill;
    grounded.args.reserve(tmpl.params.size());
    for (const auto& slot : tmpl.params) {
        auto it = bindings.find(slot);
        if (it == bindings.end()) throw UnboundSlot(slot);
        grounded.args.push_back(it->second);
    }
    auto ground_literals = [&](const std::vector<Literal>& in) {
        std::vector<Literal> out;
        out.reserve(in.size());
        for (const auto& lit : in) {
            Literal g = lit;
            for (auto& arg : g.atom.args) arg = detail::substitute(arg, bindings);
            out.push_back(std::move(g));
        }
        return out;
    };
    grounded.pre = ground_literals(tmpl.pre);
    grounded.post = ground_literals(tmpl.post);
    return grounded;
}

// ---------------------------------------------------------------------------
// Built-in action vocabulary
// ---------------------------------------------------------------------------

namespace skill {
inline constexpr const char* GoTo = "GoTo";
inline constexpr const char* Pickup = "Pickup";
inline constexpr const char* Put = "Put";
inline constexpr const char* Open = "Open";
inline constexpr const char* Close = "Close";
inline constexpr const char* SwitchOn = "SwitchOn";
} // namespace skill

/// Six household templates; PickupObject carries the canonical
/// at-location / not-holding / in-list / has-skill precondition set and the
/// holding / no-longer-located postcondition pair.
inline std::vector<ActionSpec> builtin_actions() {
    auto lit = [](const char* p, std::vector<std::string> args, bool neg = false) {
        return Literal{Atom{p, std::move(args)}, neg};
    };
    std::vector<ActionSpec> lib;

    ActionSpec go;
    go.name = "GoToLocation";
    go.params = {"R", "l"};
    go.post = {lit(pred::At, {"R", "L_R"}, true), lit(pred::At, {"R", "l"})};
    go.required_skill = skill::GoTo;
    lib.push_back(go);

    ActionSpec pickup;
    pickup.name = "PickupObject";
    pickup.params = {"R", "o"};
    pickup.pre = {lit(pred::At, {"R", "L_o"}),
                  lit(pred::Holding, {"R", "o"}, true),
                  lit(pred::InList, {"o", kObjectListId}),
                  lit(pred::HasSkill, {"R", skill::Pickup})};
    pickup.post = {lit(pred::Holding, {"R", "o"}),
                   lit(pred::Located, {"o", "L_o"}, true)};
    pickup.required_skill = skill::Pickup;
    lib.push_back(pickup);

    ActionSpec put;
    put.name = "PutObject";
    put.params = {"R", "o", "l"};
    put.pre = {lit(pred::Holding, {"R", "o"}),
               lit(pred::At, {"R", "l"}),
               lit(pred::InList, {"o", kObjectListId})};
    put.post = {lit(pred::Holding, {"R", "o"}, true),
                lit(pred::Located, {"o", "l"})};
    put.required_skill = skill::Put;
    lib.push_back(put);

    ActionSpec open;
    open.name = "OpenObject";
    open.params = {"R", "o"};
    open.pre = {lit(pred::At, {"R", "L_o"}), lit(pred::InList, {"o", kObjectListId})};
    open.post = {lit("IsOpen", {"o"})};
    open.required_skill = skill::Open;
    lib.push_back(open);

    ActionSpec close;
    close.name = "CloseObject";
    close.params = {"R", "o"};
    close.pre = {lit(pred::At, {"R", "L_o"}),
                 lit(pred::InList, {"o", kObjectListId}),
                 lit("IsOpen", {"o"})};
    close.post = {lit("IsOpen", {"o"}, true)};
    close.required_skill = skill::Close;
    lib.push_back(close);

    ActionSpec switch_on;
    switch_on.name = "SwitchOn";
    switch_on.params = {"R", "o"};
    switch_on.pre = {lit(pred::At, {"R", "L_o"}), lit(pred::InList, {"o", kObjectListId})};
    switch_on.post = {lit("IsOn", {"o"})};
    switch_on.required_skill = skill::SwitchOn;
    lib.push_back(switch_on);

    return lib;
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

inline json literal_to_json(const Literal& l) {
    json j;
    j["pred"] = l.atom.predicate;
    j["args"] = l.atom.args;
    if (l.negated) j["neg"] = true;
    return j;
}

inline Literal literal_from_json(const json& j, int line_no = 0) {
    require_only_keys(j, line_no, {"pred", "args", "neg"});
    Literal lit;
    lit.atom.predicate = require_string(j, line_no, "pred");
    const json& args = require_key(j, line_no, "args");
    if (!args.is_array()) throw MalformedRecord(line_no, "'args' must be an array");
    for (const auto& a : args) {
        if (!a.is_string()) throw MalformedRecord(line_no, "atom args must be strings");
        lit.atom.args.push_back(a.get<std::string>());
    }
    if (auto it = j.find("neg"); it != j.end()) {
        if (!it->is_boolean()) throw MalformedRecord(line_no, "'neg' must be a boolean");
        lit.negated = it->get<bool>();
    }
    if (auto arity = builtin_arity(lit.atom.predicate);
        arity && static_cast<int>(lit.atom.args.size()) != *arity)
        throw MalformedRecord(line_no, "predicate '" + lit.atom.predicate + "' takes " +
                                           std::to_string(*arity) + " arguments");
    return lit;
}

inline json action_to_json(const ActionSpec& a) {
    json j;
    j["name"] = a.name;
    j["params"] = a.params;
    json pre = json::array(), post = json::array();
    for (const auto& l : a.pre) pre.push_back(literal_to_json(l));
    for (const auto& l : a.post) post.push_back(literal_to_json(l));
    j["pre"] = pre;
    j["post"] = post;
    j["required_skill"] = a.required_skill;
    return j;
}

inline ActionSpec action_from_json(const json& j, int line_no = 0) {
    require_only_keys(j, line_no, {"name", "params", "pre", "post", "required_skill"});
    ActionSpec a;
    a.name = require_string(j, line_no, "name");
    const json& params = require_key(j, line_no, "params");
    if (!params.is_array()) throw MalformedRecord(line_no, "'params' must be an array");
    for (const auto& p : params) a.params.push_back(p.get<std::string>());
    for (const auto& l : require_key(j, line_no, "pre")) a.pre.push_back(literal_from_json(l, line_no));
    for (const auto& l : require_key(j, line_no, "post")) a.post.push_back(literal_from_json(l, line_no));
    a.required_skill = require_string(j, line_no, "required_skill");
    // A postcondition may not both add and delete the same atom.
    for (const auto& l : a.post)
        for (const auto& m : a.post)
            if (l.atom == m.atom && l.negated != m.negated)
                throw MalformedRecord(line_no, "contradictory postcondition on " + to_string(l.atom));
    return a;
}

/// Loads extra action templates; entries override built-ins of the same name.
inline std::vector<ActionSpec> load_action_library(const std::string& path,
                                                   bool include_builtins = true) {
    std::vector<ActionSpec> lib = include_builtins ? builtin_actions() : std::vector<ActionSpec>{};
    for_each_jsonl(path, [&](int line_no, const json& j) {
        ActionSpec a = action_from_json(j, line_no);
        bool replaced = false;
        for (auto& existing : lib)
            if (existing.name == a.name) { existing = a; replaced = true; break; }
        if (!replaced) lib.push_back(std::move(a));
    });
    return lib;
}

inline const ActionSpec* find_action(const std::vector<ActionSpec>& lib, const std::string& name) {
    for (const auto& a : lib)
        if (a.name == name) return &a;
    return nullptr;
}

/// Fills in steps that carry only a head (no pre/post) from the library:
/// the template's parameters bind positionally to the step's arguments.
/// Steps with explicit conditions or without a known template pass through.
inline PlanSpec expand_plan_steps(const PlanSpec& plan, const std::vector<ActionSpec>& lib) {
    PlanSpec out = plan;
    for (auto& step : out.steps) {
        if (!step.pre.empty() || !step.post.empty()) continue;
        const ActionSpec* tmpl = find_action(lib, step.name);
        if (!tmpl || tmpl->params.size() != step.args.size()) continue;
        std::map<std::string, std::string> bindings;
        for (std::size_t i = 0; i < tmpl->params.size(); ++i)
            bindings[tmpl->params[i]] = step.args[i];
        step = instantiate_action(*tmpl, bindings);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonicalization of plans
// ---------------------------------------------------------------------------

/// Argument positions that name objects for the built-in predicates.
inline std::vector<std::size_t> object_positions(const std::string& predicate) {
    if (predicate == pred::Located || predicate == pred::InList) return {0};
    if (predicate == pred::Holding) return {1};
    return {};
}

namespace detail {
inline void canonicalize_literals(std::vector<Literal>& lits, const CanonicalMap& map,
                                  std::set<std::string>* renamed) {
    for (auto& lit : lits) {
        for (std::size_t i : object_positions(lit.atom.predicate)) {
            if (i >= lit.atom.args.size()) continue;
            std::string before = lit.atom.args[i];
            std::string after = map.canonical(before);
            if (after != before) {
                lit.atom.args[i] = after;
                if (renamed) renamed->insert(before);
            }
        }
    }
}

inline void apply_renames(std::vector<std::string>& args, const std::set<std::string>& renamed,
                          const CanonicalMap& map) {
    for (auto& arg : args) {
        if (renamed.count(arg)) {
            arg = map.canonical(arg);
        } else if (is_location_of(arg) && renamed.count(arg.substr(2))) {
            arg = kLocationOfPrefix + map.canonical(arg.substr(2));
        }
    }
}
} // namespace detail

/// Rewrites every object reference to its canonical form: object-position
/// atom arguments plus any step argument or derived-location base that named
/// a renamed object. Robot, location and skill symbols are left alone.
inline PlanSpec canonicalize_plan(const PlanSpec& plan, const CanonicalMap& map) {
    PlanSpec out = plan;
    std::set<std::string> renamed;
    {
        std::vector<Literal> lits;
        for (const auto& a : out.initial.atoms) lits.push_back(Literal{a, false});
        detail::canonicalize_literals(lits, map, &renamed);
        out.initial.atoms.clear();
        for (auto& l : lits) out.initial.add(l.atom);
    }
    detail::canonicalize_literals(out.goal, map, &renamed);
    for (auto& step : out.steps) {
        detail::canonicalize_literals(step.pre, map, &renamed);
        detail::canonicalize_literals(step.post, map, &renamed);
    }
    for (auto& step : out.steps) {
        detail::apply_renames(step.args, renamed, map);
        for (auto& lit : step.pre) detail::apply_renames(lit.atom.args, renamed, map);
        for (auto& lit : step.post) detail::apply_renames(lit.atom.args, renamed, map);
    }
    return out;
}

} // namespace safeplan
