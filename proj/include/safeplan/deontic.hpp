#pragma once

#include <array>
#include <string>
#include <vector>

#include "safeplan/prompt.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Labels, layers and predicates
// ---------------------------------------------------------------------------

/// Deontic classification of a prompt at one layer. Obligatory is reported
/// but counts as Permissible for acceptance.
enum class DeonticLabel { F, O, P };

inline std::string to_string(DeonticLabel l) {
    switch (l) {
        case DeonticLabel::F: return "F";
        case DeonticLabel::O: return "O";
        case DeonticLabel::P: return "P";
    }
    return {};
}

enum class Layer { societal, organizational, individual };

inline constexpr std::array<Layer, 3> kLayerOrder = {Layer::societal, Layer::organizational,
                                                     Layer::individual};

inline std::string to_string(Layer l) {
    switch (l) {
        case Layer::societal: return "societal";
        case Layer::organizational: return "organizational";
        case Layer::individual: return "individual";
    }
    return {};
}

inline Layer layer_from(const std::string& s) {
    if (s == "societal") return Layer::societal;
    if (s == "organizational") return Layer::organizational;
    if (s == "individual") return Layer::individual;
    throw UnknownEnumValue("layer", s);
}

/// The rule predicates, each legal in exactly one layer.
enum class RulePredicate {
    // societal
    LawForbids,
    LawRequires,
    ProtectedCategory,
    SocValViolated,
    IllegalOrRestricted,
    // organizational
    OrgPolicyForbids,
    GroupProhibits,
    InfringesRole,
    OrgValueViolated,
    ResourceUnacceptable,
    OrgPolicyRequires,
    GroupNormObliges,
    // individual
    HarmTo,
    IndividualCannotDo,
    PersonalValueViolated,
    AllergyOrUnsafe,
    PersonalEthicRequires,
};

struct PredicateInfo {
    RulePredicate predicate;
    const char* name;
    Layer layer;
    DeonticLabel effect; // F for forbidding predicates, O for requiring ones
};

inline const std::vector<PredicateInfo>& predicate_table() {
    static const std::vector<PredicateInfo> table = {
        {RulePredicate::LawForbids, "LawForbids", Layer::societal, DeonticLabel::F},
        {RulePredicate::LawRequires, "LawRequires", Layer::societal, DeonticLabel::O},
        {RulePredicate::ProtectedCategory, "ProtectedCategory", Layer::societal, DeonticLabel::F},
        {RulePredicate::SocValViolated, "SocValViolated", Layer::societal, DeonticLabel::F},
        {RulePredicate::IllegalOrRestricted, "IllegalOrRestricted", Layer::societal, DeonticLabel::F},
        {RulePredicate::OrgPolicyForbids, "OrgPolicyForbids", Layer::organizational, DeonticLabel::F},
        {RulePredicate::GroupProhibits, "GroupProhibits", Layer::organizational, DeonticLabel::F},
        {RulePredicate::InfringesRole, "InfringesRole", Layer::organizational, DeonticLabel::F},
        {RulePredicate::OrgValueViolated, "OrgValueViolated", Layer::organizational, DeonticLabel::F},
        {RulePredicate::ResourceUnacceptable, "ResourceUnacceptable", Layer::organizational, DeonticLabel::F},
        {RulePredicate::OrgPolicyRequires, "OrgPolicyRequires", Layer::organizational, DeonticLabel::O},
        {RulePredicate::GroupNormObliges, "GroupNormObliges", Layer::organizational, DeonticLabel::O},
        {RulePredicate::HarmTo, "HarmTo", Layer::individual, DeonticLabel::F},
        {RulePredicate::IndividualCannotDo, "IndividualCannotDo", Layer::individual, DeonticLabel::F},
        {RulePredicate::PersonalValueViolated, "PersonalValueViolated", Layer::individual, DeonticLabel::F},
        {RulePredicate::AllergyOrUnsafe, "AllergyOrUnsafe", Layer::individual, DeonticLabel::F},
        {RulePredicate::PersonalEthicRequires, "PersonalEthicRequires", Layer::individual, DeonticLabel::O},
    };
    return table;
}

inline const PredicateInfo& predicate_info(RulePredicate p) {
    for (const auto& info : predicate_table())
        if (info.predicate == p) return info;
    throw Error("unknown rule predicate");
}

inline const PredicateInfo* predicate_info_by_name(const std::string& name) {
    for (const auto& info : predicate_table())
        if (name == info.name) return &info;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Policy rules
// ---------------------------------------------------------------------------

/// Pattern over the (action, entity, resource, location) tuple. An empty
/// slot is a wildcard; a non-empty slot matches when any of its patterns is
/// a case-insensitive substring of any extracted element in that slot.
struct MatchPattern {
    std::vector<std::string> action;
    std::vector<std::string> entity;
    std::vector<std::string> resource;
    std::vector<std::string> location;

    auto operator<=>(const MatchPattern&) const = default;
};

struct PolicyRule {
    std::string id;
    Layer layer = Layer::societal;
    RulePredicate predicate = RulePredicate::LawForbids;
    MatchPattern match;
    DeonticLabel effect = DeonticLabel::F;
    std::string rationale;

    auto operator<=>(const PolicyRule&) const = default;
};

/// Validates the layer/predicate pairing and the predicate's fixed effect.
inline void validate_rule(const PolicyRule& rule) {
    const PredicateInfo& info = predicate_info(rule.predicate);
    if (info.layer != rule.layer)
        throw InvalidPredicateForLayer(rule.id, std::string(info.name) + " belongs to the " +
                                                    to_string(info.layer) + " layer");
    if (info.effect != rule.effect)
        throw InvalidPredicateForLayer(rule.id, std::string(info.name) + " rules must have effect " +
                                                    to_string(info.effect));
}

namespace detail {
inline bool slot_matches(const std::vector<std::string>& patterns,
                         const std::vector<std::string>& elements) {
    if (patterns.empty()) return true; // wildcard
    for (const auto& p : patterns)
        for (const auto& e : elements)
            if (contains_ci(e, p)) return true;
    return false;
}
} // namespace detail

inline bool rule_matches(const PolicyRule& rule, const PromptElements& elems) {
    return detail::slot_matches(rule.match.action, elems.actions) &&
           detail::slot_matches(rule.match.entity, elems.entities) &&
           detail::slot_matches(rule.match.resource, elems.resources) &&
           detail::slot_matches(rule.match.location, elems.locations);
}

// ---------------------------------------------------------------------------
// Layer evaluation
// ---------------------------------------------------------------------------

struct FiredRule {
    std::string rule_id;
    Layer layer = Layer::societal;
    RulePredicate predicate = RulePredicate::LawForbids;
    std::string rationale;

    auto operator<=>(const FiredRule&) const = default;
};

struct LayerResult {
    DeonticLabel label = DeonticLabel::P;
    std::vector<FiredRule> fired;
};

/// One layer of screening: any matching forbidding rule yields F; otherwise
/// any matching obligation yields O; otherwise the default is P. Fired rules
/// are reported F-rules first, in knowledge-base order within each group.
inline LayerResult evaluate_layer(Layer layer, const PromptElements& elems,
                                  const std::vector<PolicyRule>& kb) {
    LayerResult result;
    std::vector<FiredRule> forbidding, obliging;
    for (const auto& rule : kb) {
        if (rule.layer != layer)
            throw RuleLayerMismatch("rule '" + rule.id + "' belongs to the " +
                                    to_string(rule.layer) + " layer, not " + to_string(layer));
        validate_rule(rule);
        if (!rule_matches(rule, elems)) continue;
        FiredRule fired{rule.id, rule.layer, rule.predicate, rule.rationale};
        (rule.effect == DeonticLabel::F ? forbidding : obliging).push_back(std::move(fired));
    }
    if (!forbidding.empty())
        result.label = DeonticLabel::F;
    else if (!obliging.empty())
        result.label = DeonticLabel::O;
    result.fired = std::move(forbidding);
    result.fired.insert(result.fired.end(), obliging.begin(), obliging.end());
    return result;
}

struct DeonticVerdict {
    DeonticLabel layer_s = DeonticLabel::P;
    DeonticLabel layer_o = DeonticLabel::P;
    DeonticLabel layer_i = DeonticLabel::P;
    bool accepted = true;
    std::vector<FiredRule> fired_rules;

    DeonticLabel label(Layer l) const {
        switch (l) {
            case Layer::societal: return layer_s;
            case Layer::organizational: return layer_o;
            case Layer::individual: return layer_i;
        }
        return DeonticLabel::P;
    }

    auto operator<=>(const DeonticVerdict&) const = default;
};

/// Runs the societal, organizational and individual layers in that order.
/// The prompt is accepted iff no layer returns F; an O label is acceptance
/// equivalent to P.
inline DeonticVerdict evaluate_prompt(const PromptElements& elems,
                                      const std::vector<PolicyRule>& kb) {
    DeonticVerdict verdict;
    for (Layer layer : kLayerOrder) {
        std::vector<PolicyRule> layer_kb;
        for (const auto& rule : kb)
            if (rule.layer == layer) layer_kb.push_back(rule);
        LayerResult r = evaluate_layer(layer, elems, layer_kb);
        switch (layer) {
            case Layer::societal: verdict.layer_s = r.label; break;
            case Layer::organizational: verdict.layer_o = r.label; break;
            case Layer::individual: verdict.layer_i = r.label; break;
        }
        verdict.fired_rules.insert(verdict.fired_rules.end(), r.fired.begin(), r.fired.end());
    }
    verdict.accepted = verdict.layer_s != DeonticLabel::F &&
                       verdict.layer_o != DeonticLabel::F &&
                       verdict.layer_i != DeonticLabel::F;
    return verdict;
}

// ---------------------------------------------------------------------------
// Policy knowledge base (JSONL)
// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<std::string> pattern_slot(const json& match, const char* key,
                                             const std::string& rule_id) {
    auto it = match.find(key);
    if (it == match.end()) return {};
    std::vector<std::string> out;
    if (it->is_string()) {
        out.push_back(normalize(it->get<std::string>()));
    } else if (it->is_array()) {
        for (const auto& v : *it) {
            if (!v.is_string()) throw MalformedPattern(rule_id, std::string("slot '") + key + "' must hold strings");
            out.push_back(normalize(v.get<std::string>()));
        }
    } else {
        throw MalformedPattern(rule_id, std::string("slot '") + key + "' must be a string or array");
    }
    for (const auto& p : out)
        if (p.empty()) throw MalformedPattern(rule_id, std::string("empty pattern in slot '") + key + "'");
    if (out.empty()) throw MalformedPattern(rule_id, std::string("slot '") + key + "' is empty");
    return out;
}
} // namespace detail

inline PolicyRule policy_rule_from_json(const json& j, int line_no) {
    require_only_keys(j, line_no, {"id", "layer", "predicate", "match", "effect", "rationale"});
    PolicyRule rule;
    rule.id = require_string(j, line_no, "id");
    rule.layer = layer_from(require_string(j, line_no, "layer"));
    std::string pred_name = require_string(j, line_no, "predicate");
    const PredicateInfo* info = predicate_info_by_name(pred_name);
    if (!info) throw UnknownEnumValue("predicate", pred_name);
    rule.predicate = info->predicate;
    const json& match = require_key(j, line_no, "match");
    if (!match.is_object()) throw MalformedPattern(rule.id, "'match' must be an object");
    for (const auto& item : match.items())
        if (item.key() != "action" && item.key() != "entity" && item.key() != "resource" &&
            item.key() != "location")
            throw MalformedPattern(rule.id, "unknown match slot '" + item.key() + "'");
    rule.match.action = detail::pattern_slot(match, "action", rule.id);
    rule.match.entity = detail::pattern_slot(match, "entity", rule.id);
    rule.match.resource = detail::pattern_slot(match, "resource", rule.id);
    rule.match.location = detail::pattern_slot(match, "location", rule.id);
    std::string effect = require_string(j, line_no, "effect");
    if (effect == "F")
        rule.effect = DeonticLabel::F;
    else if (effect == "O")
        rule.effect = DeonticLabel::O;
    else
        throw UnknownEnumValue("effect", effect);
    rule.rationale = require_string(j, line_no, "rationale");
    validate_rule(rule);
    return rule;
}

inline json policy_rule_to_json(const PolicyRule& rule) {
    json match = json::object();
    auto put = [&](const char* key, const std::vector<std::string>& patterns) {
        if (patterns.empty()) return;
        if (patterns.size() == 1)
            match[key] = patterns.front();
        else
            match[key] = patterns;
    };
    put("action", rule.match.action);
    put("entity", rule.match.entity);
    put("resource", rule.match.resource);
    put("location", rule.match.location);
    json j;
    j["id"] = rule.id;
    j["layer"] = to_string(rule.layer);
    j["predicate"] = predicate_info(rule.predicate).name;
    j["match"] = match;
    j["effect"] = to_string(rule.effect);
    j["rationale"] = rule.rationale;
    return j;
}

inline std::vector<PolicyRule> load_policy_kb(const std::string& path) {
    std::vector<PolicyRule> kb;
    for_each_jsonl(path, [&](int line_no, const json& j) {
        kb.push_back(policy_rule_from_json(j, line_no));
    });
    return kb;
}

inline void save_policy_kb(const std::string& path, const std::vector<PolicyRule>& kb) {
    std::vector<json> rows;
    rows.reserve(kb.size());
    for (const auto& r : kb) rows.push_back(policy_rule_to_json(r));
    write_jsonl(path, rows);
}

} // namespace safeplan
