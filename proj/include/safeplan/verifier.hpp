#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "safeplan/actions.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Violations and reports
// ---------------------------------------------------------------------------

enum class ViolationKind {
    InitialConditionFailure,
    PreconditionFailure,
    InvariantFailure,
    GoalFailure,
    UnknownObject,
    MissingSkill,
};

inline std::string to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::InitialConditionFailure: return "InitialConditionFailure";
        case ViolationKind::PreconditionFailure: return "PreconditionFailure";
        case ViolationKind::InvariantFailure: return "InvariantFailure";
        case ViolationKind::GoalFailure: return "GoalFailure";
        case ViolationKind::UnknownObject: return "UnknownObject";
        case ViolationKind::MissingSkill: return "MissingSkill";
    }
    return {};
}

/// One verification failure. step_index is -1 for checks against the initial
/// state or the goal; otherwise it names the offending step (0-based).
/// detail carries the failing literal or invariant name.
struct Violation {
    ViolationKind kind = ViolationKind::PreconditionFailure;
    int step_index = -1;
    std::string detail;
    std::string message;

    auto operator<=>(const Violation&) const = default;
};

enum class VerifyStatus { valid, invalid };

struct VerificationReport {
    VerifyStatus status = VerifyStatus::valid;
    std::vector<Violation> violations;
    std::optional<WorldState> final_state; // present iff every step applied
    std::vector<WorldState> states_trace;  // s0 .. s_n while propagation held

    bool valid() const { return status == VerifyStatus::valid; }
};

// ---------------------------------------------------------------------------
// Invariant checks (object conservation, static objects)
// ---------------------------------------------------------------------------

/// Per-state global invariants: every scene object has exactly one locator
/// atom (a Located(o, .) or a Holding(., o)), and static objects are never
/// held. Returned violations carry step_index -1; callers re-stamp it.
inline std::vector<Violation> check_invariants(const WorldState& state,
                                               const SceneDescription& scene) {
    std::vector<Violation> out;
    for (const auto& object : scene.object_list) {
        int locators = 0;
        for (const auto& a : state.atoms) {
            if (a.args.size() != 2) continue;
            if (a.predicate == pred::Located && a.args[0] == object) ++locators;
            if (a.predicate == pred::Holding && a.args[1] == object) ++locators;
        }
        if (locators == 0) {
            out.push_back({ViolationKind::InvariantFailure, -1, kInvariantConservation,
                           "object '" + object + "' has no location (lost)"});
        } else if (locators > 1) {
            out.push_back({ViolationKind::InvariantFailure, -1, kInvariantConservation,
                           "object '" + object + "' has " + std::to_string(locators) +
                               " locations (duplicated)"});
        }
    }
    for (const auto& object : scene.static_objects) {
        for (const auto& a : state.atoms) {
            if (a.predicate == pred::Holding && a.args.size() == 2 && a.args[1] == object) {
                out.push_back({ViolationKind::InvariantFailure, -1, kInvariantStaticFixed,
                               "static object '" + object + "' is held"});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Literal evaluation
// ---------------------------------------------------------------------------

namespace detail {

/// Truth of one grounded literal. InList and HasSkill are static predicates
/// evaluated against the scene and the skill registry; everything else is
/// state membership. An unresolvable derived location makes a positive
/// literal false and a negated one true.
inline bool literal_holds(const Literal& lit, const WorldState& state,
                          const SceneDescription& scene, const SkillRegistry& skills,
                          const CanonicalMap& map) {
    bool truth;
    if (lit.atom.predicate == pred::InList && lit.atom.args.size() == 2) {
        truth = lit.atom.args[1] == kObjectListId && in_list(lit.atom.args[0], scene, map);
    } else if (lit.atom.predicate == pred::HasSkill && lit.atom.args.size() == 2) {
        truth = skills.has(lit.atom.args[0], lit.atom.args[1]);
    } else {
        auto resolved = resolve_atom(lit.atom, state);
        truth = resolved && state.contains(*resolved);
    }
    return lit.negated ? !truth : truth;
}

/// STRIPS transition: deletes first, then adds. Derived locations resolve
/// against the pre-transition state; unresolvable deletes are no-ops and
/// unresolvable adds are dropped.
inline WorldState apply_post(const WorldState& state, const std::vector<Literal>& post) {
    WorldState next = state;
    for (const auto& lit : post) {
        if (!lit.negated) continue;
        if (auto resolved = resolve_atom(lit.atom, state)) next.remove(*resolved);
    }
    for (const auto& lit : post) {
        if (lit.negated) continue;
        if (auto resolved = resolve_atom(lit.atom, state)) next.add(*resolved);
    }
    return next;
}

/// Object symbols referenced by a grounded step, read off the object
/// positions of its literals (including derived-location bases).
inline std::set<std::string> step_objects(const ActionSpec& step) {
    std::set<std::string> objects;
    auto scan = [&](const std::vector<Literal>& lits) {
        for (const auto& lit : lits) {
            for (std::size_t i : object_positions(lit.atom.predicate)) {
                if (i < lit.atom.args.size() && !is_location_of(lit.atom.args[i]))
                    objects.insert(lit.atom.args[i]);
            }
        }
    };
    scan(step.pre);
    scan(step.post);
    return objects;
}

/// The acting robot of a grounded step: the first argument by built-in
/// convention, falling back to the first At/Holding/HasSkill subject.
inline std::string step_robot(const ActionSpec& step) {
    if (!step.args.empty()) return step.args.front();
    for (const auto& lits : {step.pre, step.post})
        for (const auto& lit : lits)
            if ((lit.atom.predicate == pred::At || lit.atom.predicate == pred::Holding ||
                 lit.atom.predicate == pred::HasSkill) &&
                !lit.atom.args.empty())
                return lit.atom.args.front();
    return {};
}

inline void push_unique(std::vector<Violation>& out, Violation v) {
    for (const auto& existing : out)
        if (existing == v) return;
    out.push_back(std::move(v));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Plan verification
// ---------------------------------------------------------------------------

/// Verifies a grounded plan end to end:
///   1. the initial state satisfies the global invariants and references only
///      known objects;
///   2. each step references known objects, the robot has the required skill,
///      the preconditions hold, and the post-transition state keeps the
///      invariants;
///   3. the final state satisfies every goal literal (subset semantics).
/// All violations are collected; state propagation stops at the first step
/// that fails, so later steps only get the state-independent checks.
inline VerificationReport verify_plan(const PlanSpec& input_plan, const SceneDescription& scene,
                                      const SkillRegistry& skills, const CanonicalMap& map) {
    const PlanSpec plan = canonicalize_plan(input_plan, map);
    VerificationReport report;
    std::vector<Violation>& violations = report.violations;

    for (const auto& step : plan.steps)
        if (!step.is_ground()) throw Error("plan step '" + step.name + "' is not grounded");

    // Initial state: known objects plus invariants.
    for (const auto& atom : plan.initial.atoms) {
        for (std::size_t i : object_positions(atom.predicate)) {
            if (i >= atom.args.size()) continue;
            const std::string& object = atom.args[i];
            if (atom.predicate == pred::InList) continue;
            if (!in_list(object, scene, map))
                detail::push_unique(violations,
                                    {ViolationKind::UnknownObject, -1, object,
                                     "initial state references unknown object '" + object + "'"});
        }
    }
    for (auto v : check_invariants(plan.initial, scene)) {
        v.kind = ViolationKind::InitialConditionFailure;
        detail::push_unique(violations, v);
    }

    report.states_trace.push_back(plan.initial);
    WorldState state = plan.initial;
    bool propagating = true;

    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const ActionSpec& step = plan.steps[i];
        const int index = static_cast<int>(i);
        bool step_failed = false;

        // Known-object and skill checks are state independent and always run.
        for (const auto& object : detail::step_objects(step)) {
            if (!in_list(object, scene, map)) {
                detail::push_unique(violations,
                                    {ViolationKind::UnknownObject, index, object,
                                     signature(step) + " references unknown object '" + object + "'"});
                step_failed = true;
            }
        }
        if (!step.required_skill.empty()) {
            std::string robot = detail::step_robot(step);
            if (!skills.has(robot, step.required_skill)) {
                detail::push_unique(violations,
                                    {ViolationKind::MissingSkill, index, step.required_skill,
                                     "robot '" + robot + "' lacks skill '" + step.required_skill +
                                         "' for " + signature(step)});
                step_failed = true;
            }
        }

        if (!propagating) continue;

        for (const auto& lit : step.pre) {
            if (detail::literal_holds(lit, state, scene, skills, map)) continue;
            step_failed = true;
            // InList and HasSkill failures that duplicate the dedicated checks
            // above are not restated.
            if (lit.atom.predicate == pred::InList && !lit.negated && lit.atom.args.size() == 2 &&
                lit.atom.args[1] == kObjectListId && !in_list(lit.atom.args[0], scene, map)) {
                continue;
            }
            if (lit.atom.predicate == pred::HasSkill && !lit.negated && lit.atom.args.size() == 2) {
                bool already_reported = lit.atom.args[1] == step.required_skill &&
                                        !skills.has(detail::step_robot(step), step.required_skill);
                if (!already_reported) {
                    detail::push_unique(violations,
                                        {ViolationKind::MissingSkill, index, lit.atom.args[1],
                                         "precondition " + to_string(lit) + " fails for " + signature(step)});
                }
                continue;
            }
            detail::push_unique(violations,
                                {ViolationKind::PreconditionFailure, index, to_string(lit),
                                 "precondition " + to_string(lit) + " fails for " + signature(step)});
        }

        if (step_failed) {
            propagating = false;
            continue;
        }

        // Static objects may not be moved by a postcondition.
        for (const auto& lit : step.post) {
            if (lit.atom.predicate == pred::Located && lit.atom.args.size() == 2 &&
                scene.static_objects.count(lit.atom.args[0])) {
                detail::push_unique(violations,
                                    {ViolationKind::InvariantFailure, index, kInvariantStaticFixed,
                                     signature(step) + " moves static object '" + lit.atom.args[0] + "'"});
                step_failed = true;
            }
        }
        if (step_failed) {
            propagating = false;
            continue;
        }

        state = detail::apply_post(state, step.post);
        report.states_trace.push_back(state);

        bool invariant_failed = false;
        for (auto v : check_invariants(state, scene)) {
            v.step_index = index;
            detail::push_unique(violations, v);
            invariant_failed = true;
        }
        if (invariant_failed) propagating = false;
    }

    if (propagating && report.states_trace.size() == plan.steps.size() + 1) {
        report.final_state = state;
        for (const auto& goal : plan.goal) {
            if (!detail::literal_holds(goal, state, scene, skills, map)) {
                detail::push_unique(violations,
                                    {ViolationKind::GoalFailure, -1, to_string(goal),
                                     "goal literal " + to_string(goal) + " does not hold in the final state"});
            }
        }
    }

    report.status = violations.empty() ? VerifyStatus::valid : VerifyStatus::invalid;
    return report;
}

// ---------------------------------------------------------------------------
// Structured specification text
// ---------------------------------------------------------------------------

/// Canonical text block with GOAL / INITIAL / INVARIANTS / STEPS sections.
/// parse_structured_spec inverts it exactly.
inline std::string emit_structured_spec(const PlanSpec& plan) {
    std::ostringstream out;
    out << "GOAL:\n";
    for (const auto& lit : plan.goal) out << "  " << to_string(lit) << "\n";
    out << "INITIAL:\n";
    for (const auto& atom : plan.initial.atoms) out << "  " << to_string(atom) << "\n";
    out << "INVARIANTS:\n";
    for (const auto& inv : plan.invariants) out << "  " << inv << "\n";
    out << "STEPS:\n";
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const ActionSpec& step = plan.steps[i];
        out << "  " << (i + 1) << ". " << signature(step) << "\n";
        if (!step.required_skill.empty()) out << "    SKILL: " << step.required_skill << "\n";
        out << "    PRE:\n";
        for (const auto& lit : step.pre) out << "      " << to_string(lit) << "\n";
        out << "    POST:\n";
        for (const auto& lit : step.post) out << "      " << to_string(lit) << "\n";
    }
    return out.str();
}

namespace detail {

inline Atom parse_atom_text(const std::string& text, int line_no) {
    auto open = text.find('(');
    auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw SpecParseError(line_no, "expected Predicate(args): '" + text + "'");
    Atom atom;
    atom.predicate = trim(text.substr(0, open));
    if (atom.predicate.empty()) throw SpecParseError(line_no, "missing predicate name");
    std::string args = text.substr(open + 1, close - open - 1);
    std::size_t start = 0;
    while (start <= args.size() && !trim(args).empty()) {
        auto comma = args.find(',', start);
        std::string arg = trim(args.substr(start, comma == std::string::npos ? std::string::npos
                                                                             : comma - start));
        if (arg.empty()) throw SpecParseError(line_no, "empty argument in '" + text + "'");
        atom.args.push_back(arg);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return atom;
}

inline Literal parse_literal_text(std::string text, int line_no) {
    Literal lit;
    text = trim(text);
    if (!text.empty() && text[0] == '!') {
        lit.negated = true;
        text = trim(text.substr(1));
    }
    lit.atom = parse_atom_text(text, line_no);
    return lit;
}

} // namespace detail

/// Strict parser for the structured block. Throws SpecParseError on any line
/// that does not fit the grammar.
inline PlanSpec parse_structured_spec(const std::string& text) {
    PlanSpec plan;
    plan.invariants.clear();

    enum class Section { none, goal, initial, invariants, steps };
    enum class StepPart { none, pre, post };
    Section section = Section::none;
    StepPart part = StepPart::none;
    ActionSpec current;
    bool in_step = false;

    auto flush_step = [&] {
        if (in_step) plan.steps.push_back(current);
        current = ActionSpec{};
        in_step = false;
        part = StepPart::none;
    };

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty()) continue;
        if (line == "GOAL:") { flush_step(); section = Section::goal; continue; }
        if (line == "INITIAL:") { flush_step(); section = Section::initial; continue; }
        if (line == "INVARIANTS:") { flush_step(); section = Section::invariants; continue; }
        if (line == "STEPS:") { flush_step(); section = Section::steps; continue; }

        switch (section) {
            case Section::none:
                throw SpecParseError(line_no, "content before GOAL section");
            case Section::goal:
                plan.goal.push_back(detail::parse_literal_text(line, line_no));
                break;
            case Section::initial: {
                Literal lit = detail::parse_literal_text(line, line_no);
                if (lit.negated) throw SpecParseError(line_no, "initial state atoms cannot be negated");
                plan.initial.add(lit.atom);
                break;
            }
            case Section::invariants:
                plan.invariants.push_back(line);
                break;
            case Section::steps: {
                auto dot = line.find(". ");
                bool is_header = dot != std::string::npos && dot > 0 &&
                                 line.find_first_not_of("0123456789") == dot;
                if (is_header) {
                    flush_step();
                    in_step = true;
                    Atom head = detail::parse_atom_text(line.substr(dot + 2), line_no);
                    current.name = head.predicate;
                    current.args = head.args;
                } else if (starts_with(line, "SKILL:")) {
                    if (!in_step) throw SpecParseError(line_no, "SKILL outside a step");
                    current.required_skill = trim(line.substr(6));
                } else if (line == "PRE:") {
                    if (!in_step) throw SpecParseError(line_no, "PRE outside a step");
                    part = StepPart::pre;
                } else if (line == "POST:") {
                    if (!in_step) throw SpecParseError(line_no, "POST outside a step");
                    part = StepPart::post;
                } else {
                    if (!in_step || part == StepPart::none)
                        throw SpecParseError(line_no, "literal outside PRE/POST: '" + line + "'");
                    Literal lit = detail::parse_literal_text(line, line_no);
                    (part == StepPart::pre ? current.pre : current.post).push_back(lit);
                }
                break;
            }
        }
    }
    flush_step();
    if (section == Section::none) throw SpecParseError(line_no, "no GOAL section found");
    return plan;
}

/// Lenient wrapper for provider output: parses from the first GOAL: line.
inline PlanSpec extract_structured_spec(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    std::string block;
    bool found = false;
    while (std::getline(in, line)) {
        if (!found && trim(line) == "GOAL:") found = true;
        if (found) block += line + "\n";
    }
    if (!found) throw SpecParseError(1, "response contains no GOAL section");
    return parse_structured_spec(block);
}

// ---------------------------------------------------------------------------
// Report JSON
// ---------------------------------------------------------------------------

inline json state_to_json(const WorldState& state) {
    json arr = json::array();
    for (const auto& a : state.atoms) arr.push_back(to_string(a));
    return arr;
}

inline json report_to_json(const VerificationReport& report) {
    json j;
    j["status"] = report.valid() ? "valid" : "invalid";
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back(json{{"kind", to_string(v.kind)},
                                  {"step_index", v.step_index},
                                  {"detail", v.detail},
                                  {"message", v.message}});
    }
    j["violations"] = violations;
    j["final_state"] = report.final_state ? state_to_json(*report.final_state) : json(nullptr);
    json trace = json::array();
    for (const auto& s : report.states_trace) trace.push_back(state_to_json(s));
    j["trace"] = trace;
    return j;
}

} // namespace safeplan
