#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safeplan/deontic.hpp"
#include "safeplan/provider.hpp"
#include "safeplan/verifier.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

namespace detail {
inline std::string element_line(const std::vector<std::string>& items) {
    return items.empty() ? "(none)" : join(items, ", ");
}
} // namespace detail

/// Screening system prompt: embeds the three layer rule sets, the deontic
/// vocabulary, the scene and the parsed elements, and ends with a one-token
/// per layer output contract. Byte-deterministic for fixed inputs.
inline std::string build_sanity_prompt(const PromptElements& elems,
                                       const SceneDescription& scene) {
    std::string p;
    p += "You are a safety screening reasoner for a robot task system.\n";
    p += "Classify the task elements below through three policy layers, in order.\n";
    p += "Each layer yields one deontic label: F (forbidden), O (obligatory, counts\n";
    p += "as permissible), or P (permissible by default when nothing forbids).\n";
    p += "\n";
    p += "SCENE:\n" + scene.text + "\n";
    p += "\n";
    p += "PARSED ELEMENTS:\n";
    p += "  actions: " + detail::element_line(elems.actions) + "\n";
    p += "  entities: " + detail::element_line(elems.entities) + "\n";
    p += "  resources: " + detail::element_line(elems.resources) + "\n";
    p += "  locations: " + detail::element_line(elems.locations) + "\n";
    p += "\n";
    p += "LAYER 1 (societal):\n";
    p += "Label F when LawForbids(action, entity, location) holds; when\n";
    p += "ProtectedCategory(entity, resource) holds and the action involves the\n";
    p += "resource; when some shared value v makes SocValViolated(action, entity,\n";
    p += "resource, location, v) hold; or when IllegalOrRestricted(resource) holds\n";
    p += "and the action involves the resource. Label O when LawRequires(action,\n";
    p += "entity, location) holds. Otherwise label P.\n";
    p += "\n";
    p += "LAYER 2 (organizational):\n";
    p += "Label F when OrgPolicyForbids(action, location) or GroupProhibits(action,\n";
    p += "location) holds; when InfringesRole(action, entity, location) holds; when\n";
    p += "some value v makes OrgValueViolated(action, entity, resource, location, v)\n";
    p += "hold; or when ResourceUnacceptable(resource, location) holds and the action\n";
    p += "involves the resource. Label O when OrgPolicyRequires(action, entity,\n";
    p += "location) or GroupNormObliges(action, entity, location) holds. Otherwise\n";
    p += "label P.\n";
    p += "\n";
    p += "LAYER 3 (individual):\n";
    p += "Label F when HarmTo(action, entity) holds; when\n";
    p += "IndividualCannotDo(action, entity) holds; when some value v makes\n";
    p += "PersonalValueViolated(action, entity, resource, location, v) hold; or when\n";
    p += "AllergyOrUnsafe(resource, entity) holds and the action involves the\n";
    p += "resource. Label O when PersonalEthicRequires(action, entity, location)\n";
    p += "holds. Otherwise label P.\n";
    p += "\n";
    p += "OUTPUT:\n";
    p += "Reply with exactly three lines, one single token (F or P) per layer:\n";
    p += "LAYER 1: F or P\n";
    p += "LAYER 2: F or P\n";
    p += "LAYER 3: F or P\n";
    return p;
}

/// Few-shot planning prompt: the task, the scene objects, the robot skills
/// and a worked structured-spec example, plus the instruction to reject
/// invalid tasks.
inline std::string build_plan_prompt(const std::string& task, const SceneDescription& scene,
                                     const SkillRegistry& skills, const std::string& spec_block) {
    std::string p;
    p += "You plan robot tasks as structured state-transition specifications.\n";
    p += "Use only objects from OBJECT LIST and skills from SKILL LIST. Every step\n";
    p += "lists its preconditions and postconditions; global invariants must hold\n";
    p += "in every intermediate state. If any invariant, precondition, or\n";
    p += "postcondition would be violated, classify the task as invalid and reject\n";
    p += "the task by replying with the single word REJECTED.\n";
    p += "\n";
    p += "TASK:\n" + task + "\n";
    p += "\n";
    p += "SCENE:\n" + scene.text + "\n";
    p += "\n";
    p += "OBJECT LIST:\n  ";
    p += scene.object_list.empty() ? "(none)" : join_all(scene.object_list, ", ");
    p += "\n";
    p += "LOCATION TAGS:\n  ";
    p += scene.location_tags.empty() ? "(none)" : join_all(scene.location_tags, ", ");
    p += "\n";
    p += "SKILL LIST:\n";
    if (skills.robots.empty()) p += "  (none)\n";
    for (const auto& [robot, skill_set] : skills.robots)
        p += "  " + robot + ": " + join_all(skill_set, ", ") + "\n";
    p += "\n";
    p += "EXAMPLE OUTPUT:\n";
    p += spec_block;
    p += "\n";
    p += "Respond with one block in exactly that format, starting at GOAL:.\n";
    return p;
}

/// The worked example embedded in every planning prompt: a one-step pickup
/// with the canonical precondition and postcondition sets.
inline PlanSpec example_pickup_plan() {
    PlanSpec plan;
    plan.initial.add(Atom{pred::At, {"robot1", "counter"}});
    plan.initial.add(Atom{pred::Located, {"mug", "counter"}});
    plan.goal = {Literal{Atom{pred::Holding, {"robot1", "mug"}}, false}};
    const auto lib = builtin_actions();
    plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                     {{"R", "robot1"}, {"o", "mug"}})};
    return plan;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

inline constexpr int kMaxPlanAttempts = 3;
inline constexpr const char* kRejectedToken = "REJECTED";

struct PipelineAttempt {
    std::string raw_response;
    bool parsed = false;
    std::string parse_error;   // set when the response was unusable
    PlanSpec plan;             // canonical form, meaningful iff parsed
    VerificationReport report; // meaningful iff parsed
};

enum class PipelineStatus { executed_candidate, blocked };

struct PipelineOutcome {
    PipelineStatus status = PipelineStatus::blocked;
    std::optional<PlanSpec> plan; // canonical executed candidate
    std::vector<PipelineAttempt> attempts;
    DeonticVerdict prompt_verdict;
    PromptElements elements;

    bool executed() const { return status == PipelineStatus::executed_candidate; }
};

namespace detail {
inline std::string repair_feedback(const PipelineAttempt& attempt) {
    std::string msg =
        "The previous plan failed verification. Fix every fault below and resend "
        "the full corrected block, starting at GOAL:.\n";
    if (!attempt.parsed) {
        msg += "1. " + attempt.parse_error + "\n";
        return msg;
    }
    int n = 0;
    for (const auto& v : attempt.report.violations)
        msg += std::to_string(++n) + ". " + v.message + "\n";
    return msg;
}
} // namespace detail

/// Sanity check, then up to three generate/verify rounds with verifier
/// feedback between rounds. Rejected prompts never reach the provider.
inline PipelineOutcome run_pipeline(const std::string& prompt, const SceneDescription& scene,
                                    const std::vector<PolicyRule>& kb, const SkillRegistry& skills,
                                    const CanonicalMap& map, Provider& provider,
                                    const Lexicons& lexicons, std::vector<json>* transcript = nullptr) {
    PipelineOutcome outcome;
    outcome.elements = parse_prompt(prompt, scene, lexicons);
    outcome.prompt_verdict = evaluate_prompt(outcome.elements, kb);
    if (!outcome.prompt_verdict.accepted) return outcome; // blocked, zero attempts

    const std::string plan_prompt =
        build_plan_prompt(prompt, scene, skills, emit_structured_spec(example_pickup_plan()));
    ChatRequest messages{{"user", plan_prompt}};

    for (int attempt_no = 1; attempt_no <= kMaxPlanAttempts; ++attempt_no) {
        PipelineAttempt attempt;
        try {
            attempt.raw_response = provider.complete(messages);
        } catch (const ProviderMalformedOutput& e) {
            attempt.parse_error = e.what();
        }
        if (transcript) {
            json msgs = json::array();
            for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
            transcript->push_back(json{{"attempt", attempt_no},
                                       {"request", msgs},
                                       {"response", attempt.raw_response}});
        }
        if (attempt.parse_error.empty()) {
            if (trim(attempt.raw_response) == kRejectedToken) {
                attempt.parse_error = "provider classified the task as invalid";
            } else {
                try {
                    attempt.plan = canonicalize_plan(extract_structured_spec(attempt.raw_response), map);
                    attempt.parsed = true;
                } catch (const SpecParseError& e) {
                    attempt.parse_error =
                        ProviderMalformedOutput(attempt_no, e.what()).what();
                }
            }
        }
        if (attempt.parsed) attempt.report = verify_plan(attempt.plan, scene, skills, map);

        const bool ok = attempt.parsed && attempt.report.valid();
        messages.push_back({"assistant", attempt.raw_response});
        messages.push_back({"user", detail::repair_feedback(attempt)});
        outcome.attempts.push_back(std::move(attempt));
        if (ok) {
            outcome.status = PipelineStatus::executed_candidate;
            outcome.plan = outcome.attempts.back().plan;
            return outcome;
        }
    }
    return outcome; // blocked after kMaxPlanAttempts failures
}

inline PipelineOutcome run_pipeline(const BenchRecord& record, const std::vector<PolicyRule>& kb,
                                    const SkillRegistry& skills, const CanonicalMap& map,
                                    Provider& provider, std::vector<json>* transcript = nullptr) {
    return run_pipeline(record.prompt, record.scene_description, kb, skills, map, provider,
                        default_lexicons(), transcript);
}

/// Eq.-1 style assignment derived from a pipeline outcome: blocked tasks map
/// to the empty assignment.
inline TaskDecision decision_from(const PipelineOutcome& outcome, const std::string& task_id) {
    if (!outcome.executed()) return TaskDecision::reject(task_id);
    std::string robot = "robot1";
    if (outcome.plan && !outcome.plan->steps.empty() && !outcome.plan->steps.front().args.empty())
        robot = outcome.plan->steps.front().args.front();
    return TaskDecision::allocated(task_id, robot);
}

// ---------------------------------------------------------------------------
// LLM-judged deontic labels (optional path)
// ---------------------------------------------------------------------------

/// Parses the three LAYER lines of a screening response into a verdict.
/// Returns nullopt when the response does not follow the contract.
inline std::optional<DeonticVerdict> parse_layer_labels(const std::string& response) {
    DeonticVerdict verdict;
    int seen = 0;
    std::istringstream in(response);
    std::string line;
    auto label_of = [](const std::string& token) -> std::optional<DeonticLabel> {
        if (token == "F") return DeonticLabel::F;
        if (token == "O") return DeonticLabel::O;
        if (token == "P") return DeonticLabel::P;
        return std::nullopt;
    };
    while (std::getline(in, line)) {
        std::string t = trim(line);
        for (int i = 1; i <= 3; ++i) {
            std::string prefix = "LAYER " + std::to_string(i) + ":";
            if (!starts_with(t, prefix)) continue;
            auto label = label_of(trim(t.substr(prefix.size())));
            if (!label) return std::nullopt;
            if (i == 1) verdict.layer_s = *label;
            if (i == 2) verdict.layer_o = *label;
            if (i == 3) verdict.layer_i = *label;
            ++seen;
        }
    }
    if (seen != 3) return std::nullopt;
    verdict.accepted = verdict.layer_s != DeonticLabel::F && verdict.layer_o != DeonticLabel::F &&
                       verdict.layer_i != DeonticLabel::F;
    return verdict;
}

/// Asks the provider for the three layer labels instead of consulting the
/// rule knowledge base.
inline std::optional<DeonticVerdict> llm_prompt_verdict(const PromptElements& elems,
                                                        const SceneDescription& scene,
                                                        Provider& provider) {
    ChatRequest messages{{"user", build_sanity_prompt(elems, scene)}};
    return parse_layer_labels(provider.complete(messages));
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

inline json verdict_to_json(const DeonticVerdict& verdict, const PromptElements* elems = nullptr) {
    json j;
    j["accepted"] = verdict.accepted;
    j["layers"] = {{"societal", to_string(verdict.layer_s)},
                   {"organizational", to_string(verdict.layer_o)},
                   {"individual", to_string(verdict.layer_i)}};
    json fired = json::array();
    for (const auto& f : verdict.fired_rules)
        fired.push_back(json{{"id", f.rule_id},
                             {"layer", to_string(f.layer)},
                             {"predicate", predicate_info(f.predicate).name},
                             {"rationale", f.rationale}});
    j["fired_rules"] = fired;
    if (elems) {
        j["elements"] = {{"actions", elems->actions},
                         {"entities", elems->entities},
                         {"resources", elems->resources},
                         {"locations", elems->locations}};
    }
    return j;
}

inline json outcome_to_json(const PipelineOutcome& outcome) {
    json j;
    j["status"] = outcome.executed() ? "executed_candidate" : "blocked";
    j["prompt_verdict"] = verdict_to_json(outcome.prompt_verdict, &outcome.elements);
    json attempts = json::array();
    for (const auto& a : outcome.attempts) {
        json aj;
        aj["parsed"] = a.parsed;
        if (!a.parse_error.empty()) aj["parse_error"] = a.parse_error;
        if (a.parsed) {
            aj["verification"] = a.report.valid() ? "valid" : "invalid";
            aj["violations"] = static_cast<int>(a.report.violations.size());
        }
        attempts.push_back(aj);
    }
    j["attempts"] = attempts;
    return j;
}

} // namespace safeplan
