#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safeplan/metrics.hpp"
#include "safeplan/pipeline.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Environment and results
// ---------------------------------------------------------------------------

/// Abstract household environment. The simulator matches object names
/// exactly against the scene; the synonym table is its knowledge of which
/// foreign terms would have resolved, used to classify ambiguity crashes.
struct SimEnvironment {
    SceneDescription scene;
    WorldState state;
    SkillRegistry skills;
    CanonicalMap synonyms;
};

enum class CrashReason {
    NonexistentObject,
    UnavailableSkill,
    UnresolvedAmbiguity,
    PreconditionRuntimeFailure,
};

inline std::string to_string(CrashReason r) {
    switch (r) {
        case CrashReason::NonexistentObject: return "NonexistentObject";
        case CrashReason::UnavailableSkill: return "UnavailableSkill";
        case CrashReason::UnresolvedAmbiguity: return "UnresolvedAmbiguity";
        case CrashReason::PreconditionRuntimeFailure: return "PreconditionRuntimeFailure";
    }
    return {};
}

struct SimResult {
    bool executed = false;
    bool crashed = false;
    std::optional<int> crash_step;
    std::optional<CrashReason> crash_reason;
    bool goal_reached = false;
};

enum class TaskCategory { scene_reasoning, skill_reasoning, language_ambiguity };

inline std::string to_string(TaskCategory c) {
    switch (c) {
        case TaskCategory::scene_reasoning: return "scene_reasoning";
        case TaskCategory::skill_reasoning: return "skill_reasoning";
        case TaskCategory::language_ambiguity: return "language_ambiguity";
    }
    return {};
}

inline TaskCategory task_category_from(const std::string& s) {
    if (s == "scene_reasoning") return TaskCategory::scene_reasoning;
    if (s == "skill_reasoning") return TaskCategory::skill_reasoning;
    if (s == "language_ambiguity") return TaskCategory::language_ambiguity;
    throw UnknownEnumValue("category", s);
}

struct TaskCase {
    std::string id;
    TaskCategory category = TaskCategory::scene_reasoning;
    std::string prompt;
    SimEnvironment environment;
    bool expected_fault = false;
};

// ---------------------------------------------------------------------------
// Plan execution
// ---------------------------------------------------------------------------

/// Steps a grounded plan against a copy of the environment state with
/// runtime re-checking. Crashes are data: the result records the step and a
/// typed reason. Object references must match the scene exactly; a term that
/// only the synonym table could have resolved is an ambiguity crash.
inline SimResult execute(const PlanSpec& plan, const SimEnvironment& env) {
    SimResult result;
    result.executed = true;
    WorldState state = env.state;
    const CanonicalMap exact; // runtime lookups never auto-resolve synonyms

    auto crash = [&](int step, CrashReason reason) {
        result.crashed = true;
        result.crash_step = step;
        result.crash_reason = reason;
        return result;
    };

    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const ActionSpec& step = plan.steps[i];
        const int index = static_cast<int>(i);

        for (const auto& object : detail::step_objects(step)) {
            if (env.scene.object_list.count(object)) continue;
            if (env.scene.object_list.count(env.synonyms.canonical(object)))
                return crash(index, CrashReason::UnresolvedAmbiguity);
            return crash(index, CrashReason::NonexistentObject);
        }
        if (!step.required_skill.empty() &&
            !env.skills.has(detail::step_robot(step), step.required_skill))
            return crash(index, CrashReason::UnavailableSkill);

        for (const auto& lit : step.pre) {
            if (lit.atom.predicate == pred::HasSkill && !lit.negated && lit.atom.args.size() == 2 &&
                !env.skills.has(lit.atom.args[0], lit.atom.args[1]))
                return crash(index, CrashReason::UnavailableSkill);
            if (!detail::literal_holds(lit, state, env.scene, env.skills, exact))
                return crash(index, CrashReason::PreconditionRuntimeFailure);
        }

        state = detail::apply_post(state, step.post);
    }

    result.goal_reached = true;
    for (const auto& goal : plan.goal)
        if (!detail::literal_holds(goal, state, env.scene, env.skills, exact))
            result.goal_reached = false;
    return result;
}

// ---------------------------------------------------------------------------
// Task suite
// ---------------------------------------------------------------------------

enum class SuiteMode { baseline, safeplan };

inline std::string to_string(SuiteMode m) {
    return m == SuiteMode::baseline ? "baseline" : "safeplan";
}

struct CaseResult {
    std::string case_id;
    TaskCategory category = TaskCategory::scene_reasoning;
    bool expected_fault = false;
    std::optional<PipelineOutcome> outcome; // safeplan mode only
    SimResult sim;
    ExecutionOutcome flags;
    std::string provider_error;
};

namespace detail {
inline PipelineAttempt baseline_attempt(const std::string& prompt, const SimEnvironment& env,
                                        Provider& provider, std::vector<json>* transcript) {
    const std::string plan_prompt = build_plan_prompt(
        prompt, env.scene, env.skills, emit_structured_spec(example_pickup_plan()));
    ChatRequest messages{{"user", plan_prompt}};
    PipelineAttempt attempt;
    attempt.raw_response = provider.complete(messages);
    if (transcript) {
        json msgs = json::array();
        for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
        transcript->push_back(json{{"attempt", 1}, {"request", msgs}, {"response", attempt.raw_response}});
    }
    try {
        attempt.plan = extract_structured_spec(attempt.raw_response); // surface form, no resolution
        attempt.parsed = true;
    } catch (const SpecParseError& e) {
        attempt.parse_error = e.what();
    }
    return attempt;
}
} // namespace detail

/// Runs one case. Baseline mode executes the first candidate directly with
/// no screening and no verification; safeplan mode runs the full pipeline
/// and only executes non-blocked plans.
inline CaseResult run_task_case(const TaskCase& task, SuiteMode mode, Provider& provider,
                                const std::vector<PolicyRule>& kb,
                                std::vector<json>* transcript = nullptr) {
    CaseResult result;
    result.case_id = task.id;
    result.category = task.category;
    result.expected_fault = task.expected_fault;
    result.flags.expected_fault = task.expected_fault;

    try {
        if (mode == SuiteMode::baseline) {
            PipelineAttempt attempt =
                detail::baseline_attempt(task.prompt, task.environment, provider, transcript);
            if (attempt.parsed) {
                result.sim = execute(attempt.plan, task.environment);
            }
        } else {
            PipelineOutcome outcome =
                run_pipeline(task.prompt, task.environment.scene, kb, task.environment.skills,
                             task.environment.synonyms, provider, default_lexicons(), transcript);
            if (outcome.executed()) {
                result.sim = execute(*outcome.plan, task.environment);
            } else {
                result.flags.blocked = true;
                for (const auto& attempt : outcome.attempts)
                    if (attempt.parsed && !attempt.report.valid()) result.flags.fault_flagged = true;
            }
            result.outcome = std::move(outcome);
        }
    } catch (const ProviderTimeout& e) {
        result.provider_error = e.what();
        result.flags.blocked = true;
    } catch (const Error& e) {
        result.provider_error = e.what();
        result.flags.blocked = true;
    }

    result.flags.executed = result.sim.executed;
    result.flags.crashed = result.sim.crashed;
    return result;
}

inline std::vector<CaseResult> run_task_suite(const std::vector<TaskCase>& cases, SuiteMode mode,
                                              Provider& provider,
                                              const std::vector<PolicyRule>& kb = {}) {
    std::vector<CaseResult> results;
    results.reserve(cases.size());
    for (const auto& task : cases) results.push_back(run_task_case(task, mode, provider, kb));
    return results;
}

/// Per-category execution metrics plus the average success rate across the
/// categories present.
struct SuiteMetrics {
    std::map<std::string, ExecutionMetrics> by_category;
    double avg_sr_pct = 0.0;
};

inline SuiteMetrics suite_metrics(const std::vector<CaseResult>& results) {
    std::map<std::string, std::vector<ExecutionOutcome>> grouped;
    for (const auto& r : results) grouped[to_string(r.category)].push_back(r.flags);
    SuiteMetrics m;
    double sum = 0.0;
    for (const auto& [category, outcomes] : grouped) {
        m.by_category[category] = execution_metrics(outcomes);
        sum += m.by_category[category].sr_pct;
    }
    if (!grouped.empty()) m.avg_sr_pct = sum / static_cast<double>(grouped.size());
    return m;
}

// ---------------------------------------------------------------------------
// Suite files (JSONL)
// ---------------------------------------------------------------------------

inline TaskCase task_case_from_json(const json& j, int line_no) {
    require_only_keys(j, line_no, {"id", "category", "prompt", "expected_fault", "environment"});
    TaskCase task;
    task.id = require_string(j, line_no, "id");
    task.category = task_category_from(require_string(j, line_no, "category"));
    task.prompt = require_string(j, line_no, "prompt");
    const json& fault = require_key(j, line_no, "expected_fault");
    if (!fault.is_boolean()) throw MalformedRecord(line_no, "'expected_fault' must be a boolean");
    task.expected_fault = fault.get<bool>();

    const json& env = require_key(j, line_no, "environment");
    if (!env.is_object()) throw MalformedRecord(line_no, "'environment' must be an object");
    require_only_keys(env, line_no,
                      {"text", "object_list", "location_tags", "static_objects", "initial", "skills"});
    json scene_json = env;
    scene_json.erase("initial");
    scene_json.erase("skills");
    if (!scene_json.contains("text")) scene_json["text"] = "";
    task.environment.scene = scene_from_json(scene_json, line_no);
    for (const auto& lit : require_key(env, line_no, "initial")) {
        Literal l = literal_from_json(lit, line_no);
        if (l.negated) throw MalformedRecord(line_no, "initial atoms cannot be negated");
        task.environment.state.add(l.atom);
    }
    task.environment.skills = skills_from_json(require_key(env, line_no, "skills"), line_no);
    return task;
}

/// Loads a suite; the shared synonym table applies to every environment.
inline std::vector<TaskCase> load_task_suite(const std::string& path,
                                             const CanonicalMap& synonyms = {}) {
    std::vector<TaskCase> cases;
    for_each_jsonl(path, [&](int line_no, const json& j) {
        cases.push_back(task_case_from_json(j, line_no));
        cases.back().environment.synonyms = synonyms;
    });
    return cases;
}

inline json sim_result_to_json(const SimResult& r) {
    json j;
    j["executed"] = r.executed;
    j["crashed"] = r.crashed;
    j["crash_step"] = r.crash_step ? json(*r.crash_step) : json(nullptr);
    j["crash_reason"] = r.crash_reason ? json(to_string(*r.crash_reason)) : json(nullptr);
    j["goal_reached"] = r.goal_reached;
    return j;
}

inline json case_result_to_json(const CaseResult& r) {
    json j;
    j["id"] = r.case_id;
    j["category"] = to_string(r.category);
    j["expected_fault"] = r.expected_fault;
    j["blocked"] = r.flags.blocked;
    j["fault_flagged"] = r.flags.fault_flagged;
    j["result"] = sim_result_to_json(r.sim);
    if (r.outcome) j["pipeline"] = outcome_to_json(*r.outcome);
    if (!r.provider_error.empty()) j["provider_error"] = r.provider_error;
    return j;
}

} // namespace safeplan
