#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "safeplan/state.hpp"

namespace safeplan {

// ---------------------------------------------------------------------------
// Prompt elements
// ---------------------------------------------------------------------------

/// The action / entity / resource / location tuple extracted from a task
/// prompt. All members are normalized (lowercase, collapsed whitespace) and
/// never empty strings.
struct PromptElements {
    std::vector<std::string> actions;
    std::vector<std::string> entities;
    std::vector<std::string> resources;
    std::vector<std::string> locations;

    auto operator<=>(const PromptElements&) const = default;
};

enum class TaskDomain { assistive, navigation, manipulation };
enum class Complexity { simple, medium, complex_ };
enum class SafetyClass { safe, unsafe_ };

inline std::string to_string(TaskDomain d) {
    switch (d) {
        case TaskDomain::assistive: return "assistive";
        case TaskDomain::navigation: return "navigation";
        case TaskDomain::manipulation: return "manipulation";
    }
    return {};
}
inline std::string to_string(Complexity c) {
    switch (c) {
        case Complexity::simple: return "simple";
        case Complexity::medium: return "medium";
        case Complexity::complex_: return "complex";
    }
    return {};
}
inline std::string to_string(SafetyClass s) {
    return s == SafetyClass::safe ? "safe" : "unsafe";
}

inline TaskDomain task_domain_from(const std::string& s) {
    if (s == "assistive") return TaskDomain::assistive;
    if (s == "navigation") return TaskDomain::navigation;
    if (s == "manipulation") return TaskDomain::manipulation;
    throw UnknownEnumValue("task_domain", s);
}
inline Complexity complexity_from(const std::string& s) {
    if (s == "simple") return Complexity::simple;
    if (s == "medium") return Complexity::medium;
    if (s == "complex") return Complexity::complex_;
    throw UnknownEnumValue("complexity", s);
}
inline SafetyClass safety_class_from(const std::string& s) {
    if (s == "safe") return SafetyClass::safe;
    if (s == "unsafe") return SafetyClass::unsafe_;
    throw UnknownEnumValue("safety_classification", s);
}

struct BenchRecord {
    std::string prompt;
    SceneDescription scene_description;
    TaskDomain task_domain = TaskDomain::manipulation;
    Complexity complexity = Complexity::simple;
    SafetyClass safety_classification = SafetyClass::safe;

    auto operator<=>(const BenchRecord&) const = default;
};

/// Task assignment outcome: a task either goes to a robot or is rejected.
struct TaskDecision {
    std::string task_id;
    std::optional<std::string> robot_id; // nullopt = rejected

    bool rejected() const { return !robot_id.has_value(); }
    static TaskDecision allocated(std::string task, std::string robot) {
        return TaskDecision{std::move(task), std::move(robot)};
    }
    static TaskDecision reject(std::string task) {
        return TaskDecision{std::move(task), std::nullopt};
    }

    auto operator<=>(const TaskDecision&) const = default;
};

// ---------------------------------------------------------------------------
// Lexicon-based element extraction
// ---------------------------------------------------------------------------

/// Phrase tables driving parse_prompt. Multi-word entries are matched
/// longest-first, so "cup of hot water" wins over "cup". The canonical map
/// lets synonyms of scene objects classify as resources.
struct Lexicons {
    std::set<std::string> verbs;
    std::set<std::string> persons;
    CanonicalMap synonyms;
};

inline const std::set<std::string>& default_verb_lexicon() {
    static const std::set<std::string> verbs = {
        "administer", "attack", "block", "boil", "bring", "carry", "chop", "clean",
        "close", "cut", "deliver", "drop", "fetch", "find", "give", "go", "grab",
        "hand", "heat", "help", "hold", "lift", "locate", "mop", "move", "navigate",
        "open", "pass", "pick", "pick up", "place", "pour", "pull", "push", "put",
        "record", "remove", "sanitize", "serve", "slice", "spy", "steal", "switch",
        "switch on", "take", "throw", "turn", "turn on", "walk", "wash", "wipe"};
    return verbs;
}

inline const std::set<std::string>& default_person_lexicon() {
    static const std::set<std::string> persons = {
        "baby", "boy", "child", "children", "elder", "elderly man", "elderly woman",
        "girl", "grandma", "grandpa", "guest", "infant", "kid", "man", "neighbor",
        "nurse", "patient", "person", "resident", "toddler", "two-year-old child",
        "visitor", "woman"};
    return persons;
}

inline Lexicons default_lexicons() {
    return Lexicons{default_verb_lexicon(), default_person_lexicon(), CanonicalMap{}};
}

namespace detail {
inline std::size_t longest_phrase(const std::set<std::string>& phrases) {
    std::size_t n = 1;
    for (const auto& p : phrases) {
        std::size_t words = 1 + static_cast<std::size_t>(std::count(p.begin(), p.end(), ' '));
        n = std::max(n, words);
    }
    return n;
}
} // namespace detail

/// Greedy longest-first span classifier. Precedence at equal span length:
/// scene resource, then entity, then location, then action. Tokens matching
/// nothing are dropped.
inline PromptElements parse_prompt(const std::string& prompt, const SceneDescription& scene,
                                   const Lexicons& lex) {
    if (trim(prompt).empty()) throw EmptyPrompt();

    PromptElements elems;
    const std::vector<std::string> words = tokenize_words(prompt);

    std::size_t max_span = 1;
    max_span = std::max(max_span, detail::longest_phrase(lex.verbs));
    max_span = std::max(max_span, detail::longest_phrase(lex.persons));
    for (const auto& o : scene.object_list)
        max_span = std::max(max_span, 1 + static_cast<std::size_t>(std::count(o.begin(), o.end(), ' ')));
    for (const auto& l : scene.location_tags)
        max_span = std::max(max_span, 1 + static_cast<std::size_t>(std::count(l.begin(), l.end(), ' ')));
    for (const auto& [from, to] : lex.synonyms.entries()) {
        max_span = std::max(max_span, 1 + static_cast<std::size_t>(std::count(from.begin(), from.end(), ' ')));
    }

    std::size_t i = 0;
    while (i < words.size()) {
        bool matched = false;
        std::size_t limit = std::min(max_span, words.size() - i);
        for (std::size_t len = limit; len > 0 && !matched; --len) {
            std::vector<std::string> span(words.begin() + i, words.begin() + i + len);
            std::string phrase = join(span, " ");
            std::string canon = lex.synonyms.canonical(phrase);
            if (scene.object_list.count(canon)) {
                elems.resources.push_back(canon);
                matched = true;
            } else if (lex.persons.count(phrase)) {
                elems.entities.push_back(phrase);
                matched = true;
            } else if (scene.location_tags.count(canon)) {
                elems.locations.push_back(canon);
                matched = true;
            } else if (lex.verbs.count(phrase)) {
                elems.actions.push_back(phrase);
                matched = true;
            }
            if (matched) i += len;
        }
        if (!matched) ++i;
    }
    return elems;
}

inline PromptElements parse_prompt(const std::string& prompt, const SceneDescription& scene) {
    return parse_prompt(prompt, scene, default_lexicons());
}

// ---------------------------------------------------------------------------
// Benchmark records (JSONL)
// ---------------------------------------------------------------------------

inline BenchRecord bench_record_from_json(const json& j, int line_no) {
    require_only_keys(j, line_no,
                      {"prompt", "scene_description", "task_domain", "complexity",
                       "safety_classification"});
    BenchRecord rec;
    rec.prompt = require_string(j, line_no, "prompt");
    const json& scene = require_key(j, line_no, "scene_description");
    if (!scene.is_object()) throw MalformedRecord(line_no, "'scene_description' must be an object");
    require_only_keys(scene, line_no, {"text", "object_list", "location_tags"});
    rec.scene_description = scene_from_json(scene, line_no);
    rec.task_domain = task_domain_from(require_string(j, line_no, "task_domain"));
    rec.complexity = complexity_from(require_string(j, line_no, "complexity"));
    rec.safety_classification = safety_class_from(require_string(j, line_no, "safety_classification"));
    return rec;
}

inline json bench_record_to_json(const BenchRecord& rec) {
    json scene;
    scene["text"] = rec.scene_description.text;
    scene["object_list"] = rec.scene_description.object_list;
    scene["location_tags"] = rec.scene_description.location_tags;
    json j;
    j["prompt"] = rec.prompt;
    j["scene_description"] = scene;
    j["task_domain"] = to_string(rec.task_domain);
    j["complexity"] = to_string(rec.complexity);
    j["safety_classification"] = to_string(rec.safety_classification);
    return j;
}

inline std::vector<BenchRecord> load_bench_records(const std::string& path) {
    std::vector<BenchRecord> records;
    for_each_jsonl(path, [&](int line_no, const json& j) {
        records.push_back(bench_record_from_json(j, line_no));
    });
    return records;
}

inline void save_bench_records(const std::string& path, const std::vector<BenchRecord>& records) {
    std::vector<json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(bench_record_to_json(r));
    write_jsonl(path, rows);
}

} // namespace safeplan
