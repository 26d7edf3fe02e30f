#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

#include "safeplan/actions.hpp"
#include "safeplan/state.hpp"

using namespace safeplan;

namespace {

CanonicalMap paper_map() {
    CanonicalMap m;
    m.add("couch", "sofa");
    return m;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("canonical maps couch to sofa and fixes canonical symbols") {
    auto map = paper_map();
    CHECK(canonical("couch", map) == "sofa");
    CHECK(canonical("sofa", map) == "sofa");
    CHECK(canonical("unmapped", map) == "unmapped");
}

TEST_CASE("canonical normalizes casing and whitespace") {
    auto map = paper_map();
    CHECK(canonical("  CoUcH ", map) == "sofa");
    std::mt19937 rng(3);
    const std::string word = "couch";
    for (int iter = 0; iter < 200; ++iter) {
        std::string mangled;
        if (rng() % 2) mangled += std::string(rng() % 3, ' ');
        for (char c : word) {
            mangled.push_back(rng() % 2 ? static_cast<char>(std::toupper(c)) : c);
        }
        if (rng() % 2) mangled += "\t";
        CHECK(canonical(mangled, map) == "sofa");
    }
}

TEST_CASE("canonical is idempotent even with chained entries") {
    CanonicalMap map;
    map.add("couch", "settee");
    map.add("settee", "sofa"); // collapses the earlier chain
    CHECK(canonical("couch", map) == "sofa");
    CHECK(canonical("settee", map) == "sofa");
    CHECK(canonical(canonical("couch", map), map) == canonical("couch", map));
    for (const auto& [from, to] : map.entries())
        CHECK(map.canonical(to) == to);
}

TEST_CASE("in_list resolves synonyms against the scene") {
    SceneDescription scene;
    scene.object_list = {"sofa", "mug"};
    auto map = paper_map();
    CHECK(in_list("couch", scene, map));
    CHECK(in_list("sofa", scene, map));
    CHECK_FALSE(in_list("unicorn", scene, map));
}

TEST_CASE("in_list agrees with a brute-force truth table over a fixture") {
    const std::vector<std::string> objects = {"sofa", "mug", "plate", "kettle", "lamp",
                                              "book", "tray", "fridge", "remote", "pillow"};
    CanonicalMap map;
    map.add("couch", "sofa");
    map.add("cup", "mug");
    map.add("dish", "plate");
    SceneDescription scene;
    for (std::size_t i = 0; i < 5; ++i) scene.object_list.insert(objects[i]);

    std::vector<std::string> terms = objects;
    terms.insert(terms.end(), {"couch", "cup", "dish", "unicorn"});
    for (const auto& term : terms) {
        bool expected = false;
        const std::string resolved = map.canonical(term);
        for (const auto& o : scene.object_list)
            if (o == resolved) expected = true;
        CHECK(in_list(term, scene, map) == expected);
    }
}

TEST_CASE("canonical map files round-trip and reject cycles") {
    CanonicalMap map;
    map.add("couch", "sofa");
    map.add("cup", "mug");
    const std::string path = temp_path("map_roundtrip.jsonl");
    save_canonical_map(path, map);
    CHECK(load_canonical_map(path) == map);
    std::remove(path.c_str());

    CanonicalMap cyclic;
    cyclic.add("a", "b");
    CHECK_THROWS_AS(cyclic.add("b", "a"), Error);
}

TEST_CASE("instantiating PickupObject yields the canonical precondition set") {
    const auto lib = builtin_actions();
    const ActionSpec* pickup = find_action(lib, "PickupObject");
    REQUIRE(pickup != nullptr);
    auto grounded = instantiate_action(*pickup, {{"R", "robot1"}, {"o", "mug"}});
    CHECK(grounded.is_ground());
    CHECK(grounded.args == std::vector<std::string>{"robot1", "mug"});

    const std::vector<Literal> expected_pre = {
        {{pred::At, {"robot1", "L_mug"}}, false},
        {{pred::Holding, {"robot1", "mug"}}, true},
        {{pred::InList, {"mug", kObjectListId}}, false},
        {{pred::HasSkill, {"robot1", "Pickup"}}, false},
    };
    CHECK(grounded.pre == expected_pre);
    const std::vector<Literal> expected_post = {
        {{pred::Holding, {"robot1", "mug"}}, false},
        {{pred::Located, {"mug", "L_mug"}}, true},
    };
    CHECK(grounded.post == expected_post);
}

TEST_CASE("instantiate_action reports the missing slot") {
    const auto lib = builtin_actions();
    const ActionSpec* pickup = find_action(lib, "PickupObject");
    try {
        instantiate_action(*pickup, {{"R", "robot1"}});
        FAIL("expected UnboundSlot");
    } catch (const UnboundSlot& e) {
        CHECK(e.slot == "o");
    }
}

TEST_CASE("grounding then ungrounding recovers the template modulo slot names") {
    const auto lib = builtin_actions();
    for (const auto& tmpl : lib) {
        std::map<std::string, std::string> bindings;
        std::map<std::string, std::string> reverse;
        int i = 0;
        for (const auto& slot : tmpl.params) {
            std::string value = "sym" + std::to_string(i++);
            bindings[slot] = value;
            reverse[value] = slot;
        }
        auto grounded = instantiate_action(tmpl, bindings);
        // Substitute bound values back with their slot names.
        auto unground = [&](std::vector<Literal> lits) {
            for (auto& lit : lits)
                for (auto& arg : lit.atom.args) {
                    if (reverse.count(arg)) arg = reverse[arg];
                    else if (is_location_of(arg) && reverse.count(arg.substr(2)))
                        arg = "L_" + reverse[arg.substr(2)];
                }
            return lits;
        };
        CHECK(unground(grounded.pre) == tmpl.pre);
        CHECK(unground(grounded.post) == tmpl.post);
        CHECK(grounded.required_skill == tmpl.required_skill);
    }
}

TEST_CASE("action library files extend and override the built-ins") {
    const std::string path = temp_path("actions_extra.jsonl");
    write_text_file(
        path,
        R"({"name":"SliceObject","params":["R","o"],"pre":[{"pred":"At","args":["R","L_o"]},{"pred":"InList","args":["o","ObjectList"]}],"post":[{"pred":"IsSliced","args":["o"]}],"required_skill":"Slice"})"
        "\n");
    auto lib = load_action_library(path);
    CHECK(lib.size() == builtin_actions().size() + 1);
    const ActionSpec* slice = find_action(lib, "SliceObject");
    REQUIRE(slice != nullptr);
    CHECK(slice->required_skill == "Slice");
    std::remove(path.c_str());
}

TEST_CASE("action loader rejects contradictory postconditions") {
    const std::string path = temp_path("actions_bad.jsonl");
    write_text_file(
        path,
        R"({"name":"Broken","params":["R"],"pre":[],"post":[{"pred":"IsOn","args":["x"]},{"pred":"IsOn","args":["x"],"neg":true}],"required_skill":"GoTo"})"
        "\n");
    CHECK_THROWS_AS(load_action_library(path), MalformedRecord);
    std::remove(path.c_str());
}

TEST_CASE("derived location terms resolve through Located then At") {
    WorldState state;
    state.add({pred::Located, {"mug", "counter"}});
    state.add({pred::At, {"robot1", "sink"}});
    CHECK(resolve_symbol("L_mug", state) == "counter");
    CHECK(resolve_symbol("L_robot1", state) == "sink");
    CHECK(resolve_symbol("mug", state) == "mug");
    CHECK_FALSE(resolve_symbol("L_ghost", state).has_value());
}

TEST_CASE("canonicalize_plan rewrites object references everywhere they matter") {
    CanonicalMap map;
    map.add("tv remote", "remote");
    const auto lib = builtin_actions();
    PlanSpec plan;
    plan.initial.add({pred::At, {"robot1", "table"}});
    plan.initial.add({pred::Located, {"remote", "table"}});
    plan.goal = {{{pred::Holding, {"robot1", "tv remote"}}, false}};
    plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                     {{"R", "robot1"}, {"o", "tv remote"}})};

    PlanSpec fixed = canonicalize_plan(plan, map);
    CHECK(fixed.goal[0].atom.args[1] == "remote");
    CHECK(fixed.steps[0].args == std::vector<std::string>{"robot1", "remote"});
    for (const auto& lit : fixed.steps[0].pre)
        for (const auto& arg : lit.atom.args) CHECK(arg.find("tv remote") == std::string::npos);
    // The derived location base follows the rename.
    CHECK(fixed.steps[0].pre[0].atom.args[1] == "L_remote");
}
