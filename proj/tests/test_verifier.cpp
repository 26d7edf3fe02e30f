#include <catch2/catch_amalgamated.hpp>

#include "safeplan/verifier.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace safeplan;

namespace {

struct PickupFixture {
    SceneDescription scene;
    SkillRegistry skills;
    CanonicalMap map;
    PlanSpec plan;
};

PickupFixture pickup_fixture() {
    PickupFixture f;
    f.scene.text = "demo kitchen";
    f.scene.object_list = {"mug"};
    f.scene.location_tags = {"counter"};
    f.skills.grant("robot1", "Pickup");
    f.skills.grant("robot1", "GoTo");

    f.plan.initial.add({pred::At, {"robot1", "counter"}});
    f.plan.initial.add({pred::Located, {"mug", "counter"}});
    f.plan.goal = {{{pred::Holding, {"robot1", "mug"}}, false}};
    const auto lib = builtin_actions();
    f.plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                       {{"R", "robot1"}, {"o", "mug"}})};
    return f;
}

bool has_violation(const VerificationReport& report, ViolationKind kind, int step) {
    for (const auto& v : report.violations)
        if (v.kind == kind && v.step_index == step) return true;
    return false;
}

} // namespace

TEST_CASE("a single-step pickup plan verifies and ends holding the object") {
    auto f = pickup_fixture();
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    INFO(report_to_json(report).dump(2));
    REQUIRE(report.valid());
    REQUIRE(report.final_state.has_value());
    CHECK(report.final_state->contains({pred::Holding, {"robot1", "mug"}}));
    for (const auto& atom : report.final_state->atoms)
        CHECK(!(atom.predicate == pred::Located && atom.args[0] == "mug"));
    CHECK(report.states_trace.size() == 2);
    CHECK(report.states_trace.front() == f.plan.initial);
}

TEST_CASE("an unknown object is reported at its step") {
    auto f = pickup_fixture();
    const auto lib = builtin_actions();
    f.plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                       {{"R", "robot1"}, {"o", "unicorn"}})};
    f.plan.goal.clear();
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK_FALSE(report.valid());
    CHECK(has_violation(report, ViolationKind::UnknownObject, 0));
}

TEST_CASE("an empty plan whose goal holds initially is valid") {
    auto f = pickup_fixture();
    f.plan.steps.clear();
    f.plan.goal = {{{pred::Located, {"mug", "counter"}}, false}};
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK(report.valid());
    REQUIRE(report.states_trace.size() == 1);
    CHECK(report.states_trace[0] == f.plan.initial);
}

TEST_CASE("a missing skill is reported without duplicate violations") {
    auto f = pickup_fixture();
    f.skills = SkillRegistry{};
    f.skills.grant("robot1", "GoTo");
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK_FALSE(report.valid());
    int missing_skill = 0;
    for (const auto& v : report.violations)
        if (v.kind == ViolationKind::MissingSkill) ++missing_skill;
    // The required_skill check and the embedded HasSkill precondition target
    // the same fault; the report carries it once.
    CHECK(missing_skill == 1);
}

TEST_CASE("all violations of a doubly broken step are collected") {
    auto f = pickup_fixture();
    f.skills = SkillRegistry{};
    const auto lib = builtin_actions();
    f.plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                       {{"R", "robot1"}, {"o", "unicorn"}})};
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK(has_violation(report, ViolationKind::UnknownObject, 0));
    CHECK(has_violation(report, ViolationKind::MissingSkill, 0));
}

TEST_CASE("a corrupt initial state cannot verify") {
    auto f = pickup_fixture();
    f.plan.initial.remove({pred::Located, {"mug", "counter"}}); // mug is lost
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK_FALSE(report.valid());
    CHECK(has_violation(report, ViolationKind::InitialConditionFailure, -1));
}

TEST_CASE("a goal that does not hold in the final state is reported") {
    auto f = pickup_fixture();
    f.plan.goal = {{{pred::Located, {"mug", "counter"}}, false}};
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK_FALSE(report.valid());
    CHECK(has_violation(report, ViolationKind::GoalFailure, -1));
}

TEST_CASE("static objects may not be moved or held") {
    auto f = pickup_fixture();
    f.scene.object_list.insert("garbage can");
    f.scene.static_objects.insert("garbage can");
    f.plan.initial.add({pred::Located, {"garbage can", "counter"}});
    const auto lib = builtin_actions();
    f.plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                       {{"R", "robot1"}, {"o", "garbage can"}})};
    f.plan.goal.clear();
    auto report = verify_plan(f.plan, f.scene, f.skills, f.map);
    CHECK_FALSE(report.valid());
    CHECK(has_violation(report, ViolationKind::InvariantFailure, 0));
}

TEST_CASE("check_invariants flags duplication and loss") {
    SceneDescription scene;
    scene.object_list = {"mug"};
    WorldState duplicated;
    duplicated.add({pred::Located, {"mug", "counter"}});
    duplicated.add({pred::Holding, {"robot1", "mug"}});
    auto v1 = check_invariants(duplicated, scene);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0].detail == kInvariantConservation);
    CHECK(v1[0].message.find("duplicated") != std::string::npos);

    WorldState lost;
    lost.add({pred::At, {"robot1", "counter"}});
    auto v2 = check_invariants(lost, scene);
    REQUIRE(v2.size() == 1);
    CHECK(v2[0].message.find("lost") != std::string::npos);
}

TEST_CASE("check_invariants matches hand-computed results on every sub-state") {
    SceneDescription scene;
    scene.object_list = {"mug", "plate"};
    scene.static_objects = {"plate"};
    const std::vector<Atom> universe = {
        {pred::Located, {"mug", "counter"}}, {pred::Located, {"mug", "table"}},
        {pred::Holding, {"robot1", "mug"}},  {pred::Located, {"plate", "table"}},
        {pred::Holding, {"robot1", "plate"}}, {pred::At, {"robot1", "counter"}},
    };
    for (unsigned mask = 0; mask < (1u << universe.size()); ++mask) {
        WorldState state;
        for (unsigned i = 0; i < universe.size(); ++i)
            if (mask & (1u << i)) state.add(universe[i]);

        int mug_locators = int(bool(mask & 1)) + int(bool(mask & 2)) + int(bool(mask & 4));
        int plate_locators = int(bool(mask & 8)) + int(bool(mask & 16));
        bool plate_held = mask & 16;
        std::size_t expected = 0;
        if (mug_locators != 1) ++expected;
        if (plate_locators != 1) ++expected;
        if (plate_held) ++expected;

        INFO("mask " << mask);
        CHECK(check_invariants(state, scene).size() == expected);
    }
}

TEST_CASE("appending a step never repairs step or invariant violations") {
    // Goal failures are the one repairable kind: a later step can reach the
    // goal. Every other violation is recomputed identically on the prefix.
    gen::Rng rng(77);
    const auto lib = builtin_actions();
    int checked = 0;
    for (int iter = 0; iter < 300; ++iter) {
        auto domain = gen::random_domain(rng);
        auto plan = gen::random_plan(rng, domain, 3);
        auto report = verify_plan(plan, domain.scene, domain.skills, domain.map);
        if (report.valid()) continue;
        bool goal_only = true;
        for (const auto& v : report.violations)
            if (v.kind != ViolationKind::GoalFailure) goal_only = false;
        if (goal_only) continue;
        ++checked;
        auto extended = plan;
        const ActionSpec& tmpl = lib[iter % lib.size()];
        std::map<std::string, std::string> bindings;
        for (const auto& slot : tmpl.params) {
            if (slot == "R") bindings[slot] = "robot1";
            else if (slot == "o") bindings[slot] = domain.objects.front();
            else bindings[slot] = domain.locations.front();
        }
        extended.steps.push_back(instantiate_action(tmpl, bindings));
        CHECK_FALSE(verify_plan(extended, domain.scene, domain.skills, domain.map).valid());
    }
    CHECK(checked > 50);
}

TEST_CASE("valid reports satisfy the trace equations and the frame property") {
    gen::Rng rng(21);
    int valid_seen = 0;
    for (int iter = 0; iter < 400; ++iter) {
        auto domain = gen::random_domain(rng);
        auto plan = gen::random_plan(rng, domain);
        auto report = verify_plan(plan, domain.scene, domain.skills, domain.map);
        if (!report.valid()) continue;
        ++valid_seen;
        const PlanSpec canon = canonicalize_plan(plan, domain.map);
        REQUIRE(report.states_trace.size() == canon.steps.size() + 1);
        CHECK(report.states_trace.front() == canon.initial);
        REQUIRE(report.final_state.has_value());
        CHECK(report.states_trace.back() == *report.final_state);
        for (std::size_t i = 0; i < canon.steps.size(); ++i) {
            const auto& before = report.states_trace[i];
            const auto& after = report.states_trace[i + 1];
            // Frame property: atoms outside the step's postcondition carry over.
            std::set<Atom> touched;
            for (const auto& lit : canon.steps[i].post)
                if (auto r = resolve_atom(lit.atom, before)) touched.insert(*r);
            for (const auto& atom : before.atoms)
                if (!touched.count(atom)) CHECK(after.contains(atom));
            for (const auto& atom : after.atoms)
                if (!touched.count(atom)) CHECK(before.contains(atom));
        }
    }
    CHECK(valid_seen > 20);
}

TEST_CASE("verify_plan agrees with the brute-force oracle") {
    gen::Rng rng(2024);
    int valid_count = 0, invalid_count = 0;
    for (int iter = 0; iter < 400; ++iter) {
        auto domain = gen::random_domain(rng);
        auto plan = gen::random_plan(rng, domain);
        const bool got = verify_plan(plan, domain.scene, domain.skills, domain.map).valid();
        const bool expected = oracle::plan_valid(plan, domain.scene, domain.skills, domain.map);
        if (got) ++valid_count;
        else ++invalid_count;
        INFO("iteration " << iter << " spec:\n" << emit_structured_spec(plan));
        REQUIRE(got == expected);
    }
    CHECK(valid_count > 0);
    CHECK(invalid_count > 0);
}

// ---------------------------------------------------------------------------
// Structured specification text
// ---------------------------------------------------------------------------

TEST_CASE("the structured block lists the pickup preconditions") {
    auto f = pickup_fixture();
    const std::string block = emit_structured_spec(f.plan);
    CHECK(block.find("GOAL:") == 0);
    CHECK(block.find("INITIAL:") != std::string::npos);
    CHECK(block.find("INVARIANTS:") != std::string::npos);
    CHECK(block.find("STEPS:") != std::string::npos);
    CHECK(block.find("1. PickupObject(robot1, mug)") != std::string::npos);
    CHECK(block.find("At(robot1, L_mug)") != std::string::npos);
    CHECK(block.find("!Holding(robot1, mug)") != std::string::npos);
    CHECK(block.find("InList(mug, ObjectList)") != std::string::npos);
    CHECK(block.find("HasSkill(robot1, Pickup)") != std::string::npos);
    CHECK(block.find("!Located(mug, L_mug)") != std::string::npos);
}

TEST_CASE("an empty plan emits empty sections") {
    PlanSpec plan;
    const std::string block = emit_structured_spec(plan);
    CHECK(block ==
          "GOAL:\nINITIAL:\nINVARIANTS:\n  object-conservation\n  static-objects-fixed\nSTEPS:\n");
    CHECK(parse_structured_spec(block) == plan);
}

TEST_CASE("parse inverts emit on random plans") {
    gen::Rng rng(5);
    for (int iter = 0; iter < 200; ++iter) {
        auto domain = gen::random_domain(rng);
        auto plan = gen::random_plan(rng, domain);
        const std::string block = emit_structured_spec(plan);
        INFO(block);
        CHECK(parse_structured_spec(block) == plan);
    }
}

TEST_CASE("the lenient extractor skips provider chatter") {
    auto f = pickup_fixture();
    const std::string noisy = "Sure, here is the plan.\n\n" + emit_structured_spec(f.plan);
    CHECK(extract_structured_spec(noisy) == f.plan);
    CHECK_THROWS_AS(extract_structured_spec("no plan here"), SpecParseError);
}

TEST_CASE("malformed spec text names the offending line") {
    const std::string bad = "GOAL:\n  Holding(robot1, mug\nINITIAL:\nINVARIANTS:\nSTEPS:\n";
    try {
        parse_structured_spec(bad);
        FAIL("expected SpecParseError");
    } catch (const SpecParseError& e) {
        CHECK(e.line_no == 2);
    }
}
