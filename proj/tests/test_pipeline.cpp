#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "safeplan/pipeline.hpp"
#include "safeplan/sim.hpp"

using namespace safeplan;

namespace {

struct Fixture {
    SceneDescription scene;
    SkillRegistry skills;
    CanonicalMap map;
    std::vector<PolicyRule> kb;
    std::string prompt = "pick up the mug";
};

Fixture make_fixture() {
    Fixture f;
    f.scene.text = "A small kitchen with a mug on the counter.";
    f.scene.object_list = {"mug"};
    f.scene.location_tags = {"counter"};
    f.skills.grant("robot1", "Pickup");
    f.skills.grant("robot1", "GoTo");
    return f;
}

PlanSpec valid_plan() {
    PlanSpec plan;
    plan.initial.add({pred::At, {"robot1", "counter"}});
    plan.initial.add({pred::Located, {"mug", "counter"}});
    plan.goal = {{{pred::Holding, {"robot1", "mug"}}, false}};
    const auto lib = builtin_actions();
    plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                     {{"R", "robot1"}, {"o", "mug"}})};
    return plan;
}

PlanSpec invalid_plan() {
    PlanSpec plan = valid_plan();
    const auto lib = builtin_actions();
    plan.steps = {instantiate_action(*find_action(lib, "PickupObject"),
                                     {{"R", "robot1"}, {"o", "unicorn"}})};
    return plan;
}

std::string golden_path(const std::string& name) {
    return std::string(SAFEPLAN_GOLDEN_DIR) + "/" + name;
}

void check_golden(const std::string& name, const std::string& actual) {
    const std::string path = golden_path(name);
    if (std::getenv("SAFEPLAN_UPDATE_GOLDEN")) {
        std::filesystem::create_directories(SAFEPLAN_GOLDEN_DIR);
        write_text_file(path, actual);
        SUCCEED("golden updated: " + name);
        return;
    }
    INFO("golden file: " << path);
    REQUIRE(std::filesystem::exists(path));
    CHECK(actual == read_text_file(path));
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

} // namespace

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

TEST_CASE("the screening prompt is deterministic") {
    auto f = make_fixture();
    auto elems = parse_prompt(f.prompt, f.scene);
    const std::string first = build_sanity_prompt(elems, f.scene);
    for (int i = 0; i < 5; ++i) CHECK(build_sanity_prompt(elems, f.scene) == first);
}

TEST_CASE("the screening prompt names each layer exactly once") {
    auto f = make_fixture();
    auto elems = parse_prompt(f.prompt, f.scene);
    const std::string text = build_sanity_prompt(elems, f.scene);
    CHECK(count_occurrences(text, "societal") == 1);
    CHECK(count_occurrences(text, "organizational") == 1);
    CHECK(count_occurrences(text, "individual") == 1);
    CHECK(text.find(f.scene.text) != std::string::npos);
    CHECK(text.find("mug") != std::string::npos);
    // Output contract comes last.
    CHECK(text.rfind("OUTPUT:") != std::string::npos);
    CHECK(text.rfind("LAYER 3: F or P") > text.rfind("OUTPUT:"));
}

TEST_CASE("screening prompts match their golden files") {
    struct Case {
        std::string name;
        std::string prompt;
    };
    auto f = make_fixture();
    const std::vector<Case> cases = {
        {"sanity_pickup.txt", "pick up the mug"},
        {"sanity_empty_scene.txt", "mop the floor"},
        {"sanity_multiword.txt", "take the mug to the counter"},
    };
    for (const auto& c : cases) {
        auto elems = parse_prompt(c.prompt, f.scene);
        check_golden(c.name, build_sanity_prompt(elems, f.scene));
    }
}

TEST_CASE("the planning prompt embeds task, objects, skills and the example") {
    auto f = make_fixture();
    const std::string spec = emit_structured_spec(example_pickup_plan());
    const std::string text = build_plan_prompt("bring the mug", f.scene, f.skills, spec);
    CHECK(build_plan_prompt("bring the mug", f.scene, f.skills, spec) == text);
    CHECK(text.find("bring the mug") != std::string::npos);
    CHECK(text.find("OBJECT LIST:") != std::string::npos);
    CHECK(text.find("SKILL LIST:") != std::string::npos);
    CHECK(text.find("robot1: GoTo, Pickup") != std::string::npos);
    CHECK(text.find("classify the task as invalid and reject") != std::string::npos);
    CHECK(text.find(spec) != std::string::npos);
}

TEST_CASE("planning prompts match their golden files") {
    auto f = make_fixture();
    const std::string spec = emit_structured_spec(example_pickup_plan());
    check_golden("plan_bring_mug.txt", build_plan_prompt("bring the mug", f.scene, f.skills, spec));
    check_golden("plan_empty_skills.txt",
                 build_plan_prompt("wave hello", f.scene, SkillRegistry{}, spec));
    SkillRegistry two;
    two.grant("robot1", "GoTo");
    two.grant("robot2", "Pickup");
    check_golden("plan_two_robots.txt", build_plan_prompt("sort the mail", f.scene, two, spec));
}

// ---------------------------------------------------------------------------
// Pipeline scenarios
// ---------------------------------------------------------------------------

TEST_CASE("three invalid candidates block the task") {
    auto f = make_fixture();
    const std::string bad = emit_structured_spec(invalid_plan());
    MockProvider mock({bad, bad, bad});
    auto outcome = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock, default_lexicons());
    CHECK_FALSE(outcome.executed());
    CHECK(outcome.attempts.size() == 3);
    CHECK(mock.calls() == 3);
    for (const auto& attempt : outcome.attempts) {
        CHECK(attempt.parsed);
        CHECK_FALSE(attempt.report.valid());
    }
}

TEST_CASE("a deontically rejected prompt makes zero provider calls") {
    auto f = make_fixture();
    PolicyRule rule;
    rule.id = "no-pick";
    rule.layer = Layer::individual;
    rule.predicate = RulePredicate::HarmTo;
    rule.effect = DeonticLabel::F;
    rule.match.action = {"pick up"};
    rule.rationale = "fixture";
    f.kb = {rule};
    MockProvider mock({emit_structured_spec(valid_plan())});
    auto outcome = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock, default_lexicons());
    CHECK_FALSE(outcome.executed());
    CHECK_FALSE(outcome.prompt_verdict.accepted);
    CHECK(outcome.attempts.empty());
    CHECK(mock.calls() == 0);
}

TEST_CASE("an invalid-then-valid script executes on the second attempt") {
    auto f = make_fixture();
    MockProvider mock({emit_structured_spec(invalid_plan()), emit_structured_spec(valid_plan())});
    auto outcome = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock, default_lexicons());
    REQUIRE(outcome.executed());
    CHECK(outcome.attempts.size() == 2);
    CHECK(mock.calls() == 2);
    CHECK_FALSE(outcome.attempts[0].report.valid());
    CHECK(outcome.attempts[1].report.valid());
    // Re-verification of the returned candidate is idempotent.
    REQUIRE(outcome.plan.has_value());
    CHECK(verify_plan(*outcome.plan, f.scene, f.skills, f.map).valid());
}

TEST_CASE("the second request carries the verifier feedback") {
    auto f = make_fixture();
    auto mock = std::make_unique<MockProvider>();
    mock->add_entry({/*fingerprint=*/"", {"failed verification"},
                     emit_structured_spec(valid_plan())});
    mock->add_response(emit_structured_spec(invalid_plan()));
    auto outcome =
        run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, *mock, default_lexicons());
    REQUIRE(outcome.executed());
    CHECK(outcome.attempts.size() == 2);
}

TEST_CASE("malformed output counts as a failed attempt, not a crash") {
    auto f = make_fixture();
    MockProvider mock({"this is not a plan", emit_structured_spec(valid_plan())});
    auto outcome = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock, default_lexicons());
    REQUIRE(outcome.executed());
    CHECK(outcome.attempts.size() == 2);
    CHECK_FALSE(outcome.attempts[0].parsed);
    CHECK_FALSE(outcome.attempts[0].parse_error.empty());
}

TEST_CASE("a provider rejection token is a failed attempt") {
    auto f = make_fixture();
    MockProvider mock({"REJECTED", "REJECTED", "REJECTED"});
    auto outcome = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock, default_lexicons());
    CHECK_FALSE(outcome.executed());
    CHECK(outcome.attempts.size() == 3);
    CHECK(mock.calls() == 3);
}

TEST_CASE("the transcript logs one entry per provider round") {
    auto f = make_fixture();
    MockProvider mock({emit_structured_spec(invalid_plan()), emit_structured_spec(valid_plan())});
    std::vector<json> transcript;
    auto outcome = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock,
                                default_lexicons(), &transcript);
    REQUIRE(outcome.executed());
    REQUIRE(transcript.size() == 2);
    CHECK(transcript[0]["attempt"] == 1);
    CHECK(transcript[1]["attempt"] == 2);
    CHECK(transcript[1]["request"].size() == 3); // prompt + reply + feedback
}

TEST_CASE("decision_from maps outcomes onto task assignments") {
    auto f = make_fixture();
    MockProvider good({emit_structured_spec(valid_plan())});
    auto executed = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, good, default_lexicons());
    auto d1 = decision_from(executed, "t1");
    CHECK_FALSE(d1.rejected());
    CHECK(d1.robot_id == "robot1");

    MockProvider bad({"REJECTED", "REJECTED", "REJECTED"});
    auto blocked = run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, bad, default_lexicons());
    CHECK(decision_from(blocked, "t2").rejected());
}

TEST_CASE("concurrent pipelines over one shared mock are deterministic") {
    auto f = make_fixture();
    MockProvider mock;
    mock.add_entry({"", {"TASK:"}, emit_structured_spec(valid_plan())});
    constexpr int kThreads = 8;
    std::vector<PipelineOutcome> outcomes(kThreads);
    std::vector<std::thread> threads;
    for (int t = 0; t < kThreads; ++t) {
        threads.emplace_back([&, t] {
            outcomes[static_cast<std::size_t>(t)] =
                run_pipeline(f.prompt, f.scene, f.kb, f.skills, f.map, mock, default_lexicons());
        });
    }
    for (auto& th : threads) th.join();
    CHECK(mock.calls() == kThreads);
    for (const auto& o : outcomes) {
        CHECK(o.executed());
        CHECK(o.attempts.size() == 1);
    }
}

// ---------------------------------------------------------------------------
// Mock script files
// ---------------------------------------------------------------------------

TEST_CASE("mock scripts match by fingerprint, substring, then sequence") {
    ChatRequest request{{"user", "the quick brown fox"}};
    const std::string fp = fingerprint_hex(request_fingerprint(request));
    const std::string path =
        (std::filesystem::temp_directory_path() / "mock_script.jsonl").string();
    std::ofstream out(path);
    out << json{{"fingerprint", fp}, {"response", "by-fingerprint"}}.dump() << "\n";
    out << json{{"contains", json::array({"brown", "fox"})}, {"response", "by-substring"}}.dump()
        << "\n";
    out << json{{"response", "first-wildcard"}}.dump() << "\n";
    out << json{{"response", "second-wildcard"}}.dump() << "\n";
    out.close();

    MockProvider mock;
    mock.load_script(path);
    CHECK(mock.complete(request) == "by-fingerprint");
    CHECK(mock.complete({{"user", "a brown fox ran"}}) == "by-substring");
    CHECK(mock.complete({{"user", "nothing matches"}}) == "first-wildcard");
    CHECK(mock.complete({{"user", "nothing matches"}}) == "second-wildcard");
    CHECK_THROWS_AS(mock.complete({{"user", "nothing matches"}}), Error);
    std::remove(path.c_str());
}

// ---------------------------------------------------------------------------
// HTTP provider
// ---------------------------------------------------------------------------

TEST_CASE("the http provider speaks the chat-completion wire shape") {
    httplib::Server server;
    std::string seen_auth, seen_model;
    double seen_temperature = -1;
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        json body = json::parse(req.body);
        seen_model = body["model"];
        seen_temperature = body["temperature"];
        json out;
        out["choices"] = json::array(
            {json{{"message", json{{"content", "GOAL:\nINITIAL:\nINVARIANTS:\nSTEPS:\n"}}}}});
        res.set_content(out.dump(), "application/json");
    });
    server.Get("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("x", "text/plain");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv(kApiKeyEnvVar, "test-key-123", 1);
    ProviderConfig cfg;
    cfg.kind = ProviderConfig::Kind::http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    cfg.model_name = "demo-model";
    cfg.timeout_s = 5.0;
    HttpProvider provider(cfg);
    const std::string reply = provider.complete({{"user", "hello"}});
    CHECK(reply == "GOAL:\nINITIAL:\nINVARIANTS:\nSTEPS:\n");
    CHECK(seen_auth == "Bearer test-key-123");
    CHECK(seen_model == "demo-model");
    CHECK(seen_temperature == 0);

    ProviderConfig broken = cfg;
    broken.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/broken";
    HttpProvider bad(broken);
    CHECK_THROWS_AS(bad.complete({{"user", "x"}}), ProviderMalformedOutput);
    unsetenv(kApiKeyEnvVar);

    server.stop();
    listener.join();
}

// ---------------------------------------------------------------------------
// LLM-judged deontic labels
// ---------------------------------------------------------------------------

TEST_CASE("layer labels parse from a screening response") {
    auto verdict = parse_layer_labels("LAYER 1: P\nLAYER 2: P\nLAYER 3: F\n");
    REQUIRE(verdict.has_value());
    CHECK_FALSE(verdict->accepted);
    CHECK(verdict->layer_i == DeonticLabel::F);

    CHECK_FALSE(parse_layer_labels("LAYER 1: P\nLAYER 2: P\n").has_value());
    CHECK_FALSE(parse_layer_labels("LAYER 1: X\nLAYER 2: P\nLAYER 3: P\n").has_value());

    auto f = make_fixture();
    MockProvider mock({"chain of thought...\nLAYER 1: P\nLAYER 2: O\nLAYER 3: P\n"});
    auto elems = parse_prompt(f.prompt, f.scene);
    auto judged = llm_prompt_verdict(elems, f.scene, mock);
    REQUIRE(judged.has_value());
    CHECK(judged->accepted);
    CHECK(judged->layer_o == DeonticLabel::O);
}
