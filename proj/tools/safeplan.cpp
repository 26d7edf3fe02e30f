// safeplan command-line front end: prompt screening, plan verification,
// benchmark runs, simulation suites and report generation.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "safeplan/safeplan.hpp"

namespace fs = std::filesystem;
using namespace safeplan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;    // usage or I/O problems
constexpr int kExitRejected = 2; // prompt rejected / plan invalid

struct ProviderFlags {
    std::string kind = "mock";
    std::string mock_script;
    std::string endpoint;
    std::string model = "mock-model";
    double timeout_s = 30.0;
    int max_in_flight = 4;

    ProviderConfig config() const {
        ProviderConfig cfg;
        cfg.kind = kind == "http" ? ProviderConfig::Kind::http : ProviderConfig::Kind::mock;
        cfg.mock_script = mock_script;
        cfg.endpoint = endpoint;
        cfg.model_name = model;
        cfg.timeout_s = timeout_s;
        cfg.max_in_flight = max_in_flight;
        return cfg;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--provider", kind, "Provider kind: mock or http")
            ->check(CLI::IsMember({"mock", "http"}));
        cmd->add_option("--mock-script", mock_script, "JSONL script for the mock provider");
        cmd->add_option("--endpoint", endpoint, "Chat-completion endpoint (http provider)");
        cmd->add_option("--model", model, "Model name sent to the provider");
        cmd->add_option("--timeout", timeout_s, "Provider timeout in seconds");
        cmd->add_option("--max-in-flight", max_in_flight, "Bound on concurrent provider calls");
    }
};

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n == 0 ? 1 : n)));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> workers;
    for (int t = 0; t < jobs; ++t) {
        workers.emplace_back([&, t] {
            try {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

void write_transcript(const std::string& path, const std::vector<std::vector<json>>& buffers) {
    if (path.empty()) return;
    std::vector<json> rows;
    int seq = 0;
    for (const auto& buffer : buffers)
        for (const auto& entry : buffer) {
            json row = entry;
            row["seq"] = seq++;
            rows.push_back(row);
        }
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// check-prompt
// ---------------------------------------------------------------------------

int cmd_check_prompt(const std::string& prompt, const std::string& scene_path,
                     const std::string& policy_path, const std::string& map_path) {
    SceneDescription scene = load_scene(scene_path);
    std::vector<PolicyRule> kb = load_policy_kb(policy_path);
    Lexicons lex = default_lexicons();
    if (!map_path.empty()) lex.synonyms = load_canonical_map(map_path);

    PromptElements elems = parse_prompt(prompt, scene, lex);
    DeonticVerdict verdict = evaluate_prompt(elems, kb);
    std::cout << verdict_to_json(verdict, &elems).dump(2) << "\n";
    return verdict.accepted ? kExitOk : kExitRejected;
}

// ---------------------------------------------------------------------------
// verify-plan
// ---------------------------------------------------------------------------

int cmd_verify_plan(const std::string& plan_path, const std::string& scene_path,
                    const std::string& skills_path, const std::string& map_path,
                    const std::string& actions_path) {
    PlanSpec plan = parse_structured_spec(read_text_file(plan_path));
    SceneDescription scene = load_scene(scene_path);
    SkillRegistry skills = load_skills(skills_path);
    CanonicalMap map = map_path.empty() ? CanonicalMap{} : load_canonical_map(map_path);
    // Steps written as bare heads are filled in from the action library.
    std::vector<ActionSpec> library =
        actions_path.empty() ? builtin_actions() : load_action_library(actions_path);
    plan = expand_plan_steps(plan, library);

    VerificationReport report = verify_plan(plan, scene, skills, map);
    std::cout << report_to_json(report).dump(2) << "\n";
    return report.valid() ? kExitOk : kExitRejected;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchDecision {
    bool accepted = false;
    json row;
};

json bench_decision_row(std::size_t index, const BenchRecord& record, bool accepted,
                        const PipelineOutcome* outcome, const std::string& error) {
    json row;
    row["index"] = index;
    row["prompt"] = record.prompt;
    row["task_domain"] = to_string(record.task_domain);
    row["complexity"] = to_string(record.complexity);
    row["safety_classification"] = to_string(record.safety_classification);
    row["accepted"] = accepted;
    if (outcome) {
        row["status"] = outcome->executed() ? "executed_candidate" : "blocked";
        row["attempts"] = static_cast<int>(outcome->attempts.size());
        row["layers"] = {{"societal", to_string(outcome->prompt_verdict.layer_s)},
                         {"organizational", to_string(outcome->prompt_verdict.layer_o)},
                         {"individual", to_string(outcome->prompt_verdict.layer_i)}};
    }
    if (!error.empty()) row["provider_error"] = error;
    return row;
}

int cmd_bench(const std::string& bench_path, const std::string& policy_path,
              const std::string& skills_path, const std::string& map_path,
              const ProviderFlags& provider_flags, const std::string& output_dir,
              bool with_baseline, int jobs, long seed, const std::string& transcript_path) {
    std::vector<BenchRecord> records = load_bench_records(bench_path);
    std::vector<PolicyRule> kb = load_policy_kb(policy_path);
    SkillRegistry skills = skills_path.empty() ? SkillRegistry{} : load_skills(skills_path);
    CanonicalMap map = map_path.empty() ? CanonicalMap{} : load_canonical_map(map_path);
    auto provider = make_provider(provider_flags.config());
    ensure_dir(output_dir);

    std::vector<BenchDecision> decisions(records.size());
    std::vector<std::vector<json>> transcripts(records.size());
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        try {
            std::vector<json>* t = transcript_path.empty() ? nullptr : &transcripts[i];
            PipelineOutcome outcome = run_pipeline(records[i], kb, skills, map, *provider, t);
            decisions[i].accepted = outcome.prompt_verdict.accepted;
            decisions[i].row = bench_decision_row(i, records[i], decisions[i].accepted, &outcome, "");
        } catch (const Error& e) {
            decisions[i].accepted = false; // rejected on provider failure
            decisions[i].row = bench_decision_row(i, records[i], false, nullptr, e.what());
        }
    });

    std::vector<json> decision_rows;
    std::vector<std::pair<BenchRecord, bool>> decided;
    for (std::size_t i = 0; i < records.size(); ++i) {
        decision_rows.push_back(decisions[i].row);
        decided.emplace_back(records[i], decisions[i].accepted);
    }
    write_jsonl(output_dir + "/decisions.jsonl", decision_rows);
    write_transcript(transcript_path, transcripts);

    std::optional<McNemarResult> paired;
    if (with_baseline) {
        // No-screening baseline: every prompt is accepted.
        std::vector<json> baseline_rows;
        std::vector<std::pair<bool, bool>> pairs;
        for (std::size_t i = 0; i < records.size(); ++i) {
            baseline_rows.push_back(bench_decision_row(i, records[i], true, nullptr, ""));
            const bool safe = records[i].safety_classification == SafetyClass::safe;
            pairs.emplace_back(decisions[i].accepted == safe, /*baseline accepted=*/safe);
        }
        write_jsonl(output_dir + "/decisions_baseline.jsonl", baseline_rows);
        if (!pairs.empty()) paired = mcnemar(pairs);
    }

    json report = classification_report(decided, paired ? &*paired : nullptr);
    report["meta"] = {{"records", records.size()}, {"seed", seed}, {"mode", "safeplan"}};
    write_text_file(output_dir + "/report.json", report.dump(2) + "\n");
    write_text_file(output_dir + "/report.csv", report_to_csv(report));
    std::cout << "bench: " << records.size() << " records -> " << output_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sim
// ---------------------------------------------------------------------------

int cmd_sim(const std::string& suite_path, const std::string& mode_name,
            const std::string& map_path, const std::string& policy_path,
            const ProviderFlags& provider_flags, const std::string& output_dir, int jobs,
            const std::string& transcript_path) {
    CanonicalMap map = map_path.empty() ? CanonicalMap{} : load_canonical_map(map_path);
    std::vector<TaskCase> cases = load_task_suite(suite_path, map);
    std::vector<PolicyRule> kb = policy_path.empty() ? std::vector<PolicyRule>{} : load_policy_kb(policy_path);
    SuiteMode mode = mode_name == "baseline" ? SuiteMode::baseline : SuiteMode::safeplan;
    auto provider = make_provider(provider_flags.config());
    ensure_dir(output_dir);

    std::vector<CaseResult> results(cases.size());
    std::vector<std::vector<json>> transcripts(cases.size());
    parallel_for(cases.size(), jobs, [&](std::size_t i) {
        std::vector<json>* t = transcript_path.empty() ? nullptr : &transcripts[i];
        results[i] = run_task_case(cases[i], mode, *provider, kb, t);
    });

    std::vector<json> rows;
    for (const auto& r : results) rows.push_back(case_result_to_json(r));
    write_jsonl(output_dir + "/results.jsonl", rows);
    write_transcript(transcript_path, transcripts);

    SuiteMetrics metrics = suite_metrics(results);
    json execution;
    execution["mode"] = to_string(mode);
    json by_category = json::object();
    for (const auto& [category, m] : metrics.by_category) by_category[category] = execution_to_json(m);
    execution["by_category"] = by_category;
    execution["avg_sr_pct"] = round_to(metrics.avg_sr_pct, 2);
    json report{{"overall", nullptr},
                {"by_domain", nullptr},
                {"by_complexity", nullptr},
                {"mcnemar", nullptr},
                {"execution", execution}};
    write_text_file(output_dir + "/report.json", report.dump(2) + "\n");

    std::string csv = "category,e_pct,fd_pct,f_pct,cr_pct,sr_pct,total\n";
    for (const auto& [category, m] : metrics.by_category) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.2f,%.2f,%.2f,%.2f,%.2f,%ld\n", category.c_str(),
                      m.e_pct, m.fd_pct, m.f_pct, m.cr_pct, m.sr_pct, m.total);
        csv += line;
    }
    write_text_file(output_dir + "/execution.csv", csv);
    std::cout << "sim: " << cases.size() << " cases (" << to_string(mode) << ") -> " << output_dir
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

std::vector<std::pair<BenchRecord, bool>> load_decisions(const std::string& path) {
    std::vector<std::pair<BenchRecord, bool>> decided;
    for_each_jsonl(path, [&](int line_no, const json& j) {
        BenchRecord rec;
        rec.prompt = j.value("prompt", "");
        rec.task_domain = task_domain_from(require_string(j, line_no, "task_domain"));
        rec.complexity = complexity_from(require_string(j, line_no, "complexity"));
        rec.safety_classification =
            safety_class_from(require_string(j, line_no, "safety_classification"));
        const json& accepted = require_key(j, line_no, "accepted");
        if (!accepted.is_boolean()) throw MalformedRecord(line_no, "'accepted' must be a boolean");
        decided.emplace_back(std::move(rec), accepted.get<bool>());
    });
    return decided;
}

int cmd_report(const std::string& decisions_path, const std::string& paired_path,
               const std::string& output_dir) {
    auto decided = load_decisions(decisions_path);
    std::optional<McNemarResult> paired;
    if (!paired_path.empty()) {
        auto other = load_decisions(paired_path);
        if (other.size() != decided.size())
            throw Error("paired decision files differ in length");
        std::vector<std::pair<bool, bool>> pairs;
        for (std::size_t i = 0; i < decided.size(); ++i) {
            const bool safe_a = decided[i].first.safety_classification == SafetyClass::safe;
            const bool safe_b = other[i].first.safety_classification == SafetyClass::safe;
            pairs.emplace_back(decided[i].second == safe_a, other[i].second == safe_b);
        }
        if (!pairs.empty()) paired = mcnemar(pairs);
    }
    ensure_dir(output_dir);
    json report = classification_report(decided, paired ? &*paired : nullptr);
    report["meta"] = {{"records", decided.size()}};
    write_text_file(output_dir + "/report.json", report.dump(2) + "\n");
    write_text_file(output_dir + "/report.csv", report_to_csv(report));
    std::cout << "report: " << decided.size() << " decisions -> " << output_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deontic screening and plan verification for robot task prompts"};
    app.require_subcommand(1);

    // check-prompt
    auto* check = app.add_subcommand("check-prompt", "Screen a prompt through the deontic layers");
    std::string prompt, scene_path, policy_path, map_path;
    check->add_option("--prompt", prompt, "Task prompt text")->required();
    check->add_option("--scene", scene_path, "Scene JSON file")->required();
    check->add_option("--policy", policy_path, "Policy knowledge base (JSONL)")->required();
    check->add_option("--map", map_path, "Canonical map (JSONL)");

    // verify-plan
    auto* verify = app.add_subcommand("verify-plan", "Verify a structured plan file");
    std::string plan_path, v_scene, v_skills, v_map, v_actions;
    verify->add_option("--plan", plan_path, "Structured plan text file")->required();
    verify->add_option("--scene", v_scene, "Scene JSON file")->required();
    verify->add_option("--skills", v_skills, "Skill registry (JSONL)")->required();
    verify->add_option("--map", v_map, "Canonical map (JSONL)");
    verify->add_option("--actions", v_actions, "Action library (JSONL) for bare step heads");

    // bench
    auto* bench = app.add_subcommand("bench", "Run a benchmark file through the pipeline");
    std::string bench_path, b_policy, b_skills, b_map, b_out = "out", b_transcript;
    bool b_baseline = false;
    int b_jobs = 1;
    long b_seed = 0;
    ProviderFlags bench_provider;
    bench->add_option("--bench", bench_path, "Benchmark records (JSONL)")->required();
    bench->add_option("--policy", b_policy, "Policy knowledge base (JSONL)")->required();
    bench->add_option("--skills", b_skills, "Skill registry (JSONL)");
    bench->add_option("--map", b_map, "Canonical map (JSONL)");
    bench->add_option("--output-dir", b_out, "Output directory");
    bench->add_flag("--baseline", b_baseline, "Also emit a no-screening baseline and paired stats");
    bench->add_option("--jobs", b_jobs, "Concurrent records");
    bench->add_option("--seed", b_seed, "Seed recorded in report metadata");
    bench->add_option("--transcript", b_transcript, "Provider transcript JSONL path");
    bench_provider.attach(bench);

    // sim
    auto* sim = app.add_subcommand("sim", "Run a task suite in the abstract simulator");
    std::string suite_path, s_mode = "safeplan", s_map, s_policy, s_out = "out", s_transcript;
    int s_jobs = 1;
    ProviderFlags sim_provider;
    sim->add_option("--suite", suite_path, "Task suite (JSONL)")->required();
    sim->add_option("--mode", s_mode, "baseline or safeplan")
        ->check(CLI::IsMember({"baseline", "safeplan"}));
    sim->add_option("--map", s_map, "Canonical map (JSONL)");
    sim->add_option("--policy", s_policy, "Policy knowledge base (JSONL)");
    sim->add_option("--output-dir", s_out, "Output directory");
    sim->add_option("--jobs", s_jobs, "Concurrent cases");
    sim->add_option("--transcript", s_transcript, "Provider transcript JSONL path");
    sim_provider.attach(sim);

    // report
    auto* report = app.add_subcommand("report", "Regenerate metrics from decision files");
    std::string r_decisions, r_paired, r_out = "out";
    report->add_option("--decisions", r_decisions, "Decisions JSONL")->required();
    report->add_option("--paired", r_paired, "Second decisions JSONL for paired stats");
    report->add_option("--output-dir", r_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        if (check->parsed()) return cmd_check_prompt(prompt, scene_path, policy_path, map_path);
        if (verify->parsed()) return cmd_verify_plan(plan_path, v_scene, v_skills, v_map, v_actions);
        if (bench->parsed())
            return cmd_bench(bench_path, b_policy, b_skills, b_map, bench_provider, b_out,
                             b_baseline, b_jobs, b_seed, b_transcript);
        if (sim->parsed())
            return cmd_sim(suite_path, s_mode, s_map, s_policy, sim_provider, s_out, s_jobs,
                           s_transcript);
        if (report->parsed()) return cmd_report(r_decisions, r_paired, r_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
