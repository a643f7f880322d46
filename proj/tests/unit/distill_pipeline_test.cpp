#include <doctest.h>

#include <filesystem>

#include "test_util.hpp"
#include "vulnscout/distill_pipeline.hpp"
#include "vulnscout/error.hpp"
#include "vulnscout/text.hpp"

using namespace vulnscout;

namespace {

const std::filesystem::path kData = VULNSCOUT_DATA_DIR;

Sample vuln_sample(const std::string& id, const std::string& cwe) {
    Sample s;
    s.id = id;
    s.code = "void target(char *p) { p[64] = 1; }";
    s.vulnerable = true;
    s.cwe = cwe;
    return s;
}

std::string reply(bool judge, const std::string& type_value) {
    std::string t = "analysis...\n## Final Answer\n";
    t += judge ? "#judge: yes\n" : "#judge: no\n";
    t += "#type: " + type_value + "\n";
    return t;
}

// Scripted teacher: a fixed sequence of (text, token-count) pairs.
std::shared_ptr<MockBackend> teacher_of(
    const std::vector<std::pair<std::string, int>>& outcomes) {
    auto mock = std::make_shared<MockBackend>();
    for (const auto& [text, tokens] : outcomes) {
        MockBackend::Response r;
        r.text = text;
        r.tokens = tokens;
        mock->push_default(r);
    }
    return mock;
}

} // namespace

TEST_CASE("rejection sampling keeps the shortest correct attempt") {
    Sample s = vuln_sample("s1", "CWE-125");
    // correct on attempts 3 (900 tok) and 6 (400 tok)
    auto teacher = teacher_of({{reply(false, "N/A"), 100},
                               {reply(true, "CWE-78"), 120},
                               {reply(true, "CWE-125"), 900},
                               {"garbage", 50},
                               {reply(false, "N/A"), 80},
                               {reply(true, "CWE-125"), 400},
                               {reply(false, "N/A"), 60},
                               {reply(false, "N/A"), 70}});
    RejectionResult r = rejection_sample(s, {teacher}, 8);
    REQUIRE(r.trace.has_value());
    CHECK(r.trace->total_tokens == 400);
    CHECK(r.trace->correct);
    CHECK(r.attempts.size() == 8);

    // result minimality is assertable from the retained attempt metadata
    for (const AttemptRecord& a : r.attempts)
        if (a.correct) CHECK(r.trace->total_tokens <= a.total_tokens);
}

TEST_CASE("rejection sampling returns none when every attempt fails") {
    Sample s = vuln_sample("s2", "CWE-125");
    auto t1 = teacher_of({{reply(false, "N/A"), 10}});
    auto t2 = teacher_of({{reply(true, "CWE-78"), 10}});
    RejectionResult r = rejection_sample(s, {t1, t2}, 8);
    CHECK_FALSE(r.trace.has_value());
    CHECK(r.attempts.size() == 16);
}

TEST_CASE("cross-teacher minimum wins") {
    Sample s = vuln_sample("s3", "CWE-416");
    auto teacher_a = teacher_of({{reply(true, "CWE-416"), 700}});
    auto teacher_b = teacher_of({{reply(true, "CWE-416"), 300}});
    RejectionResult r = rejection_sample(s, {teacher_a, teacher_b}, 1);
    REQUIRE(r.trace.has_value());
    CHECK(r.trace->total_tokens == 300);
}

TEST_CASE("consolidated CWE counts as the correct final answer") {
    // ground truth CWE-787 consolidates to CWE-119; teacher answers CWE-125
    // which also consolidates to CWE-119
    Sample s = vuln_sample("s4", "CWE-787");
    auto teacher = teacher_of({{reply(true, "CWE-125"), 50}});
    RejectionResult r = rejection_sample(s, {teacher}, 1);
    CHECK(r.trace.has_value());
}

TEST_CASE("constitution correction recovers a guided sample") {
    Sample s = vuln_sample("s5", "CWE-476");
    std::vector<Constitution> table = load_constitutions(kData / "constitutions.tsv");
    REQUIRE(!table.empty());

    // plain prompts fail; the guided prompt (matched by its marker) succeeds
    auto mock = std::make_shared<MockBackend>();
    MockBackend::Response guided_ok;
    guided_ok.text = reply(true, "CWE-476");
    guided_ok.tokens = 200;
    mock->add_rule_contains("Analysis Guidance:", {guided_ok});
    MockBackend::Response plain_fail;
    plain_fail.text = reply(false, "N/A");
    mock->push_default(plain_fail);

    RejectionResult plain = rejection_sample(s, {mock}, 2);
    CHECK_FALSE(plain.trace.has_value());

    RejectionResult corrected = constitution_correct(s, {mock}, table, 2);
    REQUIRE(corrected.trace.has_value());
    CHECK_FALSE(corrected.trace->constitution_used.empty());
    CHECK(corrected.trace->prompt.find("pointers are validated") != std::string::npos);
    CHECK(corrected.trace->plain_prompt.find("Analysis Guidance") == std::string::npos);
}

TEST_CASE("benign and uncovered samples raise NO_CONSTITUTION") {
    std::vector<Constitution> table = load_constitutions(kData / "constitutions.tsv");
    Sample benign;
    benign.id = "b";
    benign.code = "int ok(void) { return 0; }";
    auto teacher = teacher_of({{reply(false, "N/A"), 10}});
    CHECK_THROWS_AS(constitution_correct(benign, {teacher}, table, 1), Error);

    Sample odd = vuln_sample("o", "CWE-9999");
    CHECK_THROWS_AS(constitution_correct(odd, {teacher}, table, 1), Error);
}

TEST_CASE("length filter boundary: 32000 kept, above dropped") {
    ReasoningTrace t;
    t.prompt = "one two three four";           // 4 tokens
    t.total_tokens = 31996;
    CHECK(filter_by_length(t));                // exactly 32000 is kept
    t.total_tokens = 31997;
    CHECK_FALSE(filter_by_length(t));
    t.total_tokens = 10000;
    CHECK(filter_by_length(t));

    // monotonicity: shrinking either side never flips keep -> drop
    ReasoningTrace small = t;
    small.prompt = "one two";
    small.total_tokens = t.total_tokens - 1;
    CHECK(filter_by_length(small));
}

TEST_CASE("summary keeps the verdict block verbatim and shortens reasoning") {
    ReasoningTrace original;
    original.sample_id = "s6";
    original.correct = true;
    original.verdict.judge = true;
    original.verdict.cwe = "CWE-125";
    std::string long_reasoning;
    for (int i = 0; i < 2000; ++i) long_reasoning += "step" + std::to_string(i) + " ";
    original.reasoning = long_reasoning + "\n## Final Answer\n#judge: yes\n#type: CWE-125\n";
    original.total_tokens = static_cast<int>(approx_token_count(original.reasoning));

    auto summarizer = teacher_of(
        {{"short summary of the steps\n## Final Answer\n#judge: yes\n#type: CWE-125\n", 0}});
    ReasoningTrace summarized = summarize_trace(original, *summarizer);
    CHECK(summarized.stage == "summary");
    CHECK(summarized.total_tokens < original.total_tokens);
    CHECK(summarized.reasoning.find("## Final Answer\n#judge: yes\n#type: CWE-125") !=
          std::string::npos);
    auto v = parse_verdict(summarized.reasoning);
    REQUIRE(v.has_value());
    CHECK(v->cwe == "CWE-125");
}

TEST_CASE("summarizer verdict drift is rejected") {
    ReasoningTrace original;
    original.sample_id = "s7";
    original.correct = true;
    original.verdict.judge = true;
    original.verdict.cwe = "CWE-125";
    original.reasoning = "steps\n## Final Answer\n#judge: yes\n#type: CWE-125\n";

    auto flipper =
        teacher_of({{"summary\n## Final Answer\n#judge: no\n#type: N/A\n", 0}});
    try {
        summarize_trace(original, *flipper);
        FAIL("expected SUMMARY_VERDICT_DRIFT");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::summary_verdict_drift);
    }
}

TEST_CASE("batch property: kept summaries are all shorter than their originals") {
    auto summarizer = teacher_of(
        {{"compact\n## Final Answer\n#judge: yes\n#type: CWE-190\n", 0}});
    for (int i = 0; i < 50; ++i) {
        ReasoningTrace original;
        original.sample_id = "batch" + std::to_string(i);
        original.correct = true;
        original.verdict.judge = true;
        original.verdict.cwe = "CWE-190";
        std::string body;
        for (int k = 0; k < 300 + i * 10; ++k) body += "w ";
        original.reasoning = body + "\n## Final Answer\n#judge: yes\n#type: CWE-190\n";
        original.total_tokens = static_cast<int>(approx_token_count(original.reasoning));
        ReasoningTrace summarized = summarize_trace(original, *summarizer);
        CHECK(summarized.total_tokens < original.total_tokens); // token recount oracle
    }
}

TEST_CASE("strip_guidance emits the plain prompt with the output verbatim") {
    ReasoningTrace trace;
    trace.sample_id = "s8";
    trace.stage = "full";
    trace.plain_prompt = "PLAIN PROMPT";
    trace.prompt = "PLAIN PROMPT\nAnalysis Guidance:\n- check pointers\n";
    trace.reasoning = "out\n## Final Answer\n#judge: yes\n#type: CWE-476\n";
    trace.constitution_used = {"CWE-476#0"};

    TrainingRecord rec = strip_guidance(trace);
    CHECK(rec.prompt == "PLAIN PROMPT");
    CHECK(rec.prompt.find("Analysis Guidance") == std::string::npos);
    CHECK(rec.target == trace.reasoning);
    REQUIRE(rec.mask_spans.size() == 1);
    CHECK(rec.mask_spans[0].first == 0);
    CHECK(rec.mask_spans[0].second == rec.prompt.size());
}

TEST_CASE("agentic trajectories keep only correct, well-formed sessions") {
    Sample truth = vuln_sample("s9", "CWE-125");

    std::vector<ChatMessage> transcript;
    transcript.push_back({Role::user, "prompt", std::nullopt, std::nullopt});
    ChatMessage call;
    call.role = Role::assistant;
    call.tool_call = ToolCall{"get_function_definition", R"({"func_name": "x"})"};
    transcript.push_back(call);
    transcript.push_back({Role::tool, "[SUCCESS]: [File: a.c]\nint x;", std::nullopt,
                          std::string("[SUCCESS]: [File: a.c]\nint x;")});
    Verdict good;
    good.judge = true;
    good.cwe = "CWE-125";
    transcript.push_back({Role::assistant,
                          "## Final Answer\n#judge: yes\n#type: CWE-125", std::nullopt,
                          std::nullopt});

    auto kept = record_agentic_trajectory("sess1", transcript, good, truth);
    REQUIRE(kept.has_value());
    CHECK(kept->correct);
    for (std::size_t i = 0; i < kept->messages.size(); ++i)
        if (kept->messages[i].role == Role::assistant && kept->messages[i].tool_call) {
            REQUIRE(i + 1 < kept->messages.size());
            CHECK(kept->messages[i + 1].role == Role::tool);
        }

    Verdict wrong;
    wrong.judge = false;
    CHECK_FALSE(record_agentic_trajectory("sess2", transcript, wrong, truth).has_value());
    CHECK_FALSE(record_agentic_trajectory("sess3", transcript, std::nullopt, truth)
                    .has_value());

    // a dangling tool call invalidates the trajectory
    std::vector<ChatMessage> dangling = transcript;
    dangling.push_back(call);
    CHECK_FALSE(record_agentic_trajectory("sess4", dangling, good, truth).has_value());
}

TEST_CASE("agentic training record masks everything but assistant output") {
    Sample truth = vuln_sample("s10", "CWE-125");
    std::vector<ChatMessage> transcript;
    transcript.push_back({Role::user, "USERTEXT", std::nullopt, std::nullopt});
    transcript.push_back({Role::assistant, "ASSISTANTTEXT", std::nullopt, std::nullopt});
    Verdict v;
    v.judge = true;
    v.cwe = "CWE-125";
    auto traj = record_agentic_trajectory("sess", transcript, v, truth);
    REQUIRE(traj.has_value());

    TrainingRecord rec = trajectory_to_training_record(*traj);
    CHECK(rec.stage == "agentic");
    auto masked = [&](std::size_t pos) {
        for (auto [b, e] : rec.mask_spans)
            if (pos >= b && pos < e) return true;
        return false;
    };
    std::size_t user_pos = rec.target.find("USERTEXT");
    std::size_t asst_pos = rec.target.find("ASSISTANTTEXT");
    REQUIRE(user_pos != std::string::npos);
    REQUIRE(asst_pos != std::string::npos);
    CHECK(masked(user_pos));
    CHECK_FALSE(masked(asst_pos));
}

TEST_CASE("checkpoints survive reopening and skip completed samples") {
    testutil::TempDir dir("dp_ckpt");
    auto file = dir.path() / "ckpt.jsonl";
    {
        CheckpointStore store(file);
        CHECK_FALSE(store.done("s1"));
        store.mark("s1", "kept");
        CHECK(store.done("s1"));
    }
    CheckpointStore reopened(file);
    CHECK(reopened.done("s1"));
    CHECK_FALSE(reopened.done("s2"));
}

TEST_CASE("run_distillation: end-to-end stage accounting and guidance scrubbing") {
    std::vector<Constitution> table = load_constitutions(kData / "constitutions.tsv");

    Sample easy = vuln_sample("easy", "CWE-125");
    Sample hard = vuln_sample("hard", "CWE-476");
    Sample hopeless = vuln_sample("hopeless", "CWE-416");

    auto teacher = std::make_shared<MockBackend>();
    // guided requests match first (plain prompts carry no guidance section);
    // every plain request falls through to the CWE-125 reply
    MockBackend::Response ok476;
    ok476.text = reply(true, "CWE-476");
    ok476.tokens = 150;
    teacher->add_rule_contains("Analysis Guidance:", {ok476});
    MockBackend::Response ok125;
    ok125.text = reply(true, "CWE-125");
    ok125.tokens = 120;
    teacher->add_rule_contains("p[64] = 1", {ok125});

    DistillConfig config;
    config.attempts = 2;
    DistillStats stats;
    std::vector<TrainingRecord> records =
        run_distillation({easy, hard, hopeless}, {teacher}, table, nullptr, config,
                         nullptr, &stats);

    CHECK(stats.samples == 3);
    CHECK(stats.kept_plain == 1);     // easy
    CHECK(stats.kept_corrected == 1); // hard via guidance
    CHECK(stats.rejected == 1);       // hopeless: guided reply gives CWE-476
    REQUIRE(records.size() == 2);
    for (const TrainingRecord& rec : records) {
        // no emitted prompt contains constitution guidance
        for (const Constitution& c : table)
            CHECK(rec.prompt.find(c.guidance) == std::string::npos);
        auto v = parse_verdict(rec.target);
        CHECK(v.has_value());
    }
}
