// Acceptance suite: one criterion per check_* function, one PASS/FAIL line
// each, nonzero exit when anything fails. Runs fully offline against the
// scripted mock backend and the checked-in fixtures.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vulnscout/callgraph.hpp"
#include "vulnscout/context_retriever.hpp"
#include "vulnscout/corpus_forge.hpp"
#include "vulnscout/distill_pipeline.hpp"
#include "vulnscout/error.hpp"
#include "vulnscout/eval.hpp"
#include "vulnscout/inference_engine.hpp"
#include "vulnscout/lexer.hpp"
#include "vulnscout/model_gateway.hpp"
#include "vulnscout/source_index.hpp"
#include "vulnscout/text.hpp"

using namespace vulnscout;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = VULNSCOUT_FIXTURE_DIR;
const fs::path kData = VULNSCOUT_DATA_DIR;

int failures = 0;
std::vector<std::string> current_errors;

#define EXPECT(cond, msg)                                                                \
    do {                                                                                 \
        if (!(cond)) current_errors.push_back(msg);                                      \
    } while (0)

void run_criterion(int number, const std::string& title, double time_limit_s,
                   const std::function<void()>& body) {
    current_errors.clear();
    auto start = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const std::exception& e) {
        current_errors.push_back(std::string("exception: ") + e.what());
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (time_limit_s > 0 && elapsed > time_limit_s)
        current_errors.push_back("runtime " + std::to_string(elapsed) + "s exceeds " +
                                 std::to_string(time_limit_s) + "s");
    bool ok = current_errors.empty();
    if (!ok) ++failures;
    std::printf("%s  criterion %2d: %s (%.2fs)\n", ok ? "PASS" : "FAIL", number,
                title.c_str(), elapsed);
    for (const std::string& err : current_errors)
        std::printf("      - %s\n", err.c_str());
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. call-graph oracle equivalence on randomized synthetic projects
// ---------------------------------------------------------------------------

ProjectIndex random_synthetic_index(std::mt19937_64& rng) {
    ProjectIndex index;
    index.root = "synthetic";
    index.language = Language::c;

    const std::vector<std::vector<std::string>> sig_pool = {
        {}, {"int"}, {"char*"}, {"int", "char*"}, {"unsigned int"}, {"int", "int"}};

    int n = 8 + static_cast<int>(rng() % 43); // <= 50 functions
    for (int i = 0; i < n; ++i) {
        FunctionRecord f;
        f.name = "fn" + std::to_string(i);
        f.qualified_name = f.name;
        f.file = "f" + std::to_string(i % 5) + ".c";
        f.start_line = 1 + i * 10;
        f.end_line = f.start_line + 8;
        f.source_text = "int " + f.name + "() { return 0; }";
        f.param_sig = sig_pool[rng() % sig_pool.size()];
        f.is_address_taken = rng() % 3 == 0;
        index.functions.push_back(std::move(f));
    }
    int edges = n + static_cast<int>(rng() % (2 * n));
    for (int e = 0; e < edges; ++e) {
        CallSiteRecord cs;
        int caller = static_cast<int>(rng() % n);
        cs.caller = "fn" + std::to_string(caller);
        cs.file = index.functions[caller].file;
        cs.line = index.functions[caller].start_line + 1;
        if (rng() % 4 == 0) {
            cs.callee_name = kFunctionPointer;
            cs.arg_sig = sig_pool[rng() % sig_pool.size()];
            cs.arg_count = static_cast<int>(cs.arg_sig.size());
        } else {
            cs.callee_name = "fn" + std::to_string(rng() % n);
            cs.arg_count = 0;
        }
        index.call_sites.push_back(std::move(cs));
    }
    index.rebuild_lookup();
    return index;
}

std::set<std::string> bfs_oracle(const CallGraph& g) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const CallEdge& e : g.edges) adj[e.caller].push_back(e.callee);
    std::set<std::string> reached;
    std::vector<std::string> frontier(g.entry_points.begin(), g.entry_points.end());
    std::set<std::string> visited(g.entry_points.begin(), g.entry_points.end());
    while (!frontier.empty()) {
        std::vector<std::string> next;
        for (const std::string& cur : frontier) {
            for (const std::string& succ : adj[cur]) {
                reached.insert(succ);
                if (visited.insert(succ).second) next.push_back(succ);
            }
        }
        frontier = std::move(next);
    }
    return reached;
}

void criterion_callgraph_oracle() {
    std::mt19937_64 rng(0xACCE1);
    for (int trial = 0; trial < 24; ++trial) {
        ProjectIndex index = random_synthetic_index(rng);
        CallGraph g = resolve_indirect_edges(index, build_direct_graph(index));
        set_entry_points(g, {"fn0"});

        std::set<std::string> targets = select_targets(g);
        std::set<std::string> oracle = bfs_oracle(g);
        EXPECT(targets == oracle,
               "trial " + std::to_string(trial) + ": select_targets != BFS oracle");

        for (const CallEdge& e : g.edges) {
            if (e.kind != EdgeKind::indirect) continue;
            const FunctionRecord* callee = index.by_qualified_name(e.callee);
            EXPECT(callee != nullptr, "indirect edge to unknown node");
            if (!callee) continue;
            EXPECT(callee->is_address_taken, "indirect edge to non-address-taken " + e.callee);
            bool justified = false;
            for (const CallSiteRecord& cs : index.call_sites) {
                if (cs.caller != e.caller || cs.callee_name != kFunctionPointer) continue;
                if (static_cast<int>(callee->param_sig.size()) == cs.arg_count &&
                    callee->param_sig == cs.arg_sig)
                    justified = true;
            }
            EXPECT(justified, "indirect edge without arity+signature justification");
        }
    }
}

// ---------------------------------------------------------------------------
// 2. path-sampling contract on known path counts {1, 2, 7}
// ---------------------------------------------------------------------------

CallGraph graph_of(std::vector<CallEdge> edges, std::vector<std::string> entries) {
    CallGraph g;
    for (const CallEdge& e : edges) {
        g.nodes.insert(e.caller);
        g.nodes.insert(e.callee);
    }
    for (const auto& n : entries) g.nodes.insert(n);
    std::sort(edges.begin(), edges.end());
    g.edges = std::move(edges);
    g.entry_points = std::move(entries);
    return g;
}

std::set<std::vector<std::string>> dfs_all_paths(const CallGraph& g, const std::string& from,
                                                 const std::string& to) {
    std::set<std::vector<std::string>> out;
    std::vector<std::string> path{from};
    std::set<std::string> on_path{from};
    std::function<void()> go = [&] {
        if (path.back() == to) {
            out.insert(path);
            return;
        }
        for (const CallEdge& e : g.edges) {
            if (e.caller != path.back() || on_path.count(e.callee)) continue;
            path.push_back(e.callee);
            on_path.insert(e.callee);
            go();
            on_path.erase(e.callee);
            path.pop_back();
        }
    };
    go();
    return out;
}

void criterion_path_sampling() {
    auto d = [](const char* a, const char* b) { return CallEdge{a, b, EdgeKind::direct}; };
    std::vector<std::pair<CallGraph, std::size_t>> cases;
    cases.emplace_back(graph_of({d("e", "a"), d("a", "t")}, {"e"}), 1u);
    cases.emplace_back(graph_of({d("e", "a"), d("e", "b"), d("a", "t"), d("b", "t")}, {"e"}),
                       2u);
    cases.emplace_back(graph_of({d("e", "a"), d("e", "b"), d("e", "c"), d("a", "b"),
                                 d("a", "c"), d("b", "c"), d("b", "t"), d("c", "t"),
                                 d("a", "t")},
                                {"e"}),
                       7u);

    for (std::size_t i = 0; i < cases.size(); ++i) {
        const CallGraph& g = cases[i].first;
        std::size_t expect_count = cases[i].second;
        std::set<std::vector<std::string>> all = dfs_all_paths(g, "e", "t");
        EXPECT(all.size() == expect_count,
               "fixture " + std::to_string(i) + " enumerates " + std::to_string(all.size()));

        for (std::uint64_t seed : {1ULL, 42ULL, 1000003ULL}) {
            auto sampled = sample_call_paths(g, "e", "t", 3, seed);
            EXPECT(sampled.size() == std::min<std::size_t>(3, expect_count),
                   "wrong sampled count");
            std::set<std::vector<std::string>> distinct;
            for (const CallPath& p : sampled) {
                EXPECT(p.valid_in(g), "invalid sampled path");
                EXPECT(all.count(p.nodes) == 1, "sampled path outside enumeration");
                distinct.insert(p.nodes);
            }
            EXPECT(distinct.size() == sampled.size(), "duplicate sampled paths");

            auto again = sample_call_paths(g, "e", "t", 3, seed);
            bool same = again.size() == sampled.size();
            for (std::size_t k = 0; same && k < again.size(); ++k)
                same = again[k].nodes == sampled[k].nodes;
            EXPECT(same, "sampling not deterministic for a fixed seed");
        }
    }
}

// ---------------------------------------------------------------------------
// 3. verdict grammar round-trip + fuzz
// ---------------------------------------------------------------------------

void criterion_verdict_grammar() {
    std::mt19937_64 rng(0xF00D);
    for (int i = 0; i < 1000; ++i) {
        bool judge = rng() % 2 == 0;
        std::string cwe = "CWE-" + std::to_string(1 + rng() % 1400);
        std::string reply = "analysis text\n## Final Answer\n";
        reply += judge ? "#judge: yes\n#type: " + cwe + "\n" : "#judge: no\n#type: N/A\n";

        MockBackend mock;
        MockBackend::Response r;
        r.text = reply;
        mock.push_default(r);
        Completion c = mock.generate(
            {{Role::user, render_detection_prompt("code"), std::nullopt, std::nullopt}}, {},
            {});
        auto v = parse_verdict(c.text);
        EXPECT(v.has_value(), "round-trip parse failed");
        if (!v) continue;
        EXPECT(v->judge == judge, "judge flipped in round-trip");
        if (judge) EXPECT(v->cwe == cwe, "cwe mangled in round-trip");
        else EXPECT(!v->cwe.has_value(), "cwe invented for benign verdict");
    }

    for (int i = 0; i < 10000; ++i) {
        std::size_t len = rng() % 300;
        std::string bytes;
        for (std::size_t k = 0; k < len; ++k) bytes += static_cast<char>(rng() % 256);
        auto v = parse_verdict(bytes); // must never crash
        if (v) EXPECT(v->judge == v->cwe.has_value(), "verdict invariant violated on fuzz");
    }
}

// ---------------------------------------------------------------------------
// 4. majority voting, exhaustive over {yes:119, yes:416, no} up to length 5
// ---------------------------------------------------------------------------

void criterion_majority_vote() {
    Verdict y119, y416, no;
    y119.judge = true;
    y119.cwe = "CWE-119";
    y416.judge = true;
    y416.cwe = "CWE-416";
    const std::vector<Verdict> alphabet = {y119, y416, no};

    long long checked = 0;
    for (int len = 1; len <= 5; ++len) {
        std::vector<int> idx(static_cast<std::size_t>(len), 0);
        for (;;) {
            std::vector<Verdict> votes;
            for (int v : idx) votes.push_back(alphabet[static_cast<std::size_t>(v)]);

            // brute-force tally oracle
            std::size_t yes = 0;
            std::map<std::string, int> tally;
            for (const Verdict& v : votes) {
                if (v.judge) {
                    ++yes;
                    ++tally[*v.cwe];
                }
            }
            Verdict expect;
            if (yes * 2 > votes.size()) {
                expect.judge = true;
                std::string best;
                int best_n = 0;
                for (const auto& [cwe, n] : tally)
                    if (n > best_n || (n == best_n && cwe < best)) {
                        best = cwe;
                        best_n = n;
                    }
                expect.cwe = best;
            }

            Verdict got = majority_vote(votes);
            EXPECT(got.judge == expect.judge && got.cwe == expect.cwe,
                   "majority_vote mismatch at case " + std::to_string(checked));
            ++checked;

            int p = len - 1;
            while (p >= 0 && idx[static_cast<std::size_t>(p)] == 2) {
                idx[static_cast<std::size_t>(p)] = 0;
                --p;
            }
            if (p < 0) break;
            ++idx[static_cast<std::size_t>(p)];
        }
    }
    EXPECT(checked == 3 + 9 + 27 + 81 + 243, "expected exhaustive case count");
}

// ---------------------------------------------------------------------------
// 5. policy generation size contract
// ---------------------------------------------------------------------------

void criterion_policy_generation() {
    auto policy_for = [](const std::vector<std::string>& type_lines)
        -> std::optional<PolicySet> {
        auto mock = std::make_shared<MockBackend>();
        for (const std::string& t : type_lines) {
            MockBackend::Response r;
            r.text = t.empty() ? "## Final Answer\n#judge: no\n#type: N/A\n"
                               : "## Final Answer\n#judge: yes\n#type: " + t + "\n";
            mock->push_default(r);
        }
        Gateway gw(mock);
        ContextBundle bundle;
        bundle.target.qualified_name = "f";
        bundle.target.source_text = "int f(void) { return 0; }";
        GenerationParams params;
        params.temperature = 0.7;
        return generate_policy(bundle, gw, params);
    };

    // 0 distinct -> degenerate
    EXPECT(!policy_for({"", "", "", ""}).has_value(), "0 candidates not degenerate");
    // 1 distinct -> degenerate
    EXPECT(!policy_for({"CWE-22", "CWE-22", "", ""}).has_value(),
           "1 candidate not degenerate");
    // 2 distinct -> size 2
    auto two = policy_for({"CWE-22", "CWE-78", "CWE-22", ""});
    EXPECT(two && two->cwes.size() == 2, "2 candidates -> size-2 policy");
    // 5 distinct -> size 5
    auto five = policy_for({"CWE-1, CWE-2", "CWE-3, CWE-4", "CWE-5", ""});
    EXPECT(five && five->cwes.size() == 5, "5 candidates -> size-5 policy");
    // 6 distinct -> capped at size 5
    auto six = policy_for({"CWE-1, CWE-2", "CWE-3, CWE-4", "CWE-5, CWE-6", "CWE-1"});
    EXPECT(six && six->cwes.size() == 5, "6 candidates -> size-5 policy");
    if (six) {
        std::set<std::string> distinct(six->cwes.begin(), six->cwes.end());
        EXPECT(distinct.size() == 5, "policy contains duplicates");
    }
}

// ---------------------------------------------------------------------------
// 6. Juliet split fidelity + obfuscation hygiene
// ---------------------------------------------------------------------------

bool leak_free(std::string_view text) {
    for (const char* kw : {"good", "bad", "cwe", "g2b"})
        if (contains_ci(text, kw)) return false;
    return true;
}

void criterion_juliet_split() {
    std::mt19937_64 seeds(77);
    int files = 0;
    for (int i = 1; i <= 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "case%02d", i);
        fs::path base = kFixtures / "juliet" / name;
        std::string input = read_file(base.string() + ".c");
        if (input.empty()) {
            EXPECT(false, std::string("missing fixture ") + name);
            continue;
        }
        ++files;
        JulietSplit split = split_juliet_c(input);
        EXPECT(split.benign == read_file(base.string() + ".benign.c"),
               std::string(name) + ": benign variant differs from hand oracle");
        EXPECT(split.vulnerable == read_file(base.string() + ".vuln.c"),
               std::string(name) + ": vulnerable variant differs from hand oracle");

        EXPECT(leak_free(obfuscate(split.benign, Language::c, seeds())),
               std::string(name) + ": benign obfuscation leaks a keyword");
        EXPECT(leak_free(obfuscate(split.vulnerable, Language::c, seeds())),
               std::string(name) + ": vulnerable obfuscation leaks a keyword");
    }
    EXPECT(files >= 10, "fewer than 10 fixture files");

    // nested-guard coverage comes from case04/case07; make sure they differ
    std::string nested = read_file(kFixtures / "juliet" / "case07.c");
    EXPECT(nested.find("#ifndef CASE07_HELPER_SEEN") != std::string::npos,
           "nested-guard fixture lost its inner directive");

    // Java: replacements are exactly 7 lowercase letters
    std::string java = read_file(kFixtures / "juliet" / "Case12.java");
    std::string obf = obfuscate(java, Language::java, 4242);
    EXPECT(leak_free(obf), "java obfuscation leaks a keyword");
    std::size_t pos = obf.find("public class ");
    EXPECT(pos != std::string::npos, "java class declaration vanished");
    if (pos != std::string::npos) {
        pos += std::string("public class ").size();
        std::string fresh;
        while (pos < obf.size() && std::islower(static_cast<unsigned char>(obf[pos])))
            fresh += obf[pos++];
        EXPECT(fresh.size() == 7,
               "java replacement length " + std::to_string(fresh.size()) + " != 7");
    }
}

// ---------------------------------------------------------------------------
// 7. sanitizer -> CWE classification table
// ---------------------------------------------------------------------------

void criterion_sanitizer_table() {
    auto classify = [&](const char* file) {
        return infer_cwe_from_sanitizer({read_file(kFixtures / "sanitizer" / file)});
    };
    EXPECT(classify("asan_read.txt") == std::optional<std::string>("CWE-125"),
           "heap-buffer-overflow READ must map to CWE-125");
    EXPECT(classify("asan_uaf.txt") == std::optional<std::string>("CWE-416"),
           "heap-use-after-free must map to CWE-416");
    EXPECT(classify("asan_write.txt") == std::optional<std::string>("CWE-787"),
           "heap-buffer-overflow WRITE must map to CWE-787");
    const char* negatives[] = {"none_segv.txt",   "none_stack_exhaustion.txt",
                               "none_leak.txt",   "none_fpe.txt",
                               "none_ubsan_shift.txt", "none_timeout.txt"};
    int checked = 0;
    for (const char* f : negatives) {
        EXPECT(!classify(f).has_value(), std::string(f) + " must map to none");
        ++checked;
    }
    EXPECT(checked >= 5, "need at least 5 non-matching reports");
}

// ---------------------------------------------------------------------------
// 8. dedup oracle equivalence on 200 samples with planted overlaps
// ---------------------------------------------------------------------------

void criterion_dedup_oracle() {
    std::mt19937_64 rng(0xDED0B);
    std::vector<Sample> samples;
    std::vector<std::vector<std::string>> token_lists;
    for (int s = 0; s < 200; ++s) {
        std::vector<std::string> toks;
        int len = 40 + static_cast<int>(rng() % 30);
        for (int i = 0; i < len; ++i)
            toks.push_back("id" + std::to_string(rng() % 1000000));
        if (s > 0 && rng() % 3 == 0) {
            const auto& donor = token_lists[rng() % token_lists.size()];
            std::size_t at = rng() % (donor.size() - 19);
            for (int k = 0; k < 20; ++k) toks[10 + static_cast<std::size_t>(k)] = donor[at + k];
        }
        Sample sample;
        sample.id = "s" + std::to_string(s);
        for (const auto& t : toks) sample.code += t + " ";
        samples.push_back(sample);
        token_lists.push_back(std::move(toks));
    }

    DedupResult got = dedup(samples, 20);

    auto grams = [](const std::vector<std::string>& toks) {
        std::set<std::string> out;
        for (std::size_t i = 0; i + 20 <= toks.size(); ++i) {
            std::string g;
            for (int k = 0; k < 20; ++k) g += toks[i + static_cast<std::size_t>(k)] + "\x1f";
            out.insert(std::move(g));
        }
        return out;
    };
    std::vector<std::string> oracle_kept;
    std::vector<std::set<std::string>> kept_grams;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        std::set<std::string> mine = grams(token_lists[s]);
        bool dup = false;
        for (const auto& earlier : kept_grams) {
            for (const auto& g : mine)
                if (earlier.count(g)) {
                    dup = true;
                    break;
                }
            if (dup) break;
        }
        if (!dup) {
            oracle_kept.push_back(samples[s].id);
            kept_grams.push_back(std::move(mine));
        }
    }

    std::vector<std::string> got_kept;
    for (const Sample& s : got.kept) got_kept.push_back(s.id);
    EXPECT(got_kept == oracle_kept, "kept set differs from quadratic oracle");
    EXPECT(got.kept.size() < samples.size(), "planted overlaps never dropped anything");

    // pairwise disjointness at n = 20
    for (std::size_t a = 0; a < kept_grams.size(); ++a)
        for (std::size_t b = a + 1; b < kept_grams.size(); ++b)
            for (const auto& g : kept_grams[a])
                if (kept_grams[b].count(g)) {
                    EXPECT(false, "kept samples share a 20-token n-gram");
                    break;
                }

    // 19-token overlaps survive
    std::string shared;
    for (int i = 0; i < 19; ++i) shared += "shared" + std::to_string(i) + " ";
    Sample a, b;
    a.id = "a19";
    a.code = "left " + shared + "endA";
    b.id = "b19";
    b.code = "right " + shared + "endB";
    DedupResult r19 = dedup({a, b}, 20);
    EXPECT(r19.kept.size() == 2, "19-token overlap wrongly dropped");
}

// ---------------------------------------------------------------------------
// 9. distillation selection
// ---------------------------------------------------------------------------

void criterion_distillation() {
    Sample sample;
    sample.id = "accept9";
    sample.code = "void target(char *p) { p[64] = 1; }";
    sample.vulnerable = true;
    sample.cwe = "CWE-787";

    auto reply = [](bool ok, const char* cwe) {
        std::string t = "steps...\n## Final Answer\n";
        t += ok ? std::string("#judge: yes\n#type: ") + cwe + "\n" : "#judge: no\n#type: N/A\n";
        return t;
    };

    // teacher A: correct at 900 and 500 tokens; teacher B: correct at 400
    auto teacher_a = std::make_shared<MockBackend>();
    for (auto [text, tokens] : std::vector<std::pair<std::string, int>>{
             {reply(false, ""), 100},
             {reply(true, "CWE-787"), 900},
             {reply(true, "CWE-787"), 500},
             {reply(false, ""), 90}}) {
        MockBackend::Response r;
        r.text = text;
        r.tokens = tokens;
        teacher_a->push_default(r);
    }
    auto teacher_b = std::make_shared<MockBackend>();
    for (auto [text, tokens] : std::vector<std::pair<std::string, int>>{
             {reply(true, "CWE-787"), 400},
             {reply(false, ""), 80},
             {reply(true, "CWE-22"), 30},
             {reply(false, ""), 70}}) {
        MockBackend::Response r;
        r.text = text;
        r.tokens = tokens;
        teacher_b->push_default(r);
    }
    RejectionResult rr = rejection_sample(sample, {teacher_a, teacher_b}, 4);
    EXPECT(rr.trace.has_value(), "rejection sampling found no correct trace");
    if (rr.trace)
        EXPECT(rr.trace->total_tokens == 400,
               "kept " + std::to_string(rr.trace->total_tokens) + " tokens, not the global min");
    for (const AttemptRecord& a : rr.attempts)
        if (a.correct && rr.trace)
            EXPECT(rr.trace->total_tokens <= a.total_tokens, "non-minimal correct trace kept");

    // constitution correction recovers a scripted plain-failure/guided-success sample
    std::vector<Constitution> table = load_constitutions(kData / "constitutions.tsv");
    Sample hard = sample;
    hard.id = "accept9b";
    hard.cwe = "CWE-476";
    auto guided = std::make_shared<MockBackend>();
    {
        MockBackend::Response ok;
        ok.text = reply(true, "CWE-476");
        ok.tokens = 150;
        guided->add_rule_contains("Analysis Guidance:", {ok});
        MockBackend::Response fail;
        fail.text = reply(false, "");
        fail.tokens = 20;
        guided->push_default(fail);
    }
    EXPECT(!rejection_sample(hard, {guided}, 2).trace.has_value(),
           "plain sampling unexpectedly succeeded");
    RejectionResult corrected = constitution_correct(hard, {guided}, table, 2);
    EXPECT(corrected.trace.has_value(), "constitution correction failed to recover");
    if (corrected.trace) {
        EXPECT(!corrected.trace->constitution_used.empty(), "constitution ids not recorded");
        TrainingRecord rec = strip_guidance(*corrected.trace);
        for (const Constitution& c : table)
            EXPECT(rec.prompt.find(c.guidance) == std::string::npos,
                   "emitted prompt contains constitution text");
    }

    // length filter: drops exactly the > 32000 combined-token traces
    ReasoningTrace t;
    t.prompt = "a b c d";
    t.total_tokens = 31996;
    EXPECT(filter_by_length(t), "exactly 32000 must be kept");
    t.total_tokens = 31997;
    EXPECT(!filter_by_length(t), "32001 must be dropped");
    t.total_tokens = 1;
    EXPECT(filter_by_length(t), "small trace dropped");
}

// ---------------------------------------------------------------------------
// 10. scripted end-to-end scan
// ---------------------------------------------------------------------------

void criterion_end_to_end_scan() {
    fs::path proj = kFixtures / "scanproj" / "src";
    fs::path script = kFixtures / "scanproj" / "mock.json";

    ProjectIndex index = parse_project(proj, Language::c);
    EXPECT(index.functions.size() == 15, "fixture must hold 15 functions, has " +
                                             std::to_string(index.functions.size()));
    CallGraph graph = resolve_indirect_edges(index, build_direct_graph(index));
    set_entry_points(graph, {"harness"});

    ScanConfig config;
    config.entry_points = {"harness"};
    config.seed = 2024;

    auto run = [&] {
        Gateway gw(MockBackend::from_script(script));
        return scan_project(index, graph, config, gw);
    };
    FindingsReport first = run();
    FindingsReport second = run();

    std::string bytes1 = findings_to_jsonl(first);
    std::string bytes2 = findings_to_jsonl(second);
    EXPECT(bytes1 == bytes2, "two same-seed runs differ");

    std::map<std::string, std::set<std::string>> truth = {
        {"OOB-read-chunk", {"decode_chunk"}}, {"UAF-name", {"copy_name"}}};
    ProjectScore score = score_project_level(first, truth);
    EXPECT(score.tp == 2, "expected 2 TPs, got " + std::to_string(score.tp));
    EXPECT(score.fp == 0, "expected 0 FPs, got " + std::to_string(score.fp));

    bool saw_tool_round = false;
    for (const Finding& f : first.findings) {
        EXPECT(f.rounds_used <= 8, f.function + " exceeded 8 rounds");
        if (f.rounds_used > 0) saw_tool_round = true;
        if (f.function == "decode_chunk") {
            EXPECT(f.verdict && f.verdict->judge, "decode_chunk not flagged");
            if (f.verdict && f.verdict->cwe)
                EXPECT(*f.verdict->cwe == "CWE-119",
                       "CWE-125 not consolidated: " + *f.verdict->cwe);
        }
    }
    EXPECT(saw_tool_round, "no get_function_definition round exercised");
    EXPECT(first.errors == 0, "scan recorded errors");
}

// ---------------------------------------------------------------------------
// 11. metrics algebra
// ---------------------------------------------------------------------------

void criterion_metrics_algebra() {
    std::mt19937_64 rng(0xE7A1);
    const std::vector<std::string> cwes = {"CWE-119", "CWE-125", "CWE-787",
                                           "CWE-416", "CWE-476", "CWE-190"};
    std::vector<std::optional<Verdict>> preds;
    std::vector<GroundTruthLabel> labels;
    for (int i = 0; i < 100; ++i) {
        if (rng() % 3 == 0) labels.push_back({false, std::nullopt});
        else labels.push_back({true, cwes[rng() % cwes.size()]});
        int p = static_cast<int>(rng() % 4);
        if (p == 0) preds.push_back(std::nullopt);
        else if (p == 1) preds.push_back(Verdict{});
        else {
            Verdict v;
            v.judge = true;
            v.cwe = cwes[rng() % cwes.size()];
            preds.push_back(v);
        }
    }
    EvalReport r = score_function_level(preds, labels);

    long long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool yes = preds[i].has_value() && preds[i]->judge;
        std::string pc = yes ? consolidate_cwe(*preds[i]->cwe) : "";
        std::string lc = labels[i].vulnerable ? consolidate_cwe(*labels[i].cwe) : "";
        if (labels[i].vulnerable) {
            if (yes && pc == lc) ++tp;
            else if (yes) ++fp;
            else ++fn;
        } else {
            yes ? ++fp : ++tn;
        }
    }
    EXPECT(r.overall.tp == tp && r.overall.fp == fp && r.overall.fn == fn &&
               r.overall.tn == tn,
           "confusion counts differ from the independent tally");
    double f1 = (2 * tp + fp + fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    double fpr = (fp + tn) > 0 ? 1.0 * fp / (fp + tn) : 0.0;
    double fnr = (fn + tp) > 0 ? 1.0 * fn / (fn + tp) : 0.0;
    EXPECT(std::abs(r.f1 - f1) <= 1e-12, "f1 outside 1e-12");
    EXPECT(std::abs(r.fpr - fpr) <= 1e-12, "fpr outside 1e-12");
    EXPECT(std::abs(r.fnr - fnr) <= 1e-12, "fnr outside 1e-12");

    // 10 constructed project-level cases for "at least one flagged function"
    struct Case {
        std::vector<std::pair<std::string, bool>> findings;
        std::map<std::string, std::set<std::string>> truth;
        int tp;
        int fp;
    };
    std::vector<Case> cases = {
        {{{"f", true}, {"g", false}}, {{"V", {"f", "g"}}}, 1, 0},
        {{{"f", false}, {"g", true}}, {{"V", {"f", "g"}}}, 1, 0},
        {{{"f", false}, {"g", false}}, {{"V", {"f", "g"}}}, 0, 0},
        {{{"f", true}, {"g", true}}, {{"V", {"f", "g"}}}, 1, 0},
        {{{"x", true}}, {{"V", {"f"}}}, 0, 1},
        {{{"f", true}, {"x", true}}, {{"V", {"f"}}}, 1, 1},
        {{{"f", true}, {"g", true}}, {{"V1", {"f"}}, {"V2", {"g"}}}, 2, 0},
        {{{"f", true}}, {{"V1", {"f"}}, {"V2", {"f"}}}, 2, 0},
        {{{"a", true}, {"b", true}, {"c", true}}, {{"V", {"z"}}}, 0, 3},
        {{}, {{"V", {"f"}}}, 0, 0},
    };
    for (std::size_t i = 0; i < cases.size(); ++i) {
        FindingsReport fr;
        for (const auto& [name, flagged] : cases[i].findings) {
            Finding f;
            f.function = name;
            Verdict v;
            v.judge = flagged;
            if (flagged) v.cwe = "CWE-119";
            f.verdict = v;
            fr.findings.push_back(std::move(f));
        }
        ProjectScore s = score_project_level(fr, cases[i].truth);
        EXPECT(s.tp == cases[i].tp && s.fp == cases[i].fp,
               "project case " + std::to_string(i) + ": tp=" + std::to_string(s.tp) +
                   " fp=" + std::to_string(s.fp));
    }
}

} // namespace

int main() {
    std::printf("vulnscout acceptance suite\n");
    run_criterion(1, "call-graph oracle equivalence on randomized projects", 10.0,
                  criterion_callgraph_oracle);
    run_criterion(2, "path-sampling contract on known path counts", 1.0,
                  criterion_path_sampling);
    run_criterion(3, "verdict grammar round-trip and fuzz", 0.0, criterion_verdict_grammar);
    run_criterion(4, "majority voting exhaustive vs tally oracle", 1.0,
                  criterion_majority_vote);
    run_criterion(5, "policy generation size bounds", 0.0, criterion_policy_generation);
    run_criterion(6, "Juliet split fidelity and obfuscation hygiene", 0.0,
                  criterion_juliet_split);
    run_criterion(7, "sanitizer-to-CWE classification table", 0.0,
                  criterion_sanitizer_table);
    run_criterion(8, "dedup equals the quadratic pairwise oracle", 30.0,
                  criterion_dedup_oracle);
    run_criterion(9, "distillation selection contracts", 0.0, criterion_distillation);
    run_criterion(10, "scripted end-to-end scan", 5.0, criterion_end_to_end_scan);
    run_criterion(11, "metrics algebra vs independent tally", 0.0,
                  criterion_metrics_algebra);

    if (failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
}
