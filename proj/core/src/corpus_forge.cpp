#include "vulnscout/corpus_forge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vulnscout/error.hpp"
#include "vulnscout/lexer.hpp"
#include "vulnscout/text.hpp"

namespace vulnscout {

// ---------------------------------------------------------------------------
// sample serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json sample_to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["id"] = s.id;
    j["code"] = s.code;
    j["label"] = s.vulnerable ? *s.cwe : "benign";
    j["language"] = language_name(s.language);
    j["scale"] = s.scale == Scale::function ? "function" : "project";
    j["provenance"] = {{"dataset", s.provenance_dataset}, {"origin", s.provenance_origin}};
    j["context_markers"] = s.context_markers;
    return j;
}

Sample sample_from_json(const nlohmann::json& j) {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.code = j.at("code").get<std::string>();
    std::string label = j.at("label").get<std::string>();
    if (label != "benign") {
        s.vulnerable = true;
        s.cwe = label;
    }
    if (j.contains("language"))
        s.language = language_from_string(j.at("language").get<std::string>())
                         .value_or(Language::c);
    if (j.contains("scale") && j.at("scale") == "project") s.scale = Scale::project;
    if (j.contains("provenance")) {
        s.provenance_dataset = j.at("provenance").value("dataset", "");
        s.provenance_origin = j.at("provenance").value("origin", "");
    }
    s.context_markers = j.value("context_markers", false);
    return s;
}

std::vector<Sample> samples_from_jsonl_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    std::vector<Sample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(sample_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

void samples_to_jsonl_file(const std::vector<Sample>& samples,
                           const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    for (const Sample& s : samples) out << sample_to_json(s).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Juliet guard splitting
// ---------------------------------------------------------------------------

namespace {

enum class GuardKind { omitbad, omitgood, other };

// Directive classification for a single line.
std::optional<std::pair<std::string, std::string>> directive_of(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size() || line[i] != '#') return std::nullopt;
    ++i;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::string word;
    while (i < line.size() && std::isalpha(static_cast<unsigned char>(line[i])))
        word += line[i++];
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::string arg;
    while (i < line.size() && is_ident_char(line[i])) arg += line[i++];
    return std::make_pair(word, arg);
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            lines.emplace_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n')
        lines.pop_back();
    return lines;
}

// One variant: guards of `remove` vanish with their content, guards of
// `unwrap` lose only the guard lines.
std::string strip_variant(const std::vector<std::string>& lines, GuardKind remove,
                          GuardKind unwrap) {
    std::string out;
    std::vector<GuardKind> stack;
    int removing_depth = -1; // stack depth at which removal started

    for (const std::string& line : lines) {
        auto dir = directive_of(line);
        bool emit = removing_depth < 0;
        if (dir) {
            const std::string& word = dir->first;
            const std::string& arg = dir->second;
            if (word == "ifndef" || word == "ifdef" || word == "if") {
                GuardKind kind = GuardKind::other;
                if (word == "ifndef" && arg == "OMITBAD") kind = GuardKind::omitbad;
                if (word == "ifndef" && arg == "OMITGOOD") kind = GuardKind::omitgood;
                stack.push_back(kind);
                if (kind == remove && removing_depth < 0)
                    removing_depth = static_cast<int>(stack.size()) - 1;
                if (kind == remove || kind == unwrap) emit = false;
            } else if (word == "endif") {
                if (stack.empty()) {
                    // a stray #endif belongs to the surrounding file, keep it
                    if (emit) {
                        out += line;
                        out += '\n';
                    }
                    continue;
                }
                GuardKind kind = stack.back();
                stack.pop_back();
                if (kind == remove &&
                    removing_depth == static_cast<int>(stack.size())) {
                    removing_depth = -1;
                    emit = false;
                } else if (kind == remove || kind == unwrap) {
                    emit = false;
                }
            }
        }
        if (emit) {
            out += line;
            out += '\n';
        }
    }
    for (GuardKind kind : stack)
        if (kind == GuardKind::omitbad || kind == GuardKind::omitgood)
            throw Error(Errc::unbalanced_guards, "unterminated OMIT guard");
    return out;
}

} // namespace

JulietSplit split_juliet_c(std::string_view source) {
    std::vector<std::string> lines = split_lines(source);
    JulietSplit out;
    out.benign = strip_variant(lines, GuardKind::omitbad, GuardKind::omitgood);
    out.vulnerable = strip_variant(lines, GuardKind::omitgood, GuardKind::omitbad);
    return out;
}

namespace {

std::string delete_functions_by_keyword(std::string_view source, const char* keyword) {
    FileParse parsed = parse_source(source, "sample.java", Language::java);
    std::vector<std::pair<int, int>> spans;
    for (const FunctionRecord& f : parsed.functions)
        if (contains_ci(f.name, keyword)) spans.emplace_back(f.start_line, f.end_line);

    std::vector<std::string> lines = split_lines(source);
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int ln = static_cast<int>(i) + 1;
        bool deleted = false;
        for (auto [b, e] : spans)
            if (ln >= b && ln <= e) deleted = true;
        if (deleted) continue;
        out += lines[i];
        out += '\n';
    }
    return out;
}

} // namespace

JulietSplit split_juliet_java(std::string_view source) {
    JulietSplit out;
    out.vulnerable = delete_functions_by_keyword(source, "good");
    out.benign = delete_functions_by_keyword(source, "bad");
    return out;
}

// ---------------------------------------------------------------------------
// obfuscation
// ---------------------------------------------------------------------------

namespace {

const char* kLeakKeywords[] = {"good", "bad", "cwe", "g2b"};

bool has_leak_keyword(std::string_view text) {
    for (const char* kw : kLeakKeywords)
        if (contains_ci(text, kw)) return true;
    return false;
}

std::string scrub_literal(std::string_view content) {
    std::string cur(content);
    bool changed = true;
    while (changed) {
        changed = false;
        std::string lower = to_lower(cur);
        for (const char* kw : kLeakKeywords) {
            std::size_t pos = lower.find(kw);
            if (pos != std::string::npos) {
                cur.erase(pos, std::string(kw).size());
                changed = true;
                break;
            }
        }
    }
    return cur;
}

const std::set<std::string> kReservedWords = {
    "if",     "else",   "for",   "while",  "do",     "switch", "case",  "break",
    "return", "int",    "char",  "void",   "long",   "short",  "float", "double",
    "struct", "union",  "enum",  "static", "const",  "sizeof", "class", "public",
    "private", "new",   "delete", "this",  "namespace", "using", "true", "false",
};

class Renamer {
public:
    Renamer(Language lang, std::uint64_t seed, std::set<std::string> taken)
        : lang_(lang), rng_(seed), taken_(std::move(taken)) {}

    const std::string& rename(const std::string& old) {
        auto it = map_.find(old);
        if (it != map_.end()) return it->second;
        std::string fresh;
        do {
            fresh = random_name();
        } while (taken_.count(fresh) || kReservedWords.count(fresh) ||
                 has_leak_keyword(fresh));
        taken_.insert(fresh);
        return map_.emplace(old, std::move(fresh)).first->second;
    }

private:
    std::string random_name() {
        // Java replacements are exactly 7 lowercase letters; other languages
        // get 8 to keep them visually distinct from originals.
        int len = lang_ == Language::java ? 7 : 8;
        std::string out;
        std::uniform_int_distribution<int> dist(0, 25);
        for (int i = 0; i < len; ++i) out += static_cast<char>('a' + dist(rng_));
        return out;
    }

    Language lang_;
    std::mt19937_64 rng_;
    std::set<std::string> taken_;
    std::unordered_map<std::string, std::string> map_;
};

} // namespace

std::string obfuscate(std::string_view source, Language language, std::uint64_t seed) {
    bool python = language == Language::python;

    // collect every identifier, namespace names, and package lines first
    std::set<std::string> all_idents;
    std::set<std::string> namespaces;
    {
        std::size_t i = 0;
        std::string prev;
        while (i < source.size()) {
            char c = source[i];
            if (!python && c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
                while (i < source.size() && source[i] != '\n') ++i;
                continue;
            }
            if (!python && c == '/' && i + 1 < source.size() && source[i + 1] == '*') {
                i += 2;
                while (i + 1 < source.size() && !(source[i] == '*' && source[i + 1] == '/'))
                    ++i;
                i = std::min(i + 2, source.size());
                continue;
            }
            if (python && c == '#') {
                while (i < source.size() && source[i] != '\n') ++i;
                continue;
            }
            if (c == '"' || c == '\'') {
                char q = c;
                ++i;
                while (i < source.size() && source[i] != q) {
                    if (source[i] == '\\') ++i;
                    ++i;
                }
                ++i;
                continue;
            }
            if (is_ident_start(c)) {
                std::string word;
                while (i < source.size() && is_ident_char(source[i])) word += source[i++];
                all_idents.insert(word);
                if (prev == "namespace" && language == Language::cpp)
                    namespaces.insert(word);
                prev = word;
                continue;
            }
            if (!std::isspace(static_cast<unsigned char>(c))) prev.clear();
            ++i;
        }
    }

    Renamer renamer(language, seed, all_idents);

    std::string out;
    out.reserve(source.size());
    std::size_t i = 0;
    bool line_start = true;
    while (i < source.size()) {
        char c = source[i];
        // comments vanish
        if (!python && c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
            while (i < source.size() && source[i] != '\n') ++i;
            continue;
        }
        if (!python && c == '/' && i + 1 < source.size() && source[i + 1] == '*') {
            i += 2;
            while (i + 1 < source.size() && !(source[i] == '*' && source[i + 1] == '/')) ++i;
            i = std::min(i + 2, source.size());
            out += ' ';
            continue;
        }
        if (python && c == '#') {
            while (i < source.size() && source[i] != '\n') ++i;
            continue;
        }
        // Java package declarations are dropped whole
        if (line_start && language == Language::java && source.substr(i, 8) == "package ") {
            while (i < source.size() && source[i] != '\n') ++i;
            if (i < source.size()) ++i; // swallow the newline too
            continue;
        }
        if (c == '"' || c == '\'') {
            char q = c;
            std::size_t start = i;
            ++i;
            while (i < source.size() && source[i] != q) {
                if (source[i] == '\\') ++i;
                ++i;
            }
            if (i < source.size()) ++i;
            std::string_view lit = source.substr(start, i - start);
            std::string_view inner = lit.substr(1, lit.size() >= 2 ? lit.size() - 2 : 0);
            out += q;
            out += scrub_literal(inner);
            out += q;
            line_start = false;
            continue;
        }
        if (is_ident_start(c)) {
            std::string word;
            while (i < source.size() && is_ident_char(source[i])) word += source[i++];
            if (namespaces.count(word)) {
                out += "ns"; // every namespace collapses to one fixed name
            } else if (has_leak_keyword(word)) {
                out += renamer.rename(word);
            } else {
                out += word;
            }
            line_start = false;
            continue;
        }
        out += c;
        line_start = c == '\n';
        ++i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// sanitizer triage
// ---------------------------------------------------------------------------

std::optional<std::string> infer_cwe_from_sanitizer(const SanitizerReport& report) {
    std::string text = to_lower(report.raw_text);
    auto has = [&](const char* s) { return text.find(s) != std::string::npos; };
    if (has("use") && has("free")) return "CWE-416";
    if (has("overflow") && has("write")) return "CWE-787";
    if (has("overflow") && has("read")) return "CWE-125";
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// project sample construction
// ---------------------------------------------------------------------------

Sample build_project_sample(const std::vector<FunctionRecord>& stack_trace_fns,
                            const std::vector<FunctionRecord>& patch_fns,
                            const SampleLabel& label) {
    if (patch_fns.empty()) throw Error(Errc::empty_target, "no patch functions");

    std::set<std::string> target_names;
    for (const FunctionRecord& f : patch_fns) target_names.insert(f.qualified_name);

    std::string code = "// context\n";
    bool first = true;
    for (const FunctionRecord& f : stack_trace_fns) {
        if (target_names.count(f.qualified_name)) continue; // only under target
        if (!first) code += '\n';
        code += f.source_text;
        first = false;
    }
    code += "\n// target function\n";
    first = true;
    for (const FunctionRecord& f : patch_fns) {
        if (!first) code += '\n';
        code += f.source_text;
        first = false;
    }

    Sample s;
    s.code = std::move(code);
    s.vulnerable = label.vulnerable;
    s.cwe = label.cwe;
    s.scale = Scale::project;
    s.context_markers = true;
    return s;
}

std::pair<std::string, std::string> split_context_markers(std::string_view code) {
    const std::string_view ctx_marker = "// context";
    const std::string_view target_marker = "// target function";
    std::size_t cpos = code.find(ctx_marker);
    std::size_t tpos = code.find(target_marker);
    if (cpos == std::string_view::npos || tpos == std::string_view::npos || tpos < cpos)
        return {"", std::string(code)};
    std::size_t ctx_begin = cpos + ctx_marker.size();
    std::string context = trim(code.substr(ctx_begin, tpos - ctx_begin));
    std::string target = trim(code.substr(tpos + target_marker.size()));
    return {context, target};
}

// ---------------------------------------------------------------------------
// n-gram dedup
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> ngram_keys(const std::string& code, int n) {
    std::vector<std::string_view> toks = split_code_tokens(code);
    std::vector<std::string> keys;
    if (static_cast<int>(toks.size()) < n) return keys;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            key += toks[i + static_cast<std::size_t>(k)];
            key += '\x1f';
        }
        keys.push_back(std::move(key));
    }
    return keys;
}

DedupResult dedup_impl(const std::vector<Sample>& samples,
                       std::unordered_map<std::string, std::string> seen, int n) {
    DedupResult result;
    for (const Sample& s : samples) {
        std::vector<std::string> keys = ngram_keys(s.code, n);
        std::string collided_with;
        for (const std::string& key : keys) {
            auto it = seen.find(key);
            if (it != seen.end()) {
                collided_with = it->second;
                break;
            }
        }
        if (!collided_with.empty()) {
            result.dropped.emplace_back(s.id, collided_with);
            continue;
        }
        for (std::string& key : keys) seen.emplace(std::move(key), s.id);
        result.kept.push_back(s);
    }
    return result;
}

} // namespace

DedupResult dedup(const std::vector<Sample>& samples, int n) {
    return dedup_impl(samples, {}, n);
}

DedupResult dedup_against(const std::vector<Sample>& samples,
                          const std::vector<Sample>& reference, int n) {
    std::unordered_map<std::string, std::string> seen;
    for (const Sample& r : reference)
        for (std::string& key : ngram_keys(r.code, n)) seen.emplace(std::move(key), r.id);
    return dedup_impl(samples, std::move(seen), n);
}

// ---------------------------------------------------------------------------
// context sufficiency
// ---------------------------------------------------------------------------

SufficiencyResult check_context_sufficiency(const Sample& sample, Gateway& gateway,
                                            const GenerationParams& params) {
    auto [context, target] = sample.context_markers
                                 ? split_context_markers(sample.code)
                                 : std::make_pair(std::string(), sample.code);
    std::string prompt = render_context_assessment_prompt(context, target);
    std::vector<ChatMessage> messages{{Role::user, prompt, std::nullopt, std::nullopt}};
    Completion c = gateway.complete(messages, params, {}, sample.id + "#sufficiency");

    SufficiencyResult out; // parse failure stays (false, {})
    std::string_view text = c.text;
    std::size_t header = text.rfind("Final Answer");
    if (header == std::string_view::npos) return out;
    std::string_view block = text.substr(header);

    auto line_value = [&](std::string_view tag) -> std::optional<std::string> {
        std::size_t pos = block.find(tag);
        if (pos == std::string_view::npos) return std::nullopt;
        pos += tag.size();
        std::size_t eol = block.find('\n', pos);
        return trim(block.substr(pos, eol == std::string_view::npos ? block.size() - pos
                                                                    : eol - pos));
    };

    auto judge = line_value("#judge:");
    if (!judge) return out;
    std::string j = to_lower(*judge);
    if (j.rfind("yes", 0) != 0 && j.rfind("no", 0) != 0) return out;
    out.sufficient = j.rfind("yes", 0) == 0;

    auto funcs = line_value("#function:");
    if (funcs && to_lower(*funcs) != "n/a") {
        std::string list = *funcs;
        if (!list.empty() && list.front() == '[') list.erase(list.begin());
        if (!list.empty() && list.back() == ']') list.pop_back();
        for (const std::string& part : split(list, ',')) {
            std::string name = trim(part);
            if (!name.empty()) out.needed.push_back(name);
        }
    }
    return out;
}

} // namespace vulnscout
