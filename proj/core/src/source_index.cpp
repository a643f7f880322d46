#include "vulnscout/source_index.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vulnscout/error.hpp"
#include "vulnscout/lexer.hpp"
#include "vulnscout/text.hpp"

namespace fs = std::filesystem;

namespace vulnscout {

std::optional<Language> language_from_string(std::string_view name) {
    std::string n = to_lower(name);
    if (n == "c") return Language::c;
    if (n == "cpp" || n == "c++" || n == "cxx") return Language::cpp;
    if (n == "java") return Language::java;
    if (n == "python" || n == "py") return Language::python;
    return std::nullopt;
}

const char* language_name(Language lang) {
    switch (lang) {
    case Language::c: return "c";
    case Language::cpp: return "cpp";
    case Language::java: return "java";
    case Language::python: return "python";
    }
    return "c";
}

// ---------------------------------------------------------------------------
// normalize_type
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kQualifiers = {
    "const", "volatile", "register", "static", "extern",
    "restrict", "__restrict", "__restrict__", "inline", "final",
};

const std::set<std::string> kBuiltinTypes = {
    "void", "bool", "char", "short", "int", "long", "float", "double",
    "signed", "unsigned", "wchar_t", "char8_t", "char16_t", "char32_t",
    "boolean", "byte", "_Bool",
};

const std::set<std::string> kTagKeywords = {"struct", "union", "enum", "class"};

struct TypeItem {
    std::string text;
    bool is_word = false;
};

std::string collapse_ws(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

} // namespace

std::string normalize_type(std::string_view raw) {
    std::vector<Token> toks = lex_c_family(raw);
    for (const Token& t : toks) {
        if (t.kind == TokKind::string_lit || t.kind == TokKind::char_lit ||
            t.kind == TokKind::preproc || t.text == "(" || t.text == ")") {
            return collapse_ws(raw); // not a plain parameter type
        }
    }

    // Fold tokens into items: ::-qualified names and template argument lists
    // attach to the preceding word.
    std::vector<TypeItem> items;
    int array_groups = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (kQualifiers.count(t.text)) continue;
        if (t.text == "[") {
            int depth = 1;
            while (++i < toks.size() && depth > 0) {
                if (toks[i].text == "[") ++depth;
                if (toks[i].text == "]") --depth;
            }
            --i;
            ++array_groups;
            continue;
        }
        if (t.text == "::" && !items.empty() && items.back().is_word) {
            items.back().text += "::";
            if (i + 1 < toks.size() && toks[i + 1].kind == TokKind::ident) {
                items.back().text += toks[i + 1].text;
                ++i;
            }
            continue;
        }
        if (t.text == "<" && !items.empty() && items.back().is_word) {
            int depth = 1;
            std::string inner = "<";
            while (++i < toks.size() && depth > 0) {
                const std::string& s = toks[i].text;
                if (s == "<") ++depth;
                if (s == ">") --depth;
                if (depth == 0) break;
                if (inner.size() > 1 && is_ident_start(s[0]) &&
                    is_ident_char(inner.back())) {
                    inner += ' ';
                }
                inner += s;
            }
            inner += '>';
            items.back().text += inner;
            continue;
        }
        bool word = t.kind == TokKind::ident || t.kind == TokKind::number;
        items.push_back({t.text, word});
    }

    // Drop a trailing parameter name: last item is a plain identifier that is
    // neither a builtin type keyword nor the tag name right after
    // struct/union/enum/class, and something type-forming precedes it.
    if (items.size() >= 2 && items.back().is_word &&
        !kBuiltinTypes.count(items.back().text) &&
        !kTagKeywords.count(items.back().text)) {
        const TypeItem& prev = items[items.size() - 2];
        bool prev_is_tag = prev.is_word && kTagKeywords.count(prev.text) > 0;
        if (!prev_is_tag) items.pop_back();
    }

    std::string out;
    for (const TypeItem& item : items) {
        if (item.is_word) {
            if (!out.empty() && is_ident_char(out.back())) out += ' ';
            out += item.text;
        } else {
            out += item.text; // *, &, && glue directly
        }
    }
    for (int k = 0; k < array_groups; ++k) out += "[]";
    return out;
}

// ---------------------------------------------------------------------------
// C / C++ / Java parsing
// ---------------------------------------------------------------------------

namespace {

struct ParseFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::set<std::string> kControlKeywords = {
    "if", "for", "while", "switch", "return", "sizeof", "catch", "do",
    "else", "goto", "case", "throw", "alignof", "typeid", "decltype",
    "static_assert", "synchronized", "assert_cast",
};

const std::set<std::string> kPostParenAllowed = {
    "const", "noexcept", "override", "final", "mutable", "throws", "throw",
    "volatile", "__attribute__", "default",
};

struct FpVar {
    std::vector<std::string> param_sig;
    bool has_sig = false;
};

struct BodyEnv {
    std::unordered_map<std::string, std::string> locals; // name -> normalized type
    std::unordered_map<std::string, FpVar> fp_vars;
    std::set<std::string> assigned_from_ident; // lhs of `x = someident;`
};

class CFamilyParser {
public:
    CFamilyParser(std::string_view content, std::string rel_path, Language lang)
        : rel_path_(std::move(rel_path)), lang_(lang) {
        toks_ = lex_c_family(content);
        std::size_t start = 0;
        for (std::size_t i = 0; i <= content.size(); ++i) {
            if (i == content.size() || content[i] == '\n') {
                lines_.emplace_back(content.substr(start, i - start));
                start = i + 1;
            }
        }
    }

    FileParse run() {
        collect_file_scope_fp_decls();
        std::size_t i = 0;
        while (i < toks_.size()) i = step(i);
        if (!scope_.empty()) throw ParseFailure("unbalanced braces at end of file");
        return std::move(result_);
    }

private:
    struct Scope {
        enum Kind { ns, cls, other } kind;
        std::string name;
    };

    const Token& tok(std::size_t i) const { return toks_[i]; }
    bool is(std::size_t i, std::string_view s) const {
        return i < toks_.size() && toks_[i].text == s;
    }
    bool is_ident(std::size_t i) const {
        return i < toks_.size() && toks_[i].kind == TokKind::ident;
    }

    std::size_t match_forward(std::size_t open, const char* o, const char* c) const {
        int depth = 0;
        for (std::size_t i = open; i < toks_.size(); ++i) {
            if (toks_[i].kind == TokKind::punct) {
                if (toks_[i].text == o) ++depth;
                else if (toks_[i].text == c) {
                    if (--depth == 0) return i;
                }
            }
        }
        throw ParseFailure(std::string("unbalanced '") + o + "'");
    }

    std::size_t step(std::size_t i) {
        const Token& t = tok(i);
        if (t.kind == TokKind::preproc) return i + 1;
        if (t.kind == TokKind::punct) {
            if (t.text == "}") {
                if (!scope_.empty()) scope_.pop_back();
                return i + 1;
            }
            if (t.text == "{") {
                // Unclassified brace at definition scope (e.g. an aggregate
                // initializer): skip the balanced block.
                return match_forward(i, "{", "}") + 1;
            }
            return i + 1;
        }
        if (t.kind != TokKind::ident) return i + 1;

        if (lang_ == Language::cpp && t.text == "namespace") return handle_namespace(i);
        if (t.text == "extern" && i + 1 < toks_.size() &&
            toks_[i + 1].kind == TokKind::string_lit) {
            if (is(i + 2, "{")) {
                scope_.push_back({Scope::ns, ""});
                return i + 3;
            }
            return i + 2;
        }
        if (is_class_intro(t.text)) {
            std::size_t next = try_enter_class(i);
            if (next != i) return next;
        }
        if (t.text == "enum" && lang_ != Language::java) {
            std::size_t next = skip_enum(i);
            if (next != i) return next;
        }
        if (t.text == "typedef") {
            // typedef ... ; (may contain a braced struct body)
            std::size_t j = i + 1;
            while (j < toks_.size() && !is(j, ";")) {
                if (is(j, "{")) j = match_forward(j, "{", "}");
                ++j;
            }
            return j + 1;
        }

        // Function definition candidate.
        std::size_t after = try_function(i);
        if (after != i) return after;
        return i + 1;
    }

    bool is_class_intro(const std::string& kw) const {
        if (lang_ == Language::java)
            return kw == "class" || kw == "interface" || kw == "enum" || kw == "record";
        if (lang_ == Language::cpp) return kw == "class" || kw == "struct" || kw == "union";
        return false; // plain C struct bodies hold no methods
    }

    std::size_t handle_namespace(std::size_t i) {
        std::size_t j = i + 1;
        std::string name;
        while (is_ident(j)) {
            if (!name.empty()) name += "::";
            name += tok(j).text;
            ++j;
            if (is(j, "::")) ++j;
            else break;
        }
        if (is(j, "{")) {
            scope_.push_back({Scope::ns, name});
            return j + 1;
        }
        return i + 1; // namespace alias / using-directive
    }

    std::size_t try_enter_class(std::size_t i) {
        std::string name;
        std::size_t j = i + 1;
        while (j < toks_.size()) {
            const Token& t = tok(j);
            if (t.kind == TokKind::punct &&
                (t.text == ";" || t.text == "(" || t.text == "=" || t.text == ")"))
                return i; // forward decl, return type, etc.
            if (t.kind == TokKind::punct && t.text == "{") {
                scope_.push_back({Scope::cls, name});
                return j + 1;
            }
            if (t.kind == TokKind::ident && name.empty() &&
                !kQualifiers.count(t.text) && t.text != "alignas" &&
                t.text != "extends" && t.text != "implements" && t.text != "public" &&
                t.text != "abstract")
                name = t.text;
            if (t.kind == TokKind::punct && t.text == "<")
                j = match_forward(j, "<", ">");
            ++j;
        }
        return i;
    }

    std::size_t skip_enum(std::size_t i) {
        std::size_t j = i + 1;
        while (j < toks_.size()) {
            const Token& t = tok(j);
            if (t.kind == TokKind::punct) {
                if (t.text == ";" || t.text == "(") return i;
                if (t.text == "{") return match_forward(j, "{", "}") + 1;
            }
            ++j;
        }
        return i;
    }

    // Attempts to parse a function definition whose name chain starts at or
    // after i. Returns the index just past the body on success, i otherwise.
    std::size_t try_function(std::size_t i) {
        if (kControlKeywords.count(tok(i).text)) return i;

        // Find the '(' starting a parameter list with this token as (part of)
        // the declarator. We only look at the immediate `name (` shape plus
        // qualification; anything else falls through to the scanner.
        std::size_t name_idx = i;
        std::size_t j = i + 1;
        std::string explicit_qual;
        if (tok(i).text == "operator") {
            while (j < toks_.size() && !is(j, "(")) ++j;
            if (j >= toks_.size()) return i;
        } else {
            // follow `A::B::name` chains
            while (is(j, "::") && is_ident(j + 1)) {
                explicit_qual += tok(name_idx).text;
                explicit_qual += "::";
                name_idx = j + 1;
                j = name_idx + 1;
            }
            if (!is(j, "(")) return i;
            if (kControlKeywords.count(tok(name_idx).text)) return i;
        }

        std::size_t open = j;
        std::size_t close;
        try {
            close = match_forward(open, "(", ")");
        } catch (const ParseFailure&) {
            return i;
        }

        std::size_t body_open = find_body_brace(close + 1);
        if (body_open == 0) return i;

        std::size_t body_close;
        body_close = match_forward(body_open, "{", "}");

        std::size_t decl_start = walk_declaration_start(i);
        if (decl_start == i && i > 0) {
            // A bare `name(...)` with no return type is a definition only when
            // it sits right after a scope boundary (constructors, old C).
            const Token& p = toks_[i - 1];
            bool boundary = p.kind == TokKind::preproc ||
                            (p.kind == TokKind::punct &&
                             (p.text == ";" || p.text == "}" || p.text == "{"));
            if (!boundary) return i;
        }

        FunctionRecord rec;
        rec.name = function_name(name_idx);
        rec.file = rel_path_;
        rec.start_line = tok(decl_start).line;
        rec.end_line = tok(body_close).line;
        rec.qualified_name = qualify(explicit_qual, rec.name);
        rec.source_text = slice_lines(rec.start_line, rec.end_line);

        BodyEnv env;
        seed_file_scope_fp(env);
        rec.param_sig = parse_params(open, close, env);

        result_.functions.push_back(rec);
        scan_body(rec.qualified_name, body_open, body_close, env);
        return body_close + 1;
    }

    std::string function_name(std::size_t name_idx) const {
        std::string name = tok(name_idx).text;
        if (name_idx > 0 && toks_[name_idx - 1].text == "~") return "~" + name;
        if (name == "operator") {
            std::string full = name;
            for (std::size_t k = name_idx + 1; k < toks_.size() && !is(k, "("); ++k)
                full += tok(k).text;
            return full;
        }
        return name;
    }

    // Scan forward from just past ')' over trailing specifiers, ctor
    // initializers and Java throws clauses. Returns the body '{' index, or 0
    // if this is not a definition.
    std::size_t find_body_brace(std::size_t j) {
        while (j < toks_.size()) {
            const Token& t = tok(j);
            if (t.kind == TokKind::preproc) {
                ++j;
                continue;
            }
            if (t.kind == TokKind::punct) {
                if (t.text == "{") return j;
                if (t.text == ";" || t.text == "=") return 0;
                if (t.text == ":") {
                    if (lang_ != Language::cpp) return 0;
                    return body_after_ctor_init(j + 1);
                }
                if (t.text == "(") {
                    j = match_forward(j, "(", ")") + 1;
                    continue;
                }
                if (t.text == "<") {
                    j = match_forward(j, "<", ">") + 1;
                    continue;
                }
                if (t.text == "[") {
                    j = match_forward(j, "[", "]") + 1;
                    continue;
                }
                if (t.text == "->" || t.text == "," || t.text == "&" ||
                    t.text == "&&" || t.text == "*" || t.text == "::") {
                    ++j;
                    continue;
                }
                return 0;
            }
            if (t.kind == TokKind::ident || t.kind == TokKind::number ||
                t.kind == TokKind::string_lit) {
                ++j;
                continue;
            }
            return 0;
        }
        return 0;
    }

    // Constructor initializer list: `name(…)` or `name{…}` items separated by
    // commas; the brace after the last item is the body.
    std::size_t body_after_ctor_init(std::size_t j) {
        while (j < toks_.size()) {
            bool had_name = false;
            while (is_ident(j) || is(j, "::") || is(j, "~")) {
                had_name = had_name || is_ident(j);
                ++j;
            }
            if (is(j, "<")) j = match_forward(j, "<", ">") + 1;
            if (!had_name) return 0;
            if (is(j, "(")) j = match_forward(j, "(", ")") + 1;
            else if (is(j, "{")) j = match_forward(j, "{", "}") + 1;
            else return 0;
            if (is(j, ",")) {
                ++j;
                continue;
            }
            while (j < toks_.size() && toks_[j].kind == TokKind::preproc) ++j;
            if (is(j, "{")) return j;
            return 0;
        }
        return 0;
    }

    // Walk backwards from the start of the name chain over return type and
    // specifier tokens to the first token of the declaration.
    std::size_t walk_declaration_start(std::size_t i) {
        std::size_t start = i;
        std::size_t k = i;
        while (k > 0) {
            const Token& p = toks_[k - 1];
            if (p.kind == TokKind::preproc) break;
            if (p.kind == TokKind::ident) {
                if (kControlKeywords.count(p.text)) break;
                start = --k;
                continue;
            }
            if (p.kind == TokKind::punct) {
                const std::string& s = p.text;
                if (s == "*" || s == "&" || s == "&&" || s == "::" || s == "~") {
                    start = --k;
                    continue;
                }
                if (s == ">") {
                    // template argument close: match back, and keep going only
                    // if the group belongs to a name or template header
                    int depth = 1;
                    std::size_t m = k - 1;
                    while (m > 0 && depth > 0) {
                        --m;
                        if (toks_[m].text == ">") ++depth;
                        if (toks_[m].text == "<") --depth;
                    }
                    if (depth != 0 || m == 0) break;
                    if (toks_[m - 1].kind != TokKind::ident) break;
                    start = k = m - 1;
                    continue;
                }
                if (s == "]") {
                    int depth = 1;
                    std::size_t m = k - 1;
                    while (m > 0 && depth > 0) {
                        --m;
                        if (toks_[m].text == "]") ++depth;
                        if (toks_[m].text == "[") --depth;
                    }
                    if (depth != 0) break;
                    start = k = m;
                    continue;
                }
                if (s == "@" && lang_ == Language::java) {
                    start = --k;
                    continue;
                }
                break;
            }
            break;
        }
        return start;
    }

    std::string qualify(const std::string& explicit_qual, const std::string& name) const {
        std::string sep = lang_ == Language::java ? "." : "::";
        std::string prefix;
        for (const Scope& s : scope_) {
            if (s.name.empty()) continue;
            prefix += s.name;
            prefix += sep;
        }
        if (!explicit_qual.empty()) {
            std::string q = explicit_qual;
            if (lang_ == Language::java) {
                for (std::size_t p = 0; (p = q.find("::", p)) != std::string::npos;)
                    q.replace(p, 2, ".");
            }
            prefix += q;
        }
        return prefix + name;
    }

    std::string slice_lines(int start_line, int end_line) const {
        std::string out;
        for (int ln = start_line; ln <= end_line && ln <= static_cast<int>(lines_.size()); ++ln) {
            if (ln > start_line) out += '\n';
            out += lines_[static_cast<std::size_t>(ln - 1)];
        }
        return out;
    }

    std::vector<std::string> parse_params(std::size_t open, std::size_t close, BodyEnv& env) {
        std::vector<std::string> sig;
        if (close == open + 1) return sig;
        std::size_t start = open + 1;
        int depth = 0;
        for (std::size_t k = open + 1; k <= close; ++k) {
            const std::string& s = tok(k).text;
            if (tok(k).kind == TokKind::punct) {
                if (s == "(" || s == "[" || s == "{" || s == "<") ++depth;
                if (s == ")" || s == "]" || s == "}" || s == ">") --depth;
            }
            bool at_end = k == close;
            if ((s == "," && depth == 0 && !at_end) || (at_end && k > start)) {
                std::size_t stop = at_end ? k : k;
                handle_param(start, stop, sig, env);
                start = k + 1;
            }
        }
        if (sig.size() == 1 && sig[0] == "void") sig.clear();
        return sig;
    }

    void handle_param(std::size_t start, std::size_t stop, std::vector<std::string>& sig,
                      BodyEnv& env) {
        // function-pointer parameter: ret (*name)(args)
        for (std::size_t k = start; k + 3 < stop; ++k) {
            if (is(k, "(") && is(k + 1, "*") && is_ident(k + 2) && is(k + 3, ")") &&
                is(k + 4, "(")) {
                std::size_t aclose = match_forward(k + 4, "(", ")");
                FpVar fp;
                fp.param_sig = parse_sig_range(k + 5, aclose);
                fp.has_sig = true;
                env.fp_vars[tok(k + 2).text] = fp;
                sig.push_back(raw_range_normalized(start, stop));
                return;
            }
        }
        std::string raw = raw_range(start, stop);
        std::string norm = normalize_type(raw);
        if (!norm.empty()) sig.push_back(norm);
        // remember `name -> type` for argument classification
        if (stop > start + 1 && is_ident(stop - 1)) {
            const std::string& name = tok(stop - 1).text;
            if (!kBuiltinTypes.count(name)) env.locals[name] = norm;
        }
    }

    std::vector<std::string> parse_sig_range(std::size_t start, std::size_t stop) {
        std::vector<std::string> sig;
        std::size_t s = start;
        int depth = 0;
        for (std::size_t k = start; k <= stop; ++k) {
            const std::string& t = tok(k).text;
            if (tok(k).kind == TokKind::punct) {
                if (t == "(" || t == "[" || t == "<") ++depth;
                if (t == ")" || t == "]" || t == ">") --depth;
            }
            if ((t == "," && depth == 0 && k < stop) || k == stop) {
                if (k > s) {
                    std::string norm = normalize_type(raw_range(s, k));
                    if (!norm.empty() && norm != "void") sig.push_back(norm);
                }
                s = k + 1;
            }
        }
        return sig;
    }

    std::string raw_range(std::size_t start, std::size_t stop) const {
        std::string out;
        for (std::size_t k = start; k < stop; ++k) {
            if (!out.empty()) out += ' ';
            out += tok(k).text;
        }
        return out;
    }

    std::string raw_range_normalized(std::size_t start, std::size_t stop) const {
        return collapse_ws(raw_range(start, stop));
    }

    void seed_file_scope_fp(BodyEnv& env) const {
        for (const auto& [name, fp] : file_fp_) env.fp_vars[name] = fp;
    }

    void collect_file_scope_fp_decls() {
        int depth = 0;
        for (std::size_t k = 0; k + 4 < toks_.size(); ++k) {
            const Token& t = toks_[k];
            if (t.kind == TokKind::punct) {
                if (t.text == "{") ++depth;
                if (t.text == "}") --depth;
            }
            if (depth != 0) continue;
            if (is(k, "(") && is(k + 1, "*") && is_ident(k + 2) && is(k + 3, ")") &&
                is(k + 4, "(")) {
                std::size_t aclose;
                try {
                    aclose = match_forward(k + 4, "(", ")");
                } catch (const ParseFailure&) {
                    continue;
                }
                FpVar fp;
                fp.param_sig = parse_sig_range(k + 5, aclose);
                fp.has_sig = true;
                file_fp_[tok(k + 2).text] = fp;
            }
        }
    }

    // -----------------------------------------------------------------------
    // body scan: call sites, local declarations, fp assignments
    // -----------------------------------------------------------------------

    void scan_body(const std::string& caller, std::size_t body_open, std::size_t body_close,
                   BodyEnv env) {
        bool stmt_start = true;
        for (std::size_t k = body_open + 1; k < body_close; ++k) {
            const Token& t = tok(k);
            if (t.kind == TokKind::preproc) {
                stmt_start = true;
                continue;
            }
            if (t.kind == TokKind::punct) {
                stmt_start = t.text == ";" || t.text == "{" || t.text == "}";
                // (*fp)(args)
                if (t.text == "(" && is(k + 1, "*") && is_ident(k + 2) && is(k + 3, ")") &&
                    is(k + 4, "(")) {
                    record_fp_call(caller, tok(k + 2).text, k + 4, env);
                    k = match_forward(k + 4, "(", ")");
                    stmt_start = false;
                }
                continue;
            }
            if (t.kind != TokKind::ident) {
                stmt_start = false;
                continue;
            }

            if (stmt_start) {
                std::size_t consumed = try_local_decl(k, env);
                if (consumed != k) {
                    k = consumed - 1;
                    stmt_start = false;
                    continue;
                }
            }
            // assignment `name = ident ;` / `name = & ident ;`
            if (is(k + 1, "=")) {
                std::size_t r = k + 2;
                if (is(r, "&")) ++r;
                if (is_ident(r) && (is(r + 1, ";") || is(r + 1, ","))) {
                    env.assigned_from_ident.insert(tok(k).text);
                }
                stmt_start = false;
                continue;
            }
            // call `name (`
            if (is(k + 1, "(") && !kControlKeywords.count(t.text)) {
                if (env.fp_vars.count(t.text) || env.assigned_from_ident.count(t.text)) {
                    record_fp_call(caller, t.text, k + 1, env);
                } else {
                    record_direct_call(caller, t.text, k + 1, env);
                }
                // keep scanning inside the argument list for nested calls
            }
            stmt_start = false;
        }
    }

    // Simple declarations: `type tokens name ;` / `type tokens name = ...` /
    // fp declarations `ret (*name)(args)`. Returns index past what was
    // consumed as the declarator prefix (not the whole statement), or k.
    std::size_t try_local_decl(std::size_t k, BodyEnv& env) {
        // fp declaration first
        std::size_t p = k;
        while (is_ident(p) || is(p, "*") || is(p, "::")) ++p;
        if (p > k && is(p, "(") && is(p + 1, "*") && is_ident(p + 2) && is(p + 3, ")") &&
            is(p + 4, "(")) {
            std::size_t aclose;
            try {
                aclose = match_forward(p + 4, "(", ")");
            } catch (const ParseFailure&) {
                return k;
            }
            FpVar fp;
            fp.param_sig = parse_sig_range(p + 5, aclose);
            fp.has_sig = true;
            env.fp_vars[tok(p + 2).text] = fp;
            return aclose + 1;
        }

        // plain declaration needs >= 2 words: type... name
        std::size_t q = k;
        std::size_t words = 0;
        std::size_t last_ident = 0;
        while (q < toks_.size()) {
            const Token& t = tok(q);
            if (t.kind == TokKind::ident && !kControlKeywords.count(t.text)) {
                ++words;
                last_ident = q;
                ++q;
                continue;
            }
            if (t.kind == TokKind::punct && (t.text == "*" || t.text == "&" || t.text == "::")) {
                ++q;
                continue;
            }
            break;
        }
        if (words < 2 || last_ident + 1 != q) return k;
        const Token& after = tok(q);
        bool decl_end = after.kind == TokKind::punct &&
                        (after.text == ";" || after.text == "=" || after.text == "," ||
                         after.text == "[");
        if (!decl_end) return k;
        std::string type_raw = raw_range(k, last_ident);
        env.locals[tok(last_ident).text] = normalize_type(type_raw);
        return q;
    }

    void record_direct_call(const std::string& caller, const std::string& callee,
                            std::size_t open, const BodyEnv& env) {
        CallSiteRecord cs;
        cs.caller = caller;
        cs.callee_name = callee;
        cs.file = rel_path_;
        cs.line = tok(open).line;
        fill_args(open, env, cs, nullptr);
        result_.call_sites.push_back(std::move(cs));
    }

    void record_fp_call(const std::string& caller, const std::string& var, std::size_t open,
                        const BodyEnv& env) {
        CallSiteRecord cs;
        cs.caller = caller;
        cs.callee_name = kFunctionPointer;
        cs.file = rel_path_;
        cs.line = tok(open).line;
        const FpVar* fp = nullptr;
        auto it = env.fp_vars.find(var);
        if (it != env.fp_vars.end() && it->second.has_sig) fp = &it->second;
        fill_args(open, env, cs, fp);
        result_.call_sites.push_back(std::move(cs));
    }

    void fill_args(std::size_t open, const BodyEnv& env, CallSiteRecord& cs, const FpVar* fp) {
        std::size_t close;
        try {
            close = match_forward(open, "(", ")");
        } catch (const ParseFailure&) {
            return;
        }
        std::vector<std::pair<std::size_t, std::size_t>> args;
        if (close > open + 1) {
            std::size_t s = open + 1;
            int depth = 0;
            for (std::size_t k = open + 1; k <= close; ++k) {
                const std::string& t = tok(k).text;
                if (tok(k).kind == TokKind::punct) {
                    if (t == "(" || t == "[" || t == "{") ++depth;
                    if (t == ")" || t == "]" || t == "}") --depth;
                }
                if ((t == "," && depth == 0 && k < close) || k == close) {
                    args.emplace_back(s, k);
                    s = k + 1;
                }
            }
        }
        cs.arg_count = static_cast<int>(args.size());
        if (fp && fp->param_sig.size() == args.size()) {
            cs.arg_sig = fp->param_sig; // declared pointer signature wins
            return;
        }
        for (auto [s, e] : args) cs.arg_sig.push_back(classify_arg(s, e, env));
    }

    std::string classify_arg(std::size_t start, std::size_t stop, const BodyEnv& env) const {
        if (stop == start + 1) {
            const Token& t = tok(start);
            if (t.kind == TokKind::number) {
                bool floaty = t.text.find('.') != std::string::npos ||
                              ((t.text.find('e') != std::string::npos ||
                                t.text.find('E') != std::string::npos) &&
                               t.text.rfind("0x", 0) != 0 && t.text.rfind("0X", 0) != 0);
                return floaty ? "double" : "int";
            }
            if (t.kind == TokKind::string_lit) return "char*";
            if (t.kind == TokKind::char_lit) return "char";
            if (t.kind == TokKind::ident) {
                auto it = env.locals.find(t.text);
                if (it != env.locals.end()) return it->second;
                return "?";
            }
        }
        if (stop == start + 2 && is(start, "&") && is_ident(start + 1)) {
            auto it = env.locals.find(tok(start + 1).text);
            if (it != env.locals.end()) return it->second + "*";
            return "?";
        }
        if (stop == start + 2 && is(start, "*") && is_ident(start + 1)) {
            auto it = env.locals.find(tok(start + 1).text);
            if (it != env.locals.end() && !it->second.empty() && it->second.back() == '*')
                return it->second.substr(0, it->second.size() - 1);
            return "?";
        }
        return "?";
    }

    std::string rel_path_;
    Language lang_;
    std::vector<Token> toks_;
    std::vector<std::string> lines_;
    std::vector<Scope> scope_;
    std::unordered_map<std::string, FpVar> file_fp_;
    FileParse result_;
};

// ---------------------------------------------------------------------------
// Python (parse-and-index only)
// ---------------------------------------------------------------------------

int indent_of(const std::string& line) {
    int n = 0;
    for (char c : line) {
        if (c == ' ') ++n;
        else if (c == '\t') n += 8;
        else break;
    }
    return n;
}

bool blank_or_comment(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

FileParse parse_python(std::string_view content, const std::string& rel_path) {
    FileParse out;
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= content.size(); ++i) {
        if (i == content.size() || content[i] == '\n') {
            lines.emplace_back(content.substr(start, i - start));
            start = i + 1;
        }
    }

    struct Ctx {
        int indent;
        std::string name;
    };
    std::vector<Ctx> classes;

    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const std::string& line = lines[ln];
        if (blank_or_comment(line)) continue;
        int ind = indent_of(line);
        while (!classes.empty() && ind <= classes.back().indent) classes.pop_back();

        std::string body = trim(line);
        if (body.rfind("class ", 0) == 0) {
            std::string name;
            for (std::size_t k = 6; k < body.size() && is_ident_char(body[k]); ++k)
                name += body[k];
            classes.push_back({ind, name});
            continue;
        }
        bool is_def = body.rfind("def ", 0) == 0 || body.rfind("async def ", 0) == 0;
        if (!is_def) continue;

        std::size_t name_pos = body.rfind("def ", 0) == 0 ? 4 : 10;
        std::string name;
        while (name_pos < body.size() && is_ident_char(body[name_pos]))
            name += body[name_pos++];

        // parameters between the first '(' and its match on this or following lines
        std::string sig_text;
        int depth = 0;
        bool started = false;
        std::size_t end_ln = ln;
        for (std::size_t l2 = ln; l2 < lines.size() && !(started && depth == 0); ++l2) {
            for (char c : lines[l2]) {
                if (c == '(') {
                    ++depth;
                    started = true;
                    continue;
                }
                if (c == ')') {
                    --depth;
                    if (started && depth == 0) break;
                    continue;
                }
                if (started && depth > 0) sig_text += c;
            }
            end_ln = l2;
        }
        std::vector<std::string> params;
        int pd = 0;
        std::string cur;
        for (char c : sig_text) {
            if (c == '[' || c == '(' || c == '{') ++pd;
            if (c == ']' || c == ')' || c == '}') --pd;
            if (c == ',' && pd == 0) {
                params.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) params.push_back(cur);

        FunctionRecord rec;
        rec.name = name;
        rec.file = rel_path;
        rec.start_line = static_cast<int>(ln) + 1;
        for (const std::string& p : params) {
            std::string pt = trim(p);
            auto colon = pt.find(':');
            auto eq = pt.find('=');
            if (colon != std::string::npos && (eq == std::string::npos || colon < eq)) {
                std::string ann = pt.substr(colon + 1, eq == std::string::npos
                                                           ? std::string::npos
                                                           : eq - colon - 1);
                rec.param_sig.push_back(collapse_ws(trim(ann)));
            } else {
                rec.param_sig.push_back("any");
            }
        }

        // block extent: lines more indented than the def, trailing blanks trimmed
        std::size_t last = end_ln;
        for (std::size_t l2 = end_ln + 1; l2 < lines.size(); ++l2) {
            if (blank_or_comment(lines[l2])) continue;
            if (indent_of(lines[l2]) <= ind) break;
            last = l2;
        }
        rec.end_line = static_cast<int>(last) + 1;
        std::string qual;
        for (const Ctx& c : classes) qual += c.name + ".";
        rec.qualified_name = qual + name;
        std::string text;
        for (std::size_t l2 = ln; l2 <= last; ++l2) {
            if (l2 > ln) text += '\n';
            text += lines[l2];
        }
        rec.source_text = std::move(text);
        out.functions.push_back(std::move(rec));
        ln = last;
    }
    return out;
}

std::vector<std::string> extensions_for(Language lang) {
    switch (lang) {
    case Language::c: return {".c", ".h"};
    case Language::cpp: return {".cpp", ".cc", ".cxx", ".hpp", ".hh", ".hxx", ".h", ".ipp"};
    case Language::java: return {".java"};
    case Language::python: return {".py"};
    }
    return {};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

FileParse parse_source(std::string_view content, const std::string& rel_path, Language lang) {
    if (lang == Language::python) return parse_python(content, rel_path);
    CFamilyParser parser(content, rel_path, lang);
    return parser.run();
}

// ---------------------------------------------------------------------------
// project driver
// ---------------------------------------------------------------------------

ProjectIndex parse_project(const fs::path& root, Language lang) {
    if (!fs::exists(root)) throw Error(Errc::root_not_found, root.string());

    std::vector<std::string> exts = extensions_for(lang);
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        if (std::find(exts.begin(), exts.end(), ext) != exts.end())
            files.push_back(entry.path());
    }
    if (files.empty()) throw Error(Errc::no_sources_found, root.string());

    std::vector<std::string> rels(files.size());
    for (std::size_t i = 0; i < files.size(); ++i)
        rels[i] = fs::relative(files[i], root).generic_string();
    std::vector<std::size_t> order(files.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return rels[a] < rels[b]; });

    struct Slot {
        FileParse parsed;
        std::string content;
        std::string error;
        bool failed = false;
    };
    std::vector<Slot> slots(files.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= order.size()) return;
            std::size_t idx = order[k];
            Slot& slot = slots[idx];
            try {
                slot.content = read_file(files[idx]);
                slot.parsed = parse_source(slot.content, rels[idx], lang);
            } catch (const std::exception& e) {
                slot.failed = true;
                slot.error = e.what();
            }
        }
    };
    unsigned n_threads = std::min<unsigned>(std::thread::hardware_concurrency(),
                                            static_cast<unsigned>(files.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ProjectIndex index;
    index.root = root.generic_string();
    index.language = lang;
    for (std::size_t k : order) {
        Slot& slot = slots[k];
        if (slot.failed) {
            index.skipped.push_back({rels[k], slot.error});
            continue;
        }
        for (auto& f : slot.parsed.functions) index.functions.push_back(std::move(f));
        for (auto& c : slot.parsed.call_sites) index.call_sites.push_back(std::move(c));
    }

    // address-taken pass: any use of a defined function name not immediately
    // followed by '(' counts
    if (lang != Language::python) {
        std::set<std::string> names;
        for (const auto& f : index.functions) names.insert(f.name);
        std::set<std::string> taken;
        for (std::size_t k : order) {
            const Slot& slot = slots[k];
            if (slot.failed) continue;
            std::vector<Token> toks = lex_c_family(slot.content);
            for (std::size_t i = 0; i < toks.size(); ++i) {
                if (toks[i].kind != TokKind::ident || !names.count(toks[i].text)) continue;
                bool followed_by_call = i + 1 < toks.size() && toks[i + 1].text == "(";
                if (!followed_by_call) taken.insert(toks[i].text);
            }
        }
        for (auto& f : index.functions)
            if (taken.count(f.name)) f.is_address_taken = true;
    }

    std::sort(index.functions.begin(), index.functions.end(),
              [](const FunctionRecord& a, const FunctionRecord& b) {
                  return std::tie(a.file, a.start_line, a.qualified_name) <
                         std::tie(b.file, b.start_line, b.qualified_name);
              });
    std::sort(index.call_sites.begin(), index.call_sites.end(),
              [](const CallSiteRecord& a, const CallSiteRecord& b) {
                  return std::tie(a.file, a.line, a.callee_name) <
                         std::tie(b.file, b.line, b.callee_name);
              });
    index.rebuild_lookup();
    return index;
}

void ProjectIndex::rebuild_lookup() {
    qualified_lookup_.clear();
    name_lookup_.clear();
    for (std::size_t i = 0; i < functions.size(); ++i) {
        qualified_lookup_.emplace(functions[i].qualified_name, i);
        name_lookup_[functions[i].name].push_back(i);
        if (functions[i].qualified_name != functions[i].name)
            name_lookup_[functions[i].qualified_name].push_back(i);
    }
}

const FunctionRecord* ProjectIndex::by_qualified_name(std::string_view qname) const {
    auto it = qualified_lookup_.find(std::string(qname));
    return it == qualified_lookup_.end() ? nullptr : &functions[it->second];
}

std::vector<const FunctionRecord*> ProjectIndex::by_name(std::string_view name) const {
    std::vector<const FunctionRecord*> out;
    auto it = name_lookup_.find(std::string(name));
    if (it == name_lookup_.end()) return out;
    for (std::size_t idx : it->second) out.push_back(&functions[idx]);
    std::sort(out.begin(), out.end(), [](const FunctionRecord* a, const FunctionRecord* b) {
        return std::tie(a->file, a->start_line) < std::tie(b->file, b->start_line);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<const FunctionRecord*> get_function_definition(const ProjectIndex& index,
                                                           std::string_view name) {
    return index.by_name(name);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json index_to_json(const ProjectIndex& index) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["root"] = index.root;
    j["language"] = language_name(index.language);
    auto& funcs = j["functions"] = nlohmann::ordered_json::array();
    for (const auto& f : index.functions) {
        funcs.push_back({{"name", f.name},
                         {"qualified_name", f.qualified_name},
                         {"file", f.file},
                         {"start_line", f.start_line},
                         {"end_line", f.end_line},
                         {"source_text", f.source_text},
                         {"param_sig", f.param_sig},
                         {"is_address_taken", f.is_address_taken}});
    }
    auto& sites = j["call_sites"] = nlohmann::ordered_json::array();
    for (const auto& c : index.call_sites) {
        sites.push_back({{"caller", c.caller},
                         {"callee_name", c.callee_name},
                         {"arg_count", c.arg_count},
                         {"arg_sig", c.arg_sig},
                         {"file", c.file},
                         {"line", c.line}});
    }
    auto& skipped = j["skipped"] = nlohmann::ordered_json::array();
    for (const auto& s : index.skipped)
        skipped.push_back({{"file", s.file}, {"reason", s.reason}});
    return j;
}

ProjectIndex index_from_json(const nlohmann::ordered_json& j) {
    ProjectIndex index;
    index.root = j.at("root").get<std::string>();
    auto lang = language_from_string(j.at("language").get<std::string>());
    if (!lang) throw Error(Errc::io, "unknown language in index cache");
    index.language = *lang;
    for (const auto& f : j.at("functions")) {
        FunctionRecord rec;
        rec.name = f.at("name").get<std::string>();
        rec.qualified_name = f.at("qualified_name").get<std::string>();
        rec.file = f.at("file").get<std::string>();
        rec.start_line = f.at("start_line").get<int>();
        rec.end_line = f.at("end_line").get<int>();
        rec.source_text = f.at("source_text").get<std::string>();
        rec.param_sig = f.at("param_sig").get<std::vector<std::string>>();
        rec.is_address_taken = f.at("is_address_taken").get<bool>();
        index.functions.push_back(std::move(rec));
    }
    for (const auto& c : j.at("call_sites")) {
        CallSiteRecord cs;
        cs.caller = c.at("caller").get<std::string>();
        cs.callee_name = c.at("callee_name").get<std::string>();
        cs.arg_count = c.at("arg_count").get<int>();
        cs.arg_sig = c.at("arg_sig").get<std::vector<std::string>>();
        cs.file = c.at("file").get<std::string>();
        cs.line = c.at("line").get<int>();
        index.call_sites.push_back(std::move(cs));
    }
    if (j.contains("skipped")) {
        for (const auto& s : j.at("skipped"))
            index.skipped.push_back({s.at("file").get<std::string>(),
                                     s.at("reason").get<std::string>()});
    }
    index.rebuild_lookup();
    return index;
}

void save_index(const ProjectIndex& index, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << index_to_json(index).dump(2) << '\n';
}

ProjectIndex load_index(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
    return index_from_json(j);
}

} // namespace vulnscout
