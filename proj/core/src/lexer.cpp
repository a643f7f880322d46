#include "vulnscout/lexer.hpp"

#include <cctype>

namespace vulnscout {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

namespace {

bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

// Multi-character operators kept as single tokens. '>>' is intentionally
// absent so nested template argument lists close one level per token.
const char* kThreeCharOps[] = {"<<=", ">>=", "...", "->*"};
const char* kTwoCharOps[] = {"::", "->", "==", "!=", "<=", ">=", "&&", "||",
                             "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
                             "|=", "^=", "<<"};

std::pair<std::string, std::string> directive_parts(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size() && (text[i] == '#' || text[i] == ' ' || text[i] == '\t')) ++i;
    std::string word;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i])))
        word += text[i++];
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::string arg;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
        arg += text[i++];
    return {word, arg};
}

// Conditional-compilation branches cannot be evaluated without a build
// configuration, and keeping every branch breaks brace matching whenever two
// branches open the same block. Keep the first live branch of each
// conditional: #else/#elif bodies are dropped, except after `#if 0`, whose
// dead body is dropped in favor of its #else.
std::vector<Token> keep_first_branches(std::vector<Token> toks) {
    struct Frame {
        bool taken;
        bool skipping;
    };
    std::vector<Token> out;
    std::vector<Frame> stack;
    auto outer_skipping = [&](std::size_t upto) {
        for (std::size_t k = 0; k < upto; ++k)
            if (stack[k].skipping) return true;
        return false;
    };
    for (Token& t : toks) {
        if (t.kind == TokKind::preproc) {
            auto [word, arg] = directive_parts(t.text);
            if (word == "if" || word == "ifdef" || word == "ifndef") {
                bool dead = word == "if" && arg == "0";
                bool emit = !outer_skipping(stack.size());
                stack.push_back({!dead, dead});
                if (emit) out.push_back(std::move(t));
                continue;
            }
            if (word == "elif" || word == "else") {
                if (!stack.empty()) {
                    Frame& f = stack.back();
                    f.skipping = f.taken;
                    f.taken = true;
                }
                continue;
            }
            if (word == "endif") {
                bool emit = false;
                if (!stack.empty()) {
                    stack.pop_back();
                    emit = !outer_skipping(stack.size());
                }
                if (emit) out.push_back(std::move(t));
                continue;
            }
        }
        bool skipping = false;
        for (const Frame& f : stack)
            if (f.skipping) {
                skipping = true;
                break;
            }
        if (!skipping) out.push_back(std::move(t));
    }
    return out;
}

} // namespace

std::vector<Token> lex_c_family(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    bool at_line_start = true;

    auto peek = [&](std::size_t k) -> char {
        return i + k < src.size() ? src[i + k] : '\0';
    };

    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            ++line;
            ++i;
            at_line_start = true;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f') {
            ++i;
            continue;
        }
        if (c == '/' && peek(1) == '/') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && peek(1) == '*') {
            i += 2;
            while (i < src.size() && !(src[i] == '*' && peek(1) == '/')) {
                if (src[i] == '\n') ++line;
                ++i;
            }
            i = i + 2 <= src.size() ? i + 2 : src.size();
            continue;
        }
        if (c == '#' && at_line_start) {
            int start_line = line;
            std::string text;
            while (i < src.size()) {
                if (src[i] == '\\' && peek(1) == '\n') {
                    text += ' ';
                    i += 2;
                    ++line;
                    continue;
                }
                if (src[i] == '\n') break;
                text += src[i];
                ++i;
            }
            out.push_back({TokKind::preproc, std::move(text), start_line});
            continue;
        }
        at_line_start = false;
        if (is_ident_start(c)) {
            std::size_t start = i;
            while (i < src.size() && is_ident_char(src[i])) ++i;
            // C++ raw string literal R"delim( ... )delim"
            std::string_view word = src.substr(start, i - start);
            if ((word == "R" || word == "LR" || word == "u8R" || word == "uR" || word == "UR") &&
                i < src.size() && src[i] == '"') {
                std::size_t j = i + 1;
                std::string delim;
                while (j < src.size() && src[j] != '(') delim += src[j++];
                std::string closer = ")" + delim + "\"";
                std::size_t end = src.find(closer, j);
                if (end == std::string_view::npos) end = src.size();
                else end += closer.size();
                std::string text(src.substr(start, end - start));
                for (char ch : text)
                    if (ch == '\n') ++line;
                out.push_back({TokKind::string_lit, std::move(text), line});
                i = end;
                continue;
            }
            out.push_back({TokKind::ident, std::string(word), line});
            continue;
        }
        if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
            std::size_t start = i;
            ++i;
            while (i < src.size()) {
                char d = src[i];
                if (is_ident_char(d) || d == '.') {
                    ++i;
                } else if ((d == '+' || d == '-') && i > start &&
                           (src[i - 1] == 'e' || src[i - 1] == 'E' ||
                            src[i - 1] == 'p' || src[i - 1] == 'P')) {
                    ++i;
                } else {
                    break;
                }
            }
            out.push_back({TokKind::number, std::string(src.substr(start, i - start)), line});
            continue;
        }
        if (c == '"' || c == '\'') {
            char quote = c;
            std::size_t start = i;
            int start_line = line;
            ++i;
            while (i < src.size() && src[i] != quote) {
                if (src[i] == '\\' && i + 1 < src.size()) {
                    if (src[i + 1] == '\n') ++line;
                    i += 2;
                    continue;
                }
                if (src[i] == '\n') {
                    ++line;
                    break; // unterminated on this line; stop the literal
                }
                ++i;
            }
            if (i < src.size() && src[i] == quote) ++i;
            out.push_back({quote == '"' ? TokKind::string_lit : TokKind::char_lit,
                           std::string(src.substr(start, i - start)), start_line});
            continue;
        }
        // punctuation, longest match first
        bool matched = false;
        for (const char* op : kThreeCharOps) {
            if (src.substr(i, 3) == op) {
                out.push_back({TokKind::punct, op, line});
                i += 3;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        for (const char* op : kTwoCharOps) {
            if (src.substr(i, 2) == op) {
                out.push_back({TokKind::punct, op, line});
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        out.push_back({TokKind::punct, std::string(1, c), line});
        ++i;
    }
    return keep_first_branches(std::move(out));
}

} // namespace vulnscout
