#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vulnscout {

enum class TokKind {
    ident,
    number,
    string_lit,
    char_lit,
    punct,
    preproc, // whole directive line, continuations folded in
};

struct Token {
    TokKind kind;
    std::string text;
    int line = 0; // 1-based
};

// Tokenizer for C, C++ and Java sources. Comments are dropped, string and
// char literals kept as single tokens, preprocessor directives (C/C++)
// folded into one token per logical line.
std::vector<Token> lex_c_family(std::string_view src);

bool is_ident_start(char c);
bool is_ident_char(char c);

} // namespace vulnscout
