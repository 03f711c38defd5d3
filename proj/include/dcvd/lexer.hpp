#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dcvd {

enum class TokenKind { Identifier, Keyword, Number, String, Char, Punct, Preproc };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t offset = 0;  // byte offset of first character
    int line = 0;            // 0-based
    int col = 0;
};

/// Tokenizes C/C++-style source. Comments and whitespace are skipped, every
/// token carries its starting offset and line. Unknown characters come out as
/// single-character Punct tokens; the lexer itself never rejects input.
std::vector<Token> lex(const std::string& source);

bool is_type_keyword(const std::string& text);
bool is_keyword(const std::string& text);

}  // namespace dcvd
