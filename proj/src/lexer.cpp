#include "dcvd/lexer.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace dcvd {

namespace {

const std::unordered_set<std::string>& keywords() {
    static const std::unordered_set<std::string> kw = {
        "auto", "break", "bool", "case", "char", "const", "continue", "default", "do",
        "double", "else", "enum", "extern", "false", "float", "for", "goto", "if",
        "inline", "int", "long", "register", "restrict", "return", "short", "signed",
        "sizeof", "static", "struct", "switch", "true", "typedef", "union", "unsigned",
        "void", "volatile", "while", "class", "namespace", "new", "delete", "nullptr",
        "template", "typename", "this", "operator", "public", "private", "protected"};
    return kw;
}

const std::unordered_set<std::string>& type_keywords() {
    static const std::unordered_set<std::string> kw = {
        "auto", "bool", "char", "const", "double", "enum", "extern", "float", "int",
        "long", "register", "short", "signed", "static", "struct", "union", "unsigned",
        "void", "volatile", "inline", "typedef", "class"};
    return kw;
}

// Multi-character punctuators, longest first within each leading character.
const std::array<const char*, 34> kPuncts = {
    "<<=", ">>=", "...", "->*", "::", "->", "++", "--", "<<", ">>", "<=", ">=",
    "==",  "!=",  "&&",  "||",  "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "##",  ".*",  "+",   "-",   "*",  "/",  "%",  "&",  "|",  "^"};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

bool is_keyword(const std::string& text) { return keywords().count(text) > 0; }
bool is_type_keyword(const std::string& text) { return type_keywords().count(text) > 0; }

std::vector<Token> lex(const std::string& source) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    int line = 0, col = 0;
    const std::size_t n = source.size();

    auto advance = [&](std::size_t count) {
        for (std::size_t k = 0; k < count && i < n; ++k) {
            if (source[i] == '\n') {
                ++line;
                col = 0;
            } else {
                ++col;
            }
            ++i;
        }
    };

    while (i < n) {
        char c = source[i];

        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
            advance(1);
            continue;
        }

        // comments
        if (c == '/' && i + 1 < n && source[i + 1] == '/') {
            while (i < n && source[i] != '\n') advance(1);
            continue;
        }
        if (c == '/' && i + 1 < n && source[i + 1] == '*') {
            advance(2);
            while (i + 1 < n && !(source[i] == '*' && source[i + 1] == '/')) advance(1);
            advance(2);
            continue;
        }

        // preprocessor directive: one token per (continued) line
        if (c == '#' && (col == 0 || tokens.empty() || tokens.back().line != line)) {
            Token t{TokenKind::Preproc, "", i, line, col};
            std::string text;
            while (i < n) {
                if (source[i] == '\\' && i + 1 < n && source[i + 1] == '\n') {
                    advance(2);
                    continue;
                }
                if (source[i] == '\n') break;
                text.push_back(source[i]);
                advance(1);
            }
            // trim trailing whitespace
            while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
                text.pop_back();
            t.text = text;
            tokens.push_back(std::move(t));
            continue;
        }

        if (is_ident_start(c)) {
            Token t{TokenKind::Identifier, "", i, line, col};
            std::string text;
            while (i < n && is_ident_char(source[i])) {
                text.push_back(source[i]);
                advance(1);
            }
            t.text = text;
            if (is_keyword(text)) t.kind = TokenKind::Keyword;
            tokens.push_back(std::move(t));
            continue;
        }

        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(source[i + 1])))) {
            Token t{TokenKind::Number, "", i, line, col};
            std::string text;
            while (i < n) {
                char d = source[i];
                bool take = std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '_' ||
                            ((d == '+' || d == '-') && !text.empty() &&
                             (text.back() == 'e' || text.back() == 'E' || text.back() == 'p' ||
                              text.back() == 'P'));
                if (!take) break;
                text.push_back(d);
                advance(1);
            }
            t.text = text;
            tokens.push_back(std::move(t));
            continue;
        }

        if (c == '"' || c == '\'') {
            char quote = c;
            Token t{quote == '"' ? TokenKind::String : TokenKind::Char, "", i, line, col};
            std::string text;
            text.push_back(quote);
            advance(1);
            while (i < n && source[i] != quote) {
                if (source[i] == '\\' && i + 1 < n) {
                    text.push_back(source[i]);
                    advance(1);
                }
                if (i < n && source[i] == '\n') break;  // unterminated literal: stop at EOL
                if (i < n) {
                    text.push_back(source[i]);
                    advance(1);
                }
            }
            if (i < n && source[i] == quote) {
                text.push_back(quote);
                advance(1);
            }
            t.text = text;
            tokens.push_back(std::move(t));
            continue;
        }

        // punctuators, longest match first
        bool matched = false;
        for (const char* p : kPuncts) {
            std::size_t len = std::char_traits<char>::length(p);
            if (source.compare(i, len, p) == 0) {
                tokens.push_back({TokenKind::Punct, p, i, line, col});
                advance(len);
                matched = true;
                break;
            }
        }
        if (matched) continue;

        // any other single character, including unknown bytes
        tokens.push_back({TokenKind::Punct, std::string(1, c), i, line, col});
        advance(1);
    }

    return tokens;
}

}  // namespace dcvd
