#include "dcvd/graph.hpp"

#include "dcvd/lexer.hpp"
#include "dcvd/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <unordered_map>

namespace dcvd {

using nlohmann::json;

namespace {

const std::unordered_map<int, const char*>& kind_names() {
    static const std::unordered_map<int, const char*> names = {
        {static_cast<int>(NodeKind::Unknown), "unk"},
        {static_cast<int>(NodeKind::FunctionDefinition), "function_definition"},
        {static_cast<int>(NodeKind::Declarator), "declarator"},
        {static_cast<int>(NodeKind::ParameterList), "parameter_list"},
        {static_cast<int>(NodeKind::Parameter), "parameter"},
        {static_cast<int>(NodeKind::CompoundStatement), "compound_statement"},
        {static_cast<int>(NodeKind::IfStatement), "if_statement"},
        {static_cast<int>(NodeKind::WhileStatement), "while_statement"},
        {static_cast<int>(NodeKind::DoStatement), "do_statement"},
        {static_cast<int>(NodeKind::ForStatement), "for_statement"},
        {static_cast<int>(NodeKind::SwitchStatement), "switch_statement"},
        {static_cast<int>(NodeKind::CaseClause), "case_clause"},
        {static_cast<int>(NodeKind::DefaultClause), "default_clause"},
        {static_cast<int>(NodeKind::ReturnStatement), "return_statement"},
        {static_cast<int>(NodeKind::BreakStatement), "break_statement"},
        {static_cast<int>(NodeKind::ContinueStatement), "continue_statement"},
        {static_cast<int>(NodeKind::GotoStatement), "goto_statement"},
        {static_cast<int>(NodeKind::LabeledStatement), "labeled_statement"},
        {static_cast<int>(NodeKind::Declaration), "declaration"},
        {static_cast<int>(NodeKind::ExpressionStatement), "expression_statement"},
        {static_cast<int>(NodeKind::EmptyStatement), "empty_statement"},
        {static_cast<int>(NodeKind::Preproc), "preproc"},
        {static_cast<int>(NodeKind::ParenExpression), "parenthesized_expression"},
        {static_cast<int>(NodeKind::AssignmentExpression), "assignment_expression"},
        {static_cast<int>(NodeKind::ConditionalExpression), "conditional_expression"},
        {static_cast<int>(NodeKind::BinaryExpression), "binary_expression"},
        {static_cast<int>(NodeKind::UnaryExpression), "unary_expression"},
        {static_cast<int>(NodeKind::UpdateExpression), "update_expression"},
        {static_cast<int>(NodeKind::CastExpression), "cast_expression"},
        {static_cast<int>(NodeKind::CallExpression), "call_expression"},
        {static_cast<int>(NodeKind::ArgumentList), "argument_list"},
        {static_cast<int>(NodeKind::SubscriptExpression), "subscript_expression"},
        {static_cast<int>(NodeKind::FieldExpression), "field_expression"},
        {static_cast<int>(NodeKind::PointerExpression), "pointer_expression"},
        {static_cast<int>(NodeKind::CommaExpression), "comma_expression"},
        {static_cast<int>(NodeKind::InitDeclarator), "init_declarator"},
        {static_cast<int>(NodeKind::InitializerList), "initializer_list"},
        {static_cast<int>(NodeKind::Identifier), "identifier"},
        {static_cast<int>(NodeKind::NumberLiteral), "number_literal"},
        {static_cast<int>(NodeKind::StringLiteral), "string_literal"},
        {static_cast<int>(NodeKind::CharLiteral), "char_literal"},
        {static_cast<int>(NodeKind::TypeSpecifier), "type_specifier"},
        {static_cast<int>(NodeKind::ErrorToken), "error_token"},
        {static_cast<int>(NodeKind::Exit), "exit"},
    };
    return names;
}

struct AstNode {
    NodeKind kind = NodeKind::Unknown;
    std::string token;
    int line = 0;
    std::vector<std::unique_ptr<AstNode>> children;

    AstNode(NodeKind k, const Token& lead) : kind(k), token(lead.text), line(lead.line) {}
    AstNode(NodeKind k, std::string tok, int ln) : kind(k), token(std::move(tok)), line(ln) {}

    AstNode* add(std::unique_ptr<AstNode> child) {
        children.push_back(std::move(child));
        return children.back().get();
    }
};

using NodePtr = std::unique_ptr<AstNode>;

// ---------------------------------------------------------------------------
// Expression parser (precedence climbing over a bounded token span).

class ExprParser {
public:
    ExprParser(const std::vector<Token>& tokens, std::size_t begin, std::size_t end)
        : toks_(tokens), pos_(begin), end_(end) {}

    /// Parses the whole span as one expression; trailing junk is absorbed as
    /// error_token leaves so the parser always terminates.
    NodePtr parse_all(bool allow_comma) {
        if (pos_ >= end_) return nullptr;
        NodePtr e = parse_expr(allow_comma ? 0 : 1);
        while (pos_ < end_) {
            if (!e) {
                e = std::make_unique<AstNode>(NodeKind::ErrorToken, toks_[pos_]);
                ++pos_;
                continue;
            }
            e->add(std::make_unique<AstNode>(NodeKind::ErrorToken, toks_[pos_]));
            ++pos_;
        }
        return e;
    }

private:
    const std::vector<Token>& toks_;
    std::size_t pos_, end_;

    bool done() const { return pos_ >= end_; }
    const Token& peek() const { return toks_[pos_]; }
    bool at(const char* text) const { return !done() && peek().text == text; }

    static int binary_prec(const std::string& op) {
        if (op == "||") return 4;
        if (op == "&&") return 5;
        if (op == "|") return 6;
        if (op == "^") return 7;
        if (op == "&") return 8;
        if (op == "==" || op == "!=") return 9;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 10;
        if (op == "<<" || op == ">>") return 11;
        if (op == "+" || op == "-") return 12;
        if (op == "*" || op == "/" || op == "%") return 13;
        return -1;
    }

    static bool is_assign_op(const std::string& op) {
        return op == "=" || op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "%=" ||
               op == "&=" || op == "|=" || op == "^=" || op == "<<=" || op == ">>=";
    }

    // min_prec: 0 admits comma, 1 admits assignment and below.
    NodePtr parse_expr(int min_prec) {
        NodePtr lhs = parse_unary();
        if (!lhs) return nullptr;
        for (;;) {
            if (done() || peek().kind != TokenKind::Punct) break;
            const std::string& op = peek().text;

            if (op == "," && min_prec <= 0) {
                auto node = std::make_unique<AstNode>(NodeKind::CommaExpression, lhs->token, lhs->line);
                node->add(std::move(lhs));
                ++pos_;
                NodePtr rhs = parse_expr(0);
                if (rhs) node->add(std::move(rhs));
                lhs = std::move(node);
                continue;
            }
            if (is_assign_op(op) && min_prec <= 1) {
                auto node = std::make_unique<AstNode>(NodeKind::AssignmentExpression, lhs->token, lhs->line);
                node->add(std::move(lhs));
                ++pos_;
                NodePtr rhs = parse_expr(1);  // right-assoc
                if (rhs) node->add(std::move(rhs));
                lhs = std::move(node);
                continue;
            }
            if (op == "?" && min_prec <= 2) {
                auto node = std::make_unique<AstNode>(NodeKind::ConditionalExpression, lhs->token, lhs->line);
                node->add(std::move(lhs));
                ++pos_;
                NodePtr mid = parse_expr(1);
                if (mid) node->add(std::move(mid));
                if (at(":")) ++pos_;
                NodePtr rhs = parse_expr(2);
                if (rhs) node->add(std::move(rhs));
                lhs = std::move(node);
                continue;
            }
            int prec = binary_prec(op);
            if (prec < 0 || prec < min_prec) break;
            auto node = std::make_unique<AstNode>(NodeKind::BinaryExpression, op, peek().line);
            ++pos_;
            NodePtr rhs = parse_expr(prec + 1);
            node->add(std::move(lhs));
            if (rhs) node->add(std::move(rhs));
            lhs = std::move(node);
        }
        return lhs;
    }

    NodePtr parse_unary() {
        if (done()) return nullptr;
        const Token& t = peek();
        if (t.kind == TokenKind::Punct) {
            if (t.text == "++" || t.text == "--") {
                auto node = std::make_unique<AstNode>(NodeKind::UpdateExpression, t);
                ++pos_;
                NodePtr inner = parse_unary();
                if (inner) node->add(std::move(inner));
                return node;
            }
            if (t.text == "*" || t.text == "&") {
                auto node = std::make_unique<AstNode>(NodeKind::PointerExpression, t);
                ++pos_;
                NodePtr inner = parse_unary();
                if (inner) node->add(std::move(inner));
                return node;
            }
            if (t.text == "!" || t.text == "~" || t.text == "-" || t.text == "+") {
                auto node = std::make_unique<AstNode>(NodeKind::UnaryExpression, t);
                ++pos_;
                NodePtr inner = parse_unary();
                if (inner) node->add(std::move(inner));
                return node;
            }
        }
        if (t.kind == TokenKind::Keyword && t.text == "sizeof") {
            auto node = std::make_unique<AstNode>(NodeKind::UnaryExpression, t);
            ++pos_;
            NodePtr inner = parse_unary();
            if (inner) node->add(std::move(inner));
            return node;
        }
        return parse_postfix();
    }

    std::size_t find_close(const char* open, const char* close) const {
        // pos_ is at `open`; returns index of matching close or end_.
        int depth = 0;
        for (std::size_t i = pos_; i < end_; ++i) {
            if (toks_[i].text == open) ++depth;
            else if (toks_[i].text == close && --depth == 0) return i;
        }
        return end_;
    }

    bool looks_like_type_span(std::size_t begin, std::size_t close) const {
        if (close <= begin + 1) return false;
        bool saw_name = false;
        for (std::size_t i = begin + 1; i < close; ++i) {
            const Token& t = toks_[i];
            if (t.kind == TokenKind::Keyword && is_type_keyword(t.text)) {
                saw_name = true;
                continue;
            }
            if (t.kind == TokenKind::Identifier) {
                if (saw_name) return false;  // two names: not a simple cast
                saw_name = true;
                continue;
            }
            if (t.text == "*" || t.text == "const") continue;
            return false;
        }
        return saw_name;
    }

    NodePtr parse_postfix() {
        NodePtr base = parse_primary();
        if (!base) return nullptr;
        for (;;) {
            if (done() || peek().kind != TokenKind::Punct) break;
            const std::string& op = peek().text;
            if (op == "(") {
                auto call = std::make_unique<AstNode>(NodeKind::CallExpression, base->token, base->line);
                auto args = std::make_unique<AstNode>(NodeKind::ArgumentList, peek());
                std::size_t close = find_close("(", ")");
                ++pos_;
                parse_comma_list(close, *args);
                pos_ = std::min(close + 1, end_);
                call->add(std::move(base));
                call->add(std::move(args));
                base = std::move(call);
                continue;
            }
            if (op == "[") {
                auto sub = std::make_unique<AstNode>(NodeKind::SubscriptExpression, base->token, base->line);
                std::size_t close = find_close("[", "]");
                ++pos_;
                ExprParser inner(toks_, pos_, close);
                sub->add(std::move(base));
                NodePtr idx = inner.parse_all(true);
                if (idx) sub->add(std::move(idx));
                pos_ = std::min(close + 1, end_);
                base = std::move(sub);
                continue;
            }
            if (op == "." || op == "->") {
                auto fld = std::make_unique<AstNode>(NodeKind::FieldExpression, base->token, base->line);
                fld->add(std::move(base));
                ++pos_;
                if (!done() && peek().kind == TokenKind::Identifier) {
                    fld->add(std::make_unique<AstNode>(NodeKind::Identifier, peek()));
                    ++pos_;
                }
                base = std::move(fld);
                continue;
            }
            if (op == "++" || op == "--") {
                auto upd = std::make_unique<AstNode>(NodeKind::UpdateExpression, peek());
                upd->add(std::move(base));
                ++pos_;
                base = std::move(upd);
                continue;
            }
            break;
        }
        return base;
    }

    void parse_comma_list(std::size_t close, AstNode& parent) {
        // parses comma-separated expressions in [pos_, close)
        std::size_t item_begin = pos_;
        int depth = 0;
        for (std::size_t i = pos_; i <= close && i < end_; ++i) {
            bool at_end = (i == close);
            const std::string& txt = at_end ? "" : toks_[i].text;
            if (!at_end && (txt == "(" || txt == "[" || txt == "{")) ++depth;
            if (!at_end && (txt == ")" || txt == "]" || txt == "}")) --depth;
            if (at_end || (depth == 0 && txt == ",")) {
                if (i > item_begin) {
                    ExprParser item(toks_, item_begin, i);
                    NodePtr e = item.parse_all(false);
                    if (e) parent.add(std::move(e));
                }
                item_begin = i + 1;
            }
            if (at_end) break;
        }
        pos_ = close;
    }

    NodePtr parse_primary() {
        if (done()) return nullptr;
        const Token& t = peek();
        switch (t.kind) {
            case TokenKind::Identifier: {
                auto node = std::make_unique<AstNode>(NodeKind::Identifier, t);
                ++pos_;
                return node;
            }
            case TokenKind::Number: {
                auto node = std::make_unique<AstNode>(NodeKind::NumberLiteral, t);
                ++pos_;
                return node;
            }
            case TokenKind::String: {
                auto node = std::make_unique<AstNode>(NodeKind::StringLiteral, t);
                ++pos_;
                return node;
            }
            case TokenKind::Char: {
                auto node = std::make_unique<AstNode>(NodeKind::CharLiteral, t);
                ++pos_;
                return node;
            }
            case TokenKind::Keyword: {
                // type keyword in expression position: absorb as type specifier
                auto node = std::make_unique<AstNode>(NodeKind::TypeSpecifier, t);
                ++pos_;
                return node;
            }
            case TokenKind::Preproc: {
                auto node = std::make_unique<AstNode>(NodeKind::Preproc, t);
                ++pos_;
                return node;
            }
            case TokenKind::Punct:
                break;
        }
        if (t.text == "(") {
            std::size_t close = find_close("(", ")");
            // cast: "(type) expr"
            if (looks_like_type_span(pos_, close) && close + 1 < end_) {
                const Token& nxt = toks_[close + 1];
                bool expr_follows = nxt.kind == TokenKind::Identifier || nxt.kind == TokenKind::Number ||
                                    nxt.kind == TokenKind::String || nxt.kind == TokenKind::Char ||
                                    nxt.text == "(" || nxt.text == "*" || nxt.text == "&" ||
                                    nxt.text == "-" || nxt.text == "!" || nxt.text == "~";
                if (expr_follows) {
                    auto cast = std::make_unique<AstNode>(NodeKind::CastExpression, t);
                    for (std::size_t i = pos_ + 1; i < close; ++i)
                        cast->add(std::make_unique<AstNode>(NodeKind::TypeSpecifier, toks_[i]));
                    pos_ = close + 1;
                    NodePtr inner = parse_unary();
                    if (inner) cast->add(std::move(inner));
                    return cast;
                }
            }
            auto paren = std::make_unique<AstNode>(NodeKind::ParenExpression, t);
            std::size_t inner_begin = pos_ + 1;
            ExprParser inner(toks_, inner_begin, close);
            pos_ = std::min(close + 1, end_);
            NodePtr e = inner.parse_all(true);
            if (e) paren->add(std::move(e));
            return paren;
        }
        if (t.text == "{") {
            std::size_t close = find_close("{", "}");
            auto init = std::make_unique<AstNode>(NodeKind::InitializerList, t);
            ++pos_;
            parse_comma_list(close, *init);
            pos_ = std::min(close + 1, end_);
            return init;
        }
        // unexpected punctuation: absorb as an error token
        auto node = std::make_unique<AstNode>(NodeKind::ErrorToken, t);
        ++pos_;
        return node;
    }
};

// ---------------------------------------------------------------------------
// Statement parser.

class FunctionParser {
public:
    explicit FunctionParser(const std::vector<Token>& tokens) : toks_(tokens) {}

    NodePtr parse() {
        if (toks_.empty()) throw ExtractionError("no function definition recognized: empty token stream");

        std::size_t body_open = find_body_open();
        auto [name_idx, paren_open, paren_close] = find_signature(body_open);

        auto root = std::make_unique<AstNode>(NodeKind::FunctionDefinition, toks_[0]);
        for (std::size_t i = 0; i < name_idx; ++i) {
            if (toks_[i].kind == TokenKind::Preproc)
                root->add(std::make_unique<AstNode>(NodeKind::Preproc, toks_[i]));
            else if (toks_[i].kind != TokenKind::Punct)
                root->add(std::make_unique<AstNode>(NodeKind::TypeSpecifier, toks_[i]));
        }
        root->add(std::make_unique<AstNode>(NodeKind::Declarator, toks_[name_idx]));

        auto params = std::make_unique<AstNode>(NodeKind::ParameterList, toks_[paren_open]);
        parse_parameters(paren_open + 1, paren_close, *params);
        root->add(std::move(params));

        pos_ = body_open;
        root->add(parse_compound());
        return root;
    }

private:
    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;

    bool done() const { return pos_ >= toks_.size(); }
    const Token& peek() const { return toks_[pos_]; }
    bool at(const char* text) const { return !done() && peek().text == text; }
    bool at_kw(const char* text) const {
        return !done() && peek().kind == TokenKind::Keyword && peek().text == text;
    }

    std::size_t find_body_open() const {
        int paren_depth = 0;
        for (std::size_t i = 0; i < toks_.size(); ++i) {
            const std::string& t = toks_[i].text;
            if (toks_[i].kind != TokenKind::Punct) continue;
            if (t == "(") ++paren_depth;
            else if (t == ")") --paren_depth;
            else if (t == "{" && paren_depth <= 0) return i;
        }
        throw ExtractionError("no function definition recognized: missing body");
    }

    std::tuple<std::size_t, std::size_t, std::size_t> find_signature(std::size_t body_open) const {
        // last ')' before the body, its matching '(' and the name before it
        std::size_t close = body_open;
        while (close > 0 && toks_[close - 1].text != ")") --close;
        if (close == 0) throw ExtractionError("no function definition recognized: missing parameter list");
        --close;
        int depth = 0;
        std::size_t open = close;
        for (;; --open) {
            if (toks_[open].text == ")") ++depth;
            else if (toks_[open].text == "(" && --depth == 0) break;
            if (open == 0) throw ExtractionError("no function definition recognized: unbalanced parameter list");
        }
        if (open == 0 || toks_[open - 1].kind != TokenKind::Identifier)
            throw ExtractionError("no function definition recognized: missing function name");
        return {open - 1, open, close};
    }

    void parse_parameters(std::size_t begin, std::size_t end, AstNode& params) {
        std::size_t item_begin = begin;
        int depth = 0;
        for (std::size_t i = begin; i <= end; ++i) {
            bool at_end = (i == end);
            const std::string& txt = at_end ? "" : toks_[i].text;
            if (!at_end && (txt == "(" || txt == "[")) ++depth;
            if (!at_end && (txt == ")" || txt == "]")) --depth;
            if (at_end || (depth == 0 && txt == ",")) {
                if (i > item_begin) {
                    auto param = std::make_unique<AstNode>(NodeKind::Parameter, toks_[item_begin]);
                    // declared name: last identifier in the group
                    for (std::size_t j = i; j > item_begin; --j) {
                        if (toks_[j - 1].kind == TokenKind::Identifier) {
                            param->add(std::make_unique<AstNode>(NodeKind::Identifier, toks_[j - 1]));
                            break;
                        }
                    }
                    params.add(std::move(param));
                }
                item_begin = i + 1;
            }
        }
    }

    NodePtr parse_compound() {
        auto node = std::make_unique<AstNode>(NodeKind::CompoundStatement, peek());
        ++pos_;  // consume '{'
        while (!done() && !at("}")) node->add(parse_statement());
        if (at("}")) ++pos_;
        return node;
    }

    std::size_t find_statement_end() const {
        // index of terminating ';' at depth 0, or of the next unmatched '}'
        int depth = 0;
        for (std::size_t i = pos_; i < toks_.size(); ++i) {
            const std::string& t = toks_[i].text;
            if (toks_[i].kind != TokenKind::Punct) continue;
            if (t == "(" || t == "[" || t == "{") ++depth;
            else if (t == ")" || t == "]") --depth;
            else if (t == "}") {
                if (depth == 0) return i;  // missing semicolon before block end
                --depth;
            } else if (t == ";" && depth == 0) {
                return i;
            }
        }
        return toks_.size();
    }

    NodePtr parse_paren_condition() {
        if (!at("(")) return nullptr;
        int depth = 0;
        std::size_t close = pos_;
        for (; close < toks_.size(); ++close) {
            if (toks_[close].text == "(") ++depth;
            else if (toks_[close].text == ")" && --depth == 0) break;
        }
        auto cond = std::make_unique<AstNode>(NodeKind::ParenExpression, peek());
        ExprParser inner(toks_, pos_ + 1, std::min(close, toks_.size()));
        NodePtr e = inner.parse_all(true);
        if (e) cond->add(std::move(e));
        pos_ = std::min(close + 1, toks_.size());
        return cond;
    }

    bool looks_like_declaration(std::size_t end) const {
        const Token& first = toks_[pos_];
        if (first.kind == TokenKind::Keyword && is_type_keyword(first.text)) return true;
        if (first.kind != TokenKind::Identifier) return false;
        if (pos_ + 1 >= end) return false;
        const Token& second = toks_[pos_ + 1];
        if (second.kind == TokenKind::Identifier) return true;  // "Type name"
        if (second.text == "*" && pos_ + 2 < end && toks_[pos_ + 2].kind == TokenKind::Identifier) {
            if (pos_ + 3 >= end) return true;
            const std::string& after = toks_[pos_ + 3].text;
            return after == "=" || after == ";" || after == "," || after == "[";
        }
        return false;
    }

    NodePtr parse_declaration(std::size_t end) {
        auto node = std::make_unique<AstNode>(NodeKind::Declaration, peek());
        std::size_t i = pos_;
        // leading type tokens
        while (i < end && ((toks_[i].kind == TokenKind::Keyword && is_type_keyword(toks_[i].text)) ||
                           (toks_[i].kind == TokenKind::Identifier && i + 1 < end &&
                            (toks_[i + 1].kind == TokenKind::Identifier || toks_[i + 1].text == "*")))) {
            node->add(std::make_unique<AstNode>(NodeKind::TypeSpecifier, toks_[i]));
            ++i;
        }
        // declarators separated by top-level commas
        std::size_t item_begin = i;
        int depth = 0;
        for (std::size_t j = i; j <= end; ++j) {
            bool at_end = (j == end);
            const std::string& txt = at_end ? "" : toks_[j].text;
            if (!at_end && (txt == "(" || txt == "[" || txt == "{")) ++depth;
            if (!at_end && (txt == ")" || txt == "]" || txt == "}")) --depth;
            if (at_end || (depth == 0 && txt == ",")) {
                if (j > item_begin) {
                    auto decl = std::make_unique<AstNode>(NodeKind::InitDeclarator, toks_[item_begin]);
                    // name: first identifier in the group
                    std::size_t eq = j;
                    for (std::size_t k = item_begin; k < j; ++k) {
                        if (toks_[k].text == "=" && toks_[k].kind == TokenKind::Punct) {
                            eq = k;
                            break;
                        }
                    }
                    for (std::size_t k = item_begin; k < eq; ++k) {
                        if (toks_[k].kind == TokenKind::Identifier) {
                            decl->add(std::make_unique<AstNode>(NodeKind::Identifier, toks_[k]));
                            break;
                        }
                    }
                    if (eq < j) {
                        ExprParser init(toks_, eq + 1, j);
                        NodePtr e = init.parse_all(false);
                        if (e) decl->add(std::move(e));
                    }
                    node->add(std::move(decl));
                }
                item_begin = j + 1;
            }
        }
        pos_ = std::min(end + 1, toks_.size());
        if (end < toks_.size() && toks_[end].text == "}") pos_ = end;  // leave block close
        return node;
    }

    NodePtr parse_statement() {
        const Token& t = peek();

        if (t.kind == TokenKind::Preproc) {
            auto node = std::make_unique<AstNode>(NodeKind::Preproc, t);
            ++pos_;
            return node;
        }
        if (at("{")) return parse_compound();
        if (at(";")) {
            auto node = std::make_unique<AstNode>(NodeKind::EmptyStatement, t);
            ++pos_;
            return node;
        }

        if (at_kw("if")) {
            auto node = std::make_unique<AstNode>(NodeKind::IfStatement, t);
            ++pos_;
            if (auto cond = parse_paren_condition()) node->add(std::move(cond));
            if (!done() && !at("}")) node->add(parse_statement());
            if (at_kw("else")) {
                ++pos_;
                if (!done() && !at("}")) node->add(parse_statement());
            }
            return node;
        }
        if (at_kw("while")) {
            auto node = std::make_unique<AstNode>(NodeKind::WhileStatement, t);
            ++pos_;
            if (auto cond = parse_paren_condition()) node->add(std::move(cond));
            if (!done() && !at("}")) node->add(parse_statement());
            return node;
        }
        if (at_kw("do")) {
            auto node = std::make_unique<AstNode>(NodeKind::DoStatement, t);
            ++pos_;
            if (!done() && !at("}")) node->add(parse_statement());
            if (at_kw("while")) {
                ++pos_;
                if (auto cond = parse_paren_condition()) node->add(std::move(cond));
            }
            if (at(";")) ++pos_;
            return node;
        }
        if (at_kw("for")) {
            auto node = std::make_unique<AstNode>(NodeKind::ForStatement, t);
            ++pos_;
            if (at("(")) {
                int depth = 0;
                std::size_t close = pos_;
                for (; close < toks_.size(); ++close) {
                    if (toks_[close].text == "(") ++depth;
                    else if (toks_[close].text == ")" && --depth == 0) break;
                }
                // split header on top-level semicolons
                std::size_t part_begin = pos_ + 1;
                int inner_depth = 0;
                for (std::size_t i = pos_ + 1; i <= close && i < toks_.size(); ++i) {
                    bool at_close = (i == close);
                    const std::string& txt = at_close ? "" : toks_[i].text;
                    if (!at_close && (txt == "(" || txt == "[")) ++inner_depth;
                    if (!at_close && (txt == ")" || txt == "]")) --inner_depth;
                    if (at_close || (inner_depth == 0 && txt == ";")) {
                        if (i > part_begin) {
                            ExprParser part(toks_, part_begin, i);
                            NodePtr e = part.parse_all(true);
                            if (e) node->add(std::move(e));
                        }
                        part_begin = i + 1;
                    }
                    if (at_close) break;
                }
                pos_ = std::min(close + 1, toks_.size());
            }
            if (!done() && !at("}")) node->add(parse_statement());
            return node;
        }
        if (at_kw("switch")) {
            auto node = std::make_unique<AstNode>(NodeKind::SwitchStatement, t);
            ++pos_;
            if (auto cond = parse_paren_condition()) node->add(std::move(cond));
            if (at("{")) {
                const Token& open = peek();
                auto body = std::make_unique<AstNode>(NodeKind::CompoundStatement, open);
                ++pos_;
                AstNode* current_clause = nullptr;
                while (!done() && !at("}")) {
                    if (at_kw("case") || at_kw("default")) {
                        bool is_case = peek().text == "case";
                        auto clause = std::make_unique<AstNode>(
                            is_case ? NodeKind::CaseClause : NodeKind::DefaultClause, peek());
                        ++pos_;
                        if (is_case) {
                            // constant expression up to ':'
                            std::size_t colon = pos_;
                            while (colon < toks_.size() && toks_[colon].text != ":") ++colon;
                            ExprParser ce(toks_, pos_, colon);
                            NodePtr e = ce.parse_all(false);
                            if (e) clause->add(std::move(e));
                            pos_ = std::min(colon, toks_.size());
                        }
                        if (at(":")) ++pos_;
                        current_clause = body->add(std::move(clause));
                        continue;
                    }
                    NodePtr stmt = parse_statement();
                    if (current_clause) current_clause->add(std::move(stmt));
                    else body->add(std::move(stmt));
                }
                if (at("}")) ++pos_;
                node->add(std::move(body));
            } else if (!done()) {
                node->add(parse_statement());
            }
            return node;
        }
        if (at_kw("return")) {
            auto node = std::make_unique<AstNode>(NodeKind::ReturnStatement, t);
            ++pos_;
            std::size_t end = find_statement_end();
            if (end > pos_) {
                ExprParser e(toks_, pos_, end);
                NodePtr ex = e.parse_all(true);
                if (ex) node->add(std::move(ex));
            }
            pos_ = (end < toks_.size() && toks_[end].text == ";") ? end + 1 : end;
            return node;
        }
        if (at_kw("break") || at_kw("continue")) {
            auto node = std::make_unique<AstNode>(
                t.text == "break" ? NodeKind::BreakStatement : NodeKind::ContinueStatement, t);
            ++pos_;
            if (at(";")) ++pos_;
            return node;
        }
        if (at_kw("goto")) {
            auto node = std::make_unique<AstNode>(NodeKind::GotoStatement, t);
            ++pos_;
            if (!done() && peek().kind == TokenKind::Identifier) {
                node->add(std::make_unique<AstNode>(NodeKind::Identifier, peek()));
                ++pos_;
            }
            if (at(";")) ++pos_;
            return node;
        }
        // label: "identifier :"
        if (t.kind == TokenKind::Identifier && pos_ + 1 < toks_.size() && toks_[pos_ + 1].text == ":") {
            auto node = std::make_unique<AstNode>(NodeKind::LabeledStatement, t);
            pos_ += 2;
            if (!done() && !at("}")) node->add(parse_statement());
            return node;
        }

        std::size_t end = find_statement_end();
        if (looks_like_declaration(end)) return parse_declaration(end);

        auto node = std::make_unique<AstNode>(NodeKind::ExpressionStatement, t);
        ExprParser e(toks_, pos_, end);
        NodePtr ex = e.parse_all(true);
        if (ex) node->add(std::move(ex));
        pos_ = (end < toks_.size() && toks_[end].text == ";") ? end + 1 : end;
        return node;
    }
};

// ---------------------------------------------------------------------------
// CFG overlay.

class CfgBuilder {
public:
    CfgBuilder(std::vector<Edge>& edges, AstNode* exit_node) : edges_(edges), exit_(exit_node) {}

    void build(AstNode* func_root, AstNode* body) {
        std::vector<AstNode*> exits = wire(body, {func_root});
        for (AstNode* e : exits) connect(e, exit_);
        edge_targets_[func_root];  // ensure the entry participates even for empty bodies
    }

    const std::map<AstNode*, std::vector<AstNode*>>& edge_targets() const { return edge_targets_; }

private:
    struct LoopCtx {
        AstNode* header = nullptr;
        std::vector<AstNode*> breaks;
        bool is_switch = false;
    };

    std::vector<Edge>& edges_;
    AstNode* exit_;
    std::vector<LoopCtx*> loop_stack_;
    std::map<AstNode*, std::vector<AstNode*>> edge_targets_;
    std::map<std::pair<AstNode*, AstNode*>, bool> seen_;

    void connect(AstNode* from, AstNode* to) {
        if (!from || !to) return;
        auto key = std::make_pair(from, to);
        if (seen_.count(key)) return;
        seen_[key] = true;
        edge_targets_[from].push_back(to);
    }

    static bool is_statement(const AstNode* n) {
        switch (n->kind) {
            case NodeKind::IfStatement:
            case NodeKind::WhileStatement:
            case NodeKind::DoStatement:
            case NodeKind::ForStatement:
            case NodeKind::SwitchStatement:
            case NodeKind::ReturnStatement:
            case NodeKind::BreakStatement:
            case NodeKind::ContinueStatement:
            case NodeKind::GotoStatement:
            case NodeKind::LabeledStatement:
            case NodeKind::Declaration:
            case NodeKind::ExpressionStatement:
            case NodeKind::EmptyStatement:
            case NodeKind::Preproc:
            case NodeKind::CompoundStatement:
            case NodeKind::CaseClause:
            case NodeKind::DefaultClause:
                return true;
            default:
                return false;
        }
    }

    std::vector<AstNode*> wire(AstNode* stmt, std::vector<AstNode*> preds) {
        if (!stmt) return preds;
        switch (stmt->kind) {
            case NodeKind::CompoundStatement: {
                std::vector<AstNode*> cur = std::move(preds);
                for (auto& child : stmt->children)
                    if (is_statement(child.get())) cur = wire(child.get(), std::move(cur));
                return cur;
            }
            case NodeKind::IfStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                AstNode* then_branch = nullptr;
                AstNode* else_branch = nullptr;
                for (auto& child : stmt->children) {
                    if (!is_statement(child.get())) continue;
                    if (!then_branch) then_branch = child.get();
                    else if (!else_branch) else_branch = child.get();
                }
                std::vector<AstNode*> exits;
                if (then_branch) {
                    auto t = wire(then_branch, {stmt});
                    exits.insert(exits.end(), t.begin(), t.end());
                } else {
                    exits.push_back(stmt);
                }
                if (else_branch) {
                    auto e = wire(else_branch, {stmt});
                    exits.insert(exits.end(), e.begin(), e.end());
                } else {
                    exits.push_back(stmt);
                }
                return exits;
            }
            case NodeKind::WhileStatement:
            case NodeKind::DoStatement:
            case NodeKind::ForStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                AstNode* body = nullptr;
                for (auto& child : stmt->children)
                    if (is_statement(child.get())) body = child.get();
                LoopCtx ctx;
                ctx.header = stmt;
                loop_stack_.push_back(&ctx);
                std::vector<AstNode*> body_exits = body ? wire(body, {stmt}) : std::vector<AstNode*>{stmt};
                loop_stack_.pop_back();
                for (AstNode* e : body_exits)
                    if (e != stmt) connect(e, stmt);  // back edge
                std::vector<AstNode*> exits = {stmt};
                exits.insert(exits.end(), ctx.breaks.begin(), ctx.breaks.end());
                return exits;
            }
            case NodeKind::SwitchStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                AstNode* body = nullptr;
                for (auto& child : stmt->children)
                    if (child->kind == NodeKind::CompoundStatement) body = child.get();
                if (!body) return {stmt};
                LoopCtx ctx;
                ctx.header = nullptr;
                ctx.is_switch = true;
                loop_stack_.push_back(&ctx);
                std::vector<AstNode*> fallthrough;
                bool has_default = false;
                for (auto& child : body->children) {
                    if (child->kind != NodeKind::CaseClause && child->kind != NodeKind::DefaultClause)
                        continue;
                    AstNode* clause = child.get();
                    if (clause->kind == NodeKind::DefaultClause) has_default = true;
                    connect(stmt, clause);  // fan-out per case
                    for (AstNode* f : fallthrough) connect(f, clause);
                    std::vector<AstNode*> cur = {clause};
                    for (auto& inner : clause->children)
                        if (is_statement(inner.get())) cur = wire(inner.get(), std::move(cur));
                    fallthrough = std::move(cur);
                }
                loop_stack_.pop_back();
                std::vector<AstNode*> exits = std::move(fallthrough);
                exits.insert(exits.end(), ctx.breaks.begin(), ctx.breaks.end());
                if (!has_default) exits.push_back(stmt);
                return exits;
            }
            case NodeKind::ReturnStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                connect(stmt, exit_);
                return {};
            }
            case NodeKind::BreakStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                if (!loop_stack_.empty()) loop_stack_.back()->breaks.push_back(stmt);
                return {};
            }
            case NodeKind::ContinueStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                for (auto it = loop_stack_.rbegin(); it != loop_stack_.rend(); ++it) {
                    if ((*it)->header) {
                        connect(stmt, (*it)->header);
                        break;
                    }
                }
                return {};
            }
            case NodeKind::LabeledStatement: {
                for (AstNode* p : preds) connect(p, stmt);
                AstNode* inner = nullptr;
                for (auto& child : stmt->children)
                    if (is_statement(child.get())) inner = child.get();
                if (!inner) return {stmt};
                return wire(inner, {stmt});
            }
            default: {
                // straight-line statements, including goto (fall-through only)
                for (AstNode* p : preds) connect(p, stmt);
                return {stmt};
            }
        }
    }
};

void flatten(const AstNode* node, std::vector<GraphNode>& out, std::vector<Edge>& ast_edges,
             std::map<const AstNode*, int>& index_of) {
    int idx = static_cast<int>(out.size());
    index_of[node] = idx;
    out.push_back({idx, node->kind, node->token, node->line});
    for (const auto& child : node->children) {
        flatten(child.get(), out, ast_edges, index_of);
        ast_edges.push_back({idx, index_of[child.get()]});
    }
}

}  // namespace

const char* kind_name(NodeKind kind) {
    auto it = kind_names().find(static_cast<int>(kind));
    return it == kind_names().end() ? "unk" : it->second;
}

NodeKind kind_from_name(const std::string& name) {
    static const std::map<std::string, NodeKind> lookup = [] {
        std::map<std::string, NodeKind> m;
        for (const auto& [id, nm] : kind_names()) m[nm] = static_cast<NodeKind>(id);
        return m;
    }();
    auto it = lookup.find(name);
    return it == lookup.end() ? NodeKind::Unknown : it->second;
}

void CodeGraph::validate(int n_lines) const {
    int n = node_count();
    check(n > 0, "graph: empty node list");
    for (const auto& [s, d] : ast_edges)
        check(s >= 0 && s < n && d >= 0 && d < n, "graph: ast edge endpoint out of range");
    for (const auto& [s, d] : cfg_edges)
        check(s >= 0 && s < n && d >= 0 && d < n, "graph: cfg edge endpoint out of range");

    // forest: every node has at most one AST parent, and parent index < child
    // index (pre-order flattening), which rules out cycles
    std::vector<int> parent(nodes.size(), -1);
    for (const auto& [s, d] : ast_edges) {
        check(parent[d] == -1, "graph: node has two AST parents");
        check(s < d, "graph: AST edge does not respect pre-order");
        parent[d] = s;
    }
    for (const auto& node : nodes)
        check(node.line >= 0 && node.line < std::max(n_lines, 1),
              "graph: node line out of range: " + std::to_string(node.line));
}

std::string CodeGraph::to_json() const {
    json j;
    j["nodes"] = json::array();
    for (const auto& n : nodes)
        j["nodes"].push_back({{"kind", kind_name(n.kind)}, {"token", n.token}, {"line", n.line}});
    j["ast_edges"] = json::array();
    for (const auto& [s, d] : ast_edges) j["ast_edges"].push_back({s, d});
    j["cfg_edges"] = json::array();
    for (const auto& [s, d] : cfg_edges) j["cfg_edges"].push_back({s, d});
    return j.dump();
}

CodeGraph CodeGraph::from_json(const std::string& text) {
    json j = json::parse(text);
    CodeGraph g;
    int idx = 0;
    for (const auto& n : j.at("nodes")) {
        g.nodes.push_back({idx++, kind_from_name(n.at("kind").get<std::string>()),
                           n.at("token").get<std::string>(), n.at("line").get<int>()});
    }
    for (const auto& e : j.at("ast_edges")) g.ast_edges.push_back({e[0].get<int>(), e[1].get<int>()});
    for (const auto& e : j.at("cfg_edges")) g.cfg_edges.push_back({e[0].get<int>(), e[1].get<int>()});
    return g;
}

CodeGraph extract_graph(const std::string& source) {
    if (trim(source).empty()) throw std::invalid_argument("extract_graph: empty source");
    std::vector<Token> tokens = lex(source);
    if (tokens.empty()) throw ExtractionError("no function definition recognized: no tokens");

    FunctionParser parser(tokens);
    NodePtr root = parser.parse();

    // synthetic exit node; part of the shared node set, isolated in the AST
    int last_line = tokens.back().line;
    AstNode exit_node(NodeKind::Exit, "", last_line);

    AstNode* body = nullptr;
    for (auto& child : root->children)
        if (child->kind == NodeKind::CompoundStatement) body = child.get();

    std::vector<Edge> cfg_pairs;
    CfgBuilder cfg(cfg_pairs, &exit_node);
    cfg.build(root.get(), body);

    CodeGraph g;
    std::map<const AstNode*, int> index_of;
    flatten(root.get(), g.nodes, g.ast_edges, index_of);
    int exit_idx = static_cast<int>(g.nodes.size());
    index_of[&exit_node] = exit_idx;
    g.nodes.push_back({exit_idx, NodeKind::Exit, "", last_line});

    for (const auto& [from, targets] : cfg.edge_targets())
        for (AstNode* to : targets) g.cfg_edges.push_back({index_of.at(from), index_of.at(to)});
    std::sort(g.cfg_edges.begin(), g.cfg_edges.end());

    return g;
}

}  // namespace dcvd
