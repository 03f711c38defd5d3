#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcvd {

/// Raised when no function definition can be recognized in the input.
struct ExtractionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NodeKind : int {
    Unknown = 0,
    FunctionDefinition,
    Declarator,
    ParameterList,
    Parameter,
    CompoundStatement,
    IfStatement,
    WhileStatement,
    DoStatement,
    ForStatement,
    SwitchStatement,
    CaseClause,
    DefaultClause,
    ReturnStatement,
    BreakStatement,
    ContinueStatement,
    GotoStatement,
    LabeledStatement,
    Declaration,
    ExpressionStatement,
    EmptyStatement,
    Preproc,
    ParenExpression,
    AssignmentExpression,
    ConditionalExpression,
    BinaryExpression,
    UnaryExpression,
    UpdateExpression,
    CastExpression,
    CallExpression,
    ArgumentList,
    SubscriptExpression,
    FieldExpression,
    PointerExpression,
    CommaExpression,
    InitDeclarator,
    InitializerList,
    Identifier,
    NumberLiteral,
    StringLiteral,
    CharLiteral,
    TypeSpecifier,
    ErrorToken,
    Exit,
    kCount
};

const char* kind_name(NodeKind kind);
NodeKind kind_from_name(const std::string& name);  // unknown names map to NodeKind::Unknown
constexpr int kNodeKindCount = static_cast<int>(NodeKind::kCount);

struct GraphNode {
    int index = 0;
    NodeKind kind = NodeKind::Unknown;
    std::string token;  // leading lexeme
    int line = 0;       // 0-based line within the function
};

using Edge = std::pair<int, int>;

/// AST and CFG over one shared node set. ast_edges is a parent->child forest;
/// cfg_edges connect statement-bearing nodes in execution order.
struct CodeGraph {
    std::vector<GraphNode> nodes;
    std::vector<Edge> ast_edges;
    std::vector<Edge> cfg_edges;

    int node_count() const { return static_cast<int>(nodes.size()); }

    /// Checks the shared-node, forest and line-range invariants; throws on violation.
    void validate(int n_lines) const;

    std::string to_json() const;
    static CodeGraph from_json(const std::string& text);
};

/// Parses a C/C++ function and builds its AST plus an overlaid CFG.
/// The grammar is error-tolerant: unknown constructs degrade to generic
/// expression nodes rather than failing the parse.
CodeGraph extract_graph(const std::string& source);

inline int node_count(const CodeGraph& graph) {
    if (graph.nodes.empty()) throw std::invalid_argument("node_count: graph has no nodes");
    return graph.node_count();
}

}  // namespace dcvd
