#pragma once

#include "dcvd/lexer.hpp"

#include <map>
#include <string>
#include <vector>

namespace dcvd {

/// Joint token vocabulary for code tokens and explanation words; one table
/// backs both streams so their embeddings live in the same space.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;

    Vocabulary();

    /// Adds every token of every text; call with the training corpus only.
    void add_terms(const std::vector<std::string>& terms);
    void finalize(std::size_t max_size);

    int id_of(const std::string& term) const;  // kUnk when absent
    const std::string& term_of(int id) const;
    int size() const { return static_cast<int>(terms_.size()); }
    bool finalized() const { return finalized_; }

    const std::vector<std::string>& terms() const { return terms_; }
    static Vocabulary from_terms(const std::vector<std::string>& terms);

private:
    std::vector<std::string> terms_;
    std::map<std::string, int> index_;
    std::map<std::string, std::size_t> counts_;
    bool finalized_ = false;
};

/// Code token texts for embedding: literals are normalized so the vocabulary
/// does not fill up with one-off strings.
std::string normalize_code_token(const Token& token);
std::vector<std::string> code_terms(const std::string& source);

/// Explanation text terms: lowercased words plus punctuation marks.
std::vector<std::string> text_terms(const std::string& text);

/// Line index of each token's starting character, derived from offsets.
/// Throws if any offset lies outside the source.
std::vector<int> map_tokens_to_lines(const std::string& source, const std::vector<Token>& tokens);

/// Code and explanation id sequences with masks and a token->line map.
/// Sequences are truncated to max_seq keeping the head; element 0 is BOS and
/// maps to no line (-1).
struct TokenizedPair {
    std::vector<int> code_ids;
    std::vector<double> code_mask;
    std::vector<int> token_line;  // -1 for BOS / padding
    std::vector<int> expl_ids;
    std::vector<double> expl_mask;
    bool code_truncated = false;
    bool expl_truncated = false;
};

TokenizedPair tokenize_pair(const std::string& source, const std::string& explanation,
                            const Vocabulary& vocab, int max_seq);

}  // namespace dcvd
