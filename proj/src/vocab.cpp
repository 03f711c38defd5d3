#include "dcvd/vocab.hpp"

#include "dcvd/util.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace dcvd {

Vocabulary::Vocabulary() {
    terms_ = {"<pad>", "<unk>", "<bos>"};
    for (int i = 0; i < static_cast<int>(terms_.size()); ++i) index_[terms_[i]] = i;
}

void Vocabulary::add_terms(const std::vector<std::string>& terms) {
    if (finalized_) throw std::logic_error("Vocabulary: add_terms after finalize");
    for (const auto& t : terms) counts_[t] += 1;
}

void Vocabulary::finalize(std::size_t max_size) {
    if (finalized_) return;
    // order by count desc, then lexicographic, for a deterministic table
    std::vector<std::pair<std::string, std::size_t>> items(counts_.begin(), counts_.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [term, count] : items) {
        if (terms_.size() >= max_size) break;
        if (index_.count(term)) continue;
        index_[term] = static_cast<int>(terms_.size());
        terms_.push_back(term);
    }
    counts_.clear();
    finalized_ = true;
}

int Vocabulary::id_of(const std::string& term) const {
    auto it = index_.find(term);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::term_of(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("Vocabulary: id out of range");
    return terms_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::from_terms(const std::vector<std::string>& terms) {
    Vocabulary v;
    if (terms.size() < 3 || terms[0] != "<pad>" || terms[1] != "<unk>" || terms[2] != "<bos>")
        throw std::invalid_argument("Vocabulary: term list lacks the reserved prefix");
    v.terms_ = terms;
    v.index_.clear();
    for (int i = 0; i < static_cast<int>(terms.size()); ++i) v.index_[terms[static_cast<std::size_t>(i)]] = i;
    v.finalized_ = true;
    return v;
}

std::string normalize_code_token(const Token& token) {
    switch (token.kind) {
        case TokenKind::String: return "<str>";
        case TokenKind::Char: return "<chr>";
        case TokenKind::Number: return token.text.size() <= 4 ? token.text : "<num>";
        default: return token.text;
    }
}

std::vector<std::string> code_terms(const std::string& source) {
    std::vector<std::string> out;
    for (const Token& t : lex(source)) out.push_back(normalize_code_token(t));
    return out;
}

std::vector<std::string> text_terms(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(lowercase(cur));
            cur.clear();
        }
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            cur.push_back(c);
        } else {
            flush();
            if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(std::string(1, c));
        }
    }
    flush();
    return out;
}

std::vector<int> map_tokens_to_lines(const std::string& source, const std::vector<Token>& tokens) {
    std::vector<std::size_t> line_starts = {0};
    for (std::size_t i = 0; i < source.size(); ++i)
        if (source[i] == '\n') line_starts.push_back(i + 1);

    std::vector<int> lines;
    lines.reserve(tokens.size());
    for (const Token& t : tokens) {
        if (t.offset >= source.size())
            throw std::out_of_range("map_tokens_to_lines: token offset " + std::to_string(t.offset) +
                                    " outside source of length " + std::to_string(source.size()));
        auto it = std::upper_bound(line_starts.begin(), line_starts.end(), t.offset);
        lines.push_back(static_cast<int>(it - line_starts.begin()) - 1);
    }
    return lines;
}

TokenizedPair tokenize_pair(const std::string& source, const std::string& explanation,
                            const Vocabulary& vocab, int max_seq) {
    check(max_seq >= 2, "tokenize_pair: max_seq too small");
    TokenizedPair pair;

    std::vector<Token> toks = lex(source);
    std::vector<int> token_lines = map_tokens_to_lines(source, toks);

    pair.code_ids.push_back(Vocabulary::kBos);
    pair.token_line.push_back(-1);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (static_cast<int>(pair.code_ids.size()) >= max_seq) {
            pair.code_truncated = true;
            break;
        }
        pair.code_ids.push_back(vocab.id_of(normalize_code_token(toks[i])));
        pair.token_line.push_back(token_lines[i]);
    }
    pair.code_mask.assign(pair.code_ids.size(), 1.0);

    pair.expl_ids.push_back(Vocabulary::kBos);
    for (const auto& term : text_terms(explanation)) {
        if (static_cast<int>(pair.expl_ids.size()) >= max_seq) {
            pair.expl_truncated = true;
            break;
        }
        pair.expl_ids.push_back(vocab.id_of(term));
    }
    pair.expl_mask.assign(pair.expl_ids.size(), 1.0);

    return pair;
}

}  // namespace dcvd
