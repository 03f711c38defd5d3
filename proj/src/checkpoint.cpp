#include "dcvd/checkpoint.hpp"

#include "dcvd/util.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dcvd {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'V', 'D', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint64_t len = read_u64(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

void write_terms(std::ostream& out, const std::vector<std::string>& terms) {
    write_u64(out, terms.size());
    for (const auto& t : terms) write_string(out, t);
}

std::vector<std::string> read_terms(std::istream& in) {
    std::uint64_t n = read_u64(in);
    std::vector<std::string> terms;
    terms.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) terms.push_back(read_string(in));
    return terms;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_string(out, config_to_text(ckpt.config));
    write_terms(out, ckpt.semantic_terms);
    write_terms(out, ckpt.node_token_terms);
    write_u64(out, static_cast<std::uint64_t>(ckpt.epoch));
    std::uint64_t score_bits;
    std::memcpy(&score_bits, &ckpt.valid_score, 8);
    write_u64(out, score_bits);

    write_u64(out, ckpt.parameters.size());
    for (const auto& [name, value] : ckpt.parameters) {
        write_string(out, name);
        write_u64(out, static_cast<std::uint64_t>(value.rows()));
        write_u64(out, static_cast<std::uint64_t>(value.cols()));
        out.write(reinterpret_cast<const char*>(value.data()),
                  static_cast<std::streamsize>(sizeof(double) * value.size()));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ckpt;
    ckpt.config = parse_config_text(read_string(in));
    ckpt.semantic_terms = read_terms(in);
    ckpt.node_token_terms = read_terms(in);
    ckpt.epoch = static_cast<std::int64_t>(read_u64(in));
    std::uint64_t score_bits = read_u64(in);
    std::memcpy(&ckpt.valid_score, &score_bits, 8);

    std::uint64_t n_params = read_u64(in);
    for (std::uint64_t i = 0; i < n_params; ++i) {
        std::string name = read_string(in);
        std::uint64_t rows = read_u64(in), cols = read_u64(in);
        nn::Mat value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(value.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) throw std::runtime_error("checkpoint: truncated parameter " + name);
        ckpt.parameters.emplace_back(std::move(name), std::move(value));
    }
    return ckpt;
}

std::vector<std::pair<std::string, nn::Mat>> snapshot_parameters(const nn::ParamRegistry& reg) {
    std::vector<std::pair<std::string, nn::Mat>> out;
    out.reserve(reg.size());
    for (const auto& [name, p] : reg.all()) out.emplace_back(name, p.value());
    return out;
}

int overlay_parameters(nn::ParamRegistry& reg,
                       const std::vector<std::pair<std::string, nn::Mat>>& params) {
    int loaded = 0;
    for (const auto& [name, value] : params) {
        if (!reg.has(name)) continue;
        nn::Tensor& p = reg.at(name);
        if (p.rows() != value.rows() || p.cols() != value.cols()) continue;
        p.mutable_value() = value;
        ++loaded;
    }
    return loaded;
}

void restore_parameters(nn::ParamRegistry& reg,
                        const std::vector<std::pair<std::string, nn::Mat>>& params) {
    if (params.size() != reg.size())
        throw std::runtime_error("checkpoint: parameter count mismatch (archive " +
                                 std::to_string(params.size()) + ", model " +
                                 std::to_string(reg.size()) + ")");
    for (const auto& [name, value] : params) {
        nn::Tensor& p = reg.at(name);  // throws on unknown name
        if (p.rows() != value.rows() || p.cols() != value.cols())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        p.mutable_value() = value;
    }
}

}  // namespace dcvd
