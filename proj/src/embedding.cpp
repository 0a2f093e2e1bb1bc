#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "posce/error.hpp"
#include "posce/rng.hpp"
#include "posce/textmodel.hpp"

namespace posce {

namespace {

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool parse_double(std::string_view text, double& out) {
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

bool is_count(std::string_view text) {
    return !text.empty() && text.find_first_not_of("0123456789") == std::string_view::npos;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) fail(ErrorKind::Validation, "embedding dimension must be positive");
    tokens_.emplace_back(kUnkToken);
    index_.emplace(std::string(kUnkToken), 0);
    data_.assign(dim, 0.0);
}

bool EmbeddingTable::add(std::string token, const Vector& row) {
    if (static_cast<std::size_t>(row.size()) != dim_) {
        fail(ErrorKind::Validation, "embedding row for '" + token + "' has dimension " +
                                        std::to_string(row.size()) + ", expected " +
                                        std::to_string(dim_));
    }
    if (token == kUnkToken) {
        std::copy(row.data(), row.data() + dim_, data_.begin());
        return true;
    }
    if (index_.contains(token)) return false;
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    data_.insert(data_.end(), row.data(), row.data() + dim_);
    return true;
}

bool EmbeddingTable::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::size_t EmbeddingTable::index_of(std::string_view token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
}

std::vector<std::size_t> EmbeddingTable::encode(std::span<const std::string> tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(index_of(t));
    return ids;
}

Eigen::Map<const RowMatrix> EmbeddingTable::matrix() const {
    return Eigen::Map<const RowMatrix>(data_.data(), static_cast<Eigen::Index>(size()),
                                       static_cast<Eigen::Index>(dim_));
}

Eigen::Map<const Vector> EmbeddingTable::row(std::size_t index) const {
    if (index >= size()) fail(ErrorKind::Validation, "embedding row out of range");
    return Eigen::Map<const Vector>(data_.data() + index * dim_, static_cast<Eigen::Index>(dim_));
}

EmbeddingTable EmbeddingTable::restricted_to(std::span<const std::string> vocabulary) const {
    EmbeddingTable out(dim_);
    out.add(std::string(kUnkToken), row(0));
    for (const auto& token : vocabulary) {
        const auto it = index_.find(token);
        if (it != index_.end() && it->second != 0) out.add(token, row(it->second));
    }
    return out;
}

EmbeddingTable parse_word_vectors(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    std::optional<EmbeddingTable> table;
    Vector row;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto fields = split_whitespace(line);
        if (fields.empty()) continue;
        // word2vec text files open with a "<count> <dim>" header.
        if (!table && fields.size() == 2 && is_count(fields[0]) && is_count(fields[1])) continue;
        if (!table) {
            if (fields.size() < 2) throw ParseError(line_no, "expected a token followed by its vector");
            // The width is the run of numeric fields at the end of the first row.
            dim = 0;
            double scratch = 0.0;
            while (dim + 1 < fields.size() && parse_double(fields[fields.size() - 1 - dim], scratch)) ++dim;
            if (dim == 0) throw ParseError(line_no, "expected a token followed by its vector");
            table.emplace(dim);
            row.resize(static_cast<Eigen::Index>(dim));
        }
        if (fields.size() < dim + 1) {
            throw ParseError(line_no, "expected " + std::to_string(dim) + " values, found " +
                                          std::to_string(fields.size() - 1));
        }
        // Tokens may themselves contain spaces; the vector is always the tail.
        const std::size_t token_fields = fields.size() - dim;
        std::string token(fields[0]);
        for (std::size_t i = 1; i < token_fields; ++i) {
            token += ' ';
            token += fields[i];
        }
        for (std::size_t j = 0; j < dim; ++j) {
            double value = 0.0;
            const auto text = fields[token_fields + j];
            if (!parse_double(text, value) || !std::isfinite(value)) {
                throw ParseError(line_no, "bad vector component '" + std::string(text) + "'");
            }
            row[static_cast<Eigen::Index>(j)] = value;
        }
        table->add(std::move(token), row);
    }
    if (!table) fail(ErrorKind::Parse, "word-vector file holds no vectors");
    return std::move(*table);
}

EmbeddingTable load_word_vectors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open word-vector file " + path.string());
    try {
        return parse_word_vectors(in);
    } catch (const ParseError& e) {
        throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_word_vectors(std::ostream& out, const EmbeddingTable& table) {
    const auto m = table.matrix();
    std::ostringstream buf;
    buf << std::setprecision(17);
    for (std::size_t i = 0; i < table.size(); ++i) {
        buf << table.token(i);
        for (Eigen::Index j = 0; j < m.cols(); ++j) buf << ' ' << m(static_cast<Eigen::Index>(i), j);
        buf << '\n';
    }
    out << buf.str();
}

EmbeddingTable random_embeddings(std::span<const std::string> vocabulary, std::size_t dim,
                                 std::uint64_t seed, double scale) {
    EmbeddingTable table(dim);
    Rng rng(seed);
    Vector row(static_cast<Eigen::Index>(dim));
    for (const auto& token : vocabulary) {
        for (auto& v : row) v = scale * rng.normal();
        table.add(token, row);
    }
    return table;
}

}  // namespace posce
