#include "posce/serialization.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "posce/error.hpp"

namespace posce {

namespace {

constexpr std::array<char, 8> kCheckpointMagic = {'P', 'S', 'C', 'E', 'C', 'K', 'P', 'T'};
constexpr std::array<char, 8> kTableMagic = {'P', 'S', 'C', 'E', 'T', 'A', 'B', 'L'};
constexpr std::uint64_t kMaxHeaderBytes = std::uint64_t{1} << 32;

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        fail(ErrorKind::Parse, std::string("truncated container while reading ") + what);
    }
    return value;
}

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t count, const std::string& what) {
    if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)))) {
        fail(ErrorKind::Parse, "truncated container while reading tensor " + what);
    }
}

void write_header(std::ostream& out, const std::array<char, 8>& magic, std::uint32_t version,
                  const nlohmann::json& header) {
    out.write(magic.data(), magic.size());
    put<std::uint32_t>(out, version);
    const std::string text = header.dump();
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

nlohmann::json read_header(std::istream& in, const std::array<char, 8>& magic,
                           std::uint32_t expected_version, const char* kind) {
    std::array<char, 8> seen{};
    if (!in.read(seen.data(), seen.size()) || seen != magic) {
        fail(ErrorKind::Parse, std::string("not a ") + kind + " file (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != expected_version) {
        fail(ErrorKind::Parse, std::string("unsupported ") + kind + " version " + std::to_string(version));
    }
    const auto length = get<std::uint64_t>(in, "header length");
    if (length > kMaxHeaderBytes) fail(ErrorKind::Parse, std::string(kind) + " header is implausibly large");
    std::string text(length, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
        fail(ErrorKind::Parse, std::string("truncated ") + kind + " header");
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad ") + kind + " header: " + e.what());
    }
}

template <typename Tensor>
void read_tensor(std::istream& in, Tensor& t, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
    t.resize(rows, cols);
    read_doubles(in, t.data(), static_cast<std::size_t>(t.size()), name);
}

void read_vector(std::istream& in, Vector& v, Eigen::Index rows, const std::string& name) {
    v.resize(rows);
    read_doubles(in, v.data(), static_cast<std::size_t>(v.size()), name);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    return in;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    if (!ckpt.embeddings) fail(ErrorKind::Validation, "checkpoint has no embeddings");
    ckpt.params.validate();
    const auto k = ckpt.params.input_dim();
    const auto h = ckpt.params.hidden_dim();
    nlohmann::json header{
        {"format", "posce-checkpoint"},
        {"version", kCheckpointVersion},
        {"k", k},
        {"h", h},
        {"max_len", ckpt.max_len},
        {"classes", kClassCount},
        {"vocabulary", ckpt.embeddings->tokens()},
        {"tensors", {"embeddings", "hidden_weight", "hidden_bias", "output_weight", "output_bias",
                     "posce_direction"}},
        {"layout", "column-major for matrices, embeddings row-major"},
        {"config", ckpt.config},
    };
    write_header(out, kCheckpointMagic, kCheckpointVersion, header);
    const auto emb = ckpt.embeddings->matrix();
    write_doubles(out, emb.data(), static_cast<std::size_t>(emb.size()));
    for_each_tensor(
        [&](const auto& t) { write_doubles(out, t.data(), static_cast<std::size_t>(t.size())); },
        ckpt.params);
    if (!out) fail(ErrorKind::Io, "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
    const auto header = read_header(in, kCheckpointMagic, kCheckpointVersion, "checkpoint");
    Checkpoint ckpt;
    std::size_t k = 0, h = 0;
    std::vector<std::string> vocab;
    try {
        k = header.at("k").get<std::size_t>();
        h = header.at("h").get<std::size_t>();
        ckpt.max_len = header.at("max_len").get<std::size_t>();
        vocab = header.at("vocabulary").get<std::vector<std::string>>();
        ckpt.config = header.at("config");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad checkpoint header: ") + e.what());
    }
    if (vocab.empty() || vocab[0] != EmbeddingTable::kUnkToken) {
        fail(ErrorKind::Parse, "checkpoint vocabulary must start with the UNK token");
    }
    std::vector<double> rows(vocab.size() * k);
    read_doubles(in, rows.data(), rows.size(), "embeddings");
    auto table = std::make_shared<EmbeddingTable>(k);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const Vector row = Eigen::Map<const Vector>(rows.data() + i * k, static_cast<Eigen::Index>(k));
        if (!table->add(vocab[i], row) && i != 0) fail(ErrorKind::Parse, "duplicate vocabulary entry '" + vocab[i] + "'");
    }
    ckpt.embeddings = std::move(table);

    const auto ki = static_cast<Eigen::Index>(k);
    const auto hi = static_cast<Eigen::Index>(h);
    const auto ci = static_cast<Eigen::Index>(kClassCount);
    read_tensor(in, ckpt.params.hidden_weight, ki, hi, "hidden_weight");
    read_vector(in, ckpt.params.hidden_bias, hi, "hidden_bias");
    read_tensor(in, ckpt.params.output_weight, hi, ci, "output_weight");
    read_vector(in, ckpt.params.output_bias, ci, "output_bias");
    read_vector(in, ckpt.params.posce_direction, ki, "posce_direction");
    ckpt.params.validate();
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    auto out = open_out(path);
    write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return read_checkpoint(in);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void write_table(std::ostream& out, const PosceTable& table, const nlohmann::json& config) {
    table.validate();
    nlohmann::json header{
        {"format", "posce-table"},
        {"version", kTableVersion},
        {"max_len", table.max_len},
        {"counts", table.counts},
        {"built_at_epoch", table.built_at_epoch},
        {"estimator",
         {{"method", to_string(table.estimator.mode)},
          {"exact_max_players", table.estimator.exact_max_players},
          {"samples", table.estimator.samples},
          {"seed", table.estimator.seed}}},
        {"layout", "profiles row-major, max_len x max_len"},
        {"config", config},
    };
    write_header(out, kTableMagic, kTableVersion, header);
    const RowMatrix rows = table.profiles;
    write_doubles(out, rows.data(), static_cast<std::size_t>(rows.size()));
    if (!out) fail(ErrorKind::Io, "failed writing PosCE table");
}

PosceTable read_table(std::istream& in, nlohmann::json* config) {
    const auto header = read_header(in, kTableMagic, kTableVersion, "PosCE table");
    PosceTable table;
    try {
        table.max_len = header.at("max_len").get<std::size_t>();
        table.counts = header.at("counts").get<std::vector<std::size_t>>();
        table.built_at_epoch = header.at("built_at_epoch").get<int>();
        const auto& e = header.at("estimator");
        table.estimator.mode = parse_estimator_mode(e.at("method").get<std::string>());
        table.estimator.exact_max_players = e.at("exact_max_players").get<std::size_t>();
        table.estimator.samples = e.at("samples").get<std::size_t>();
        table.estimator.seed = e.at("seed").get<std::uint64_t>();
        if (config != nullptr) *config = header.at("config");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad PosCE table header: ") + e.what());
    }
    const auto m = static_cast<Eigen::Index>(table.max_len);
    RowMatrix rows(m, m);
    read_doubles(in, rows.data(), static_cast<std::size_t>(rows.size()), "profiles");
    table.profiles = rows;
    table.validate();
    return table;
}

void save_table(const std::filesystem::path& path, const PosceTable& table, const nlohmann::json& config) {
    auto out = open_out(path);
    write_table(out, table, config);
}

PosceTable load_table(const std::filesystem::path& path, nlohmann::json* config) {
    auto in = open_in(path);
    try {
        return read_table(in, config);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void export_table_tsv(std::ostream& out, const PosceTable& table) {
    std::ostringstream buf;
    buf << "# posce-table v" << kTableVersion << " max_len=" << table.max_len
        << " built_at_epoch=" << table.built_at_epoch
        << " estimator=" << to_string(table.estimator.mode)
        << " samples=" << table.estimator.samples << " seed=" << table.estimator.seed << '\n';
    buf << "t\tcount";
    for (std::size_t i = 0; i < table.max_len; ++i) buf << "\tp" << i;
    buf << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < table.max_len; ++t) {
        buf << t << '\t' << table.counts[t];
        for (std::size_t i = 0; i < table.max_len; ++i) {
            buf << '\t' << table.profiles(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
        }
        buf << '\n';
    }
    out << buf.str();
}

}  // namespace posce
