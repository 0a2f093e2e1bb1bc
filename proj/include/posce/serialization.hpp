#pragma once

// Binary containers for checkpoints and PosCE tables.
//
// Layout (both kinds):
//   8-byte magic ("PSCECKPT" or "PSCETABL")
//   u32 format version, little endian
//   u64 header length, then a UTF-8 JSON header
//   raw little-endian IEEE-754 doubles for every tensor listed in the header
//
// Tensors are stored bit-for-bit, so save -> load -> save is byte-identical.

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "posce/posce_table.hpp"
#include "posce/textmodel.hpp"

namespace posce {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kTableVersion = 1;

struct Checkpoint {
    std::shared_ptr<const EmbeddingTable> embeddings;
    ClassifierParams params;
    std::size_t max_len = 0;
    /// Effective configuration of the run that produced the checkpoint.
    nlohmann::json config = nlohmann::json::object();

    Classifier classifier() const { return Classifier(embeddings, params, max_len); }
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_table(std::ostream& out, const PosceTable& table,
                 const nlohmann::json& config = nlohmann::json::object());
PosceTable read_table(std::istream& in, nlohmann::json* config = nullptr);
void save_table(const std::filesystem::path& path, const PosceTable& table,
                const nlohmann::json& config = nlohmann::json::object());
PosceTable load_table(const std::filesystem::path& path, nlohmann::json* config = nullptr);

/// Human-readable dump: comment header, then `t<TAB>count<TAB>v0<TAB>...`.
void export_table_tsv(std::ostream& out, const PosceTable& table);

}  // namespace posce
