// SPDX-License-Identifier: Apache-2.0
//
// Embedding bank: a flat little-endian file of per-sample, per-layer hidden
// states.
//
//   header (32 bytes)
//     char[4]  magic     "HPB1"
//     u32      version   1
//     u32      num_layers
//     u32      hidden_dim
//     u64      num_samples
//     u64      reserved  0
//   record (16 + 4*L*d bytes), repeated num_samples times
//     u64      sample_id
//     u8       label     0 = non-hate, 1 = hate
//     u8[7]    padding   zero
//     f32[L*d] vectors   layer-major, layer 1 first
//
// Per-sample metadata lives in a JSON-lines sidecar, `<bank>.meta.jsonl`.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hproto {

inline constexpr char kBankMagic[4] = {'H', 'P', 'B', '1'};
inline constexpr std::uint32_t kBankVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::size_t kRecordPrefixBytes = 16;

struct BankHeader {
  std::uint32_t version = kBankVersion;
  std::uint32_t num_layers = 0;
  std::uint32_t hidden_dim = 0;
  std::uint64_t num_samples = 0;
  std::uint64_t reserved = 0;

  std::size_t record_bytes() const {
    return kRecordPrefixBytes + 4 * std::size_t(num_layers) * hidden_dim;
  }
  std::uint64_t file_bytes() const { return kHeaderBytes + num_samples * record_bytes(); }

  bool operator==(const BankHeader&) const = default;
};

struct SampleRecord {
  std::uint64_t sample_id = 0;
  std::uint8_t label = 0;
  std::vector<float> vectors;  // L*d, layer-major

  // Hidden state after `layer` (1-based).
  std::span<const float> layer(std::uint32_t layer, std::uint32_t dim) const {
    return std::span<const float>(vectors).subspan(std::size_t(layer - 1) * dim, dim);
  }

  bool operator==(const SampleRecord&) const = default;
};

enum class Split { kTrain, kTest };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct SampleMeta {
  std::uint64_t sample_id = 0;
  Split split = Split::kTrain;
  std::optional<std::string> category;
  std::optional<std::uint32_t> n_tokens;
  std::optional<std::string> source;

  bool operator==(const SampleMeta&) const = default;
};

struct EmbeddingBank {
  BankHeader header;
  std::vector<SampleRecord> records;
  std::map<std::uint64_t, SampleMeta> meta;

  std::uint32_t num_layers() const { return header.num_layers; }
  std::uint32_t dim() const { return header.hidden_dim; }
  std::size_t size() const { return records.size(); }
  const SampleMeta* find_meta(std::uint64_t id) const;

  bool operator==(const EmbeddingBank&) const = default;
};

// Writes header and records. Throws ValidationError on dimension mismatch,
// non-finite values, bad labels or duplicate ids; FormatError on IO failure.
std::uint64_t write_bank(std::span<const SampleRecord> samples, const BankHeader& header,
                         const std::filesystem::path& path);
std::uint64_t write_bank(const EmbeddingBank& bank, const std::filesystem::path& path);

// Reads and fully validates a bank file. Loads `<path>.meta.jsonl` when it
// exists and `load_meta` is set. Throws FormatError for any corruption.
EmbeddingBank read_bank(const std::filesystem::path& path, bool load_meta = true);

std::filesystem::path meta_path_for(const std::filesystem::path& bank_path);
std::vector<SampleMeta> read_meta(const std::filesystem::path& path);
void write_meta(const EmbeddingBank& bank, const std::filesystem::path& path);

using SamplePredicate = std::function<bool(const SampleRecord&, const SampleMeta*)>;

// Order-preserving filter. Metadata for dropped samples is dropped too.
EmbeddingBank subset(const EmbeddingBank& bank, const SamplePredicate& pred);

// Samples in the given split. Samples without metadata belong to every split,
// so a bank with no sidecar is used whole for both building and evaluation.
EmbeddingBank split_subset(const EmbeddingBank& bank, Split split);

// Human-readable descriptions of every broken invariant; empty when valid.
std::vector<std::string> validate_bank(const EmbeddingBank& bank);

}  // namespace hproto
