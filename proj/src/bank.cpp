// SPDX-License-Identifier: Apache-2.0
#include "hproto/bank.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "hproto/error.hpp"
#include "json.hpp"

namespace hproto {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void check_header(const BankHeader& h) {
  if (h.version != kBankVersion)
    throw ValidationError("unsupported bank version " + std::to_string(h.version));
  if (h.num_layers < 1 || h.hidden_dim < 1)
    throw ValidationError("bank needs at least one layer and one dimension");
  if (h.reserved != 0) throw ValidationError("reserved header field must be 0");
}

void check_record(const SampleRecord& r, const BankHeader& h) {
  const std::size_t expect = std::size_t(h.num_layers) * h.hidden_dim;
  if (r.vectors.size() != expect) {
    throw ValidationError("sample " + std::to_string(r.sample_id) + " has " +
                          std::to_string(r.vectors.size()) + " values, expected " +
                          std::to_string(expect));
  }
  if (r.label > 1)
    throw ValidationError("sample " + std::to_string(r.sample_id) + " has label " +
                          std::to_string(r.label));
  for (float v : r.vectors) {
    if (!std::isfinite(v))
      throw ValidationError("sample " + std::to_string(r.sample_id) + " has a non-finite value");
  }
}

}  // namespace

const char* to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + s + "'");
}

const SampleMeta* EmbeddingBank::find_meta(std::uint64_t id) const {
  auto it = meta.find(id);
  return it == meta.end() ? nullptr : &it->second;
}

std::uint64_t write_bank(std::span<const SampleRecord> samples, const BankHeader& header,
                         const std::filesystem::path& path) {
  check_header(header);
  if (header.num_samples != samples.size())
    throw ValidationError("header declares " + std::to_string(header.num_samples) +
                          " samples, got " + std::to_string(samples.size()));

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(samples.size());
  for (const auto& r : samples) {
    check_record(r, header);
    if (!seen.insert(r.sample_id).second)
      throw ValidationError("duplicate sample_id " + std::to_string(r.sample_id));
  }

  std::string buf;
  buf.reserve(header.file_bytes());
  buf.append(kBankMagic, 4);
  put_u32(buf, header.version);
  put_u32(buf, header.num_layers);
  put_u32(buf, header.hidden_dim);
  put_u64(buf, header.num_samples);
  put_u64(buf, header.reserved);
  for (const auto& r : samples) {
    put_u64(buf, r.sample_id);
    buf.push_back(static_cast<char>(r.label));
    buf.append(7, '\0');
    for (float v : r.vectors) put_u32(buf, std::bit_cast<std::uint32_t>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed for " + path.string());
  return buf.size();
}

std::uint64_t write_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  BankHeader h = bank.header;
  h.num_samples = bank.records.size();
  return write_bank(bank.records, h, path);
}

EmbeddingBank read_bank(const std::filesystem::path& path, bool load_meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open bank " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::string where = path.string();

  if (buf.size() < kHeaderBytes) throw FormatError("truncated bank header in " + where);
  if (std::memcmp(p, kBankMagic, 4) != 0) throw FormatError("bad magic in " + where);

  EmbeddingBank bank;
  BankHeader& h = bank.header;
  h.version = get_u32(p + 4);
  h.num_layers = get_u32(p + 8);
  h.hidden_dim = get_u32(p + 12);
  h.num_samples = get_u64(p + 16);
  h.reserved = get_u64(p + 24);
  if (h.version != kBankVersion)
    throw FormatError("unsupported bank version " + std::to_string(h.version) + " in " + where);
  if (h.num_layers < 1 || h.hidden_dim < 1)
    throw FormatError("bank header has zero layers or dimensions in " + where);
  if (h.reserved != 0) throw FormatError("nonzero reserved header field in " + where);

  const std::uint64_t rec = h.record_bytes();
  const std::uint64_t payload = buf.size() - kHeaderBytes;
  if (h.num_samples > payload / rec)
    throw FormatError("truncated bank " + where + ": " + std::to_string(buf.size()) +
                      " bytes, expected " + std::to_string(h.file_bytes()));
  if (payload != h.num_samples * rec) throw FormatError("trailing bytes after last record in " + where);

  const std::size_t nvals = std::size_t(h.num_layers) * h.hidden_dim;
  bank.records.resize(h.num_samples);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(h.num_samples);
  const unsigned char* cur = p + kHeaderBytes;
  for (auto& r : bank.records) {
    r.sample_id = get_u64(cur);
    r.label = cur[8];
    const std::string who = "sample " + std::to_string(r.sample_id) + " in " + where;
    if (r.label > 1) throw FormatError("bad label " + std::to_string(r.label) + " for " + who);
    for (int i = 9; i < 16; ++i)
      if (cur[i] != 0) throw FormatError("nonzero record padding for " + who);
    if (!seen.insert(r.sample_id).second) throw FormatError("duplicate " + who);
    r.vectors.resize(nvals);
    const unsigned char* v = cur + kRecordPrefixBytes;
    for (std::size_t i = 0; i < nvals; ++i) {
      const float f = std::bit_cast<float>(get_u32(v + 4 * i));
      if (!std::isfinite(f)) throw FormatError("non-finite value (NaN/Inf) for " + who);
      r.vectors[i] = f;
    }
    cur += rec;
  }

  if (load_meta) {
    const auto mp = meta_path_for(path);
    if (std::filesystem::exists(mp)) {
      for (auto& m : read_meta(mp)) {
        if (!seen.count(m.sample_id))
          throw FormatError("metadata references unknown sample_id " +
                            std::to_string(m.sample_id) + " in " + mp.string());
        bank.meta.emplace(m.sample_id, std::move(m));
      }
    }
  }
  return bank;
}

std::filesystem::path meta_path_for(const std::filesystem::path& bank_path) {
  return std::filesystem::path(bank_path.string() + ".meta.jsonl");
}

std::vector<SampleMeta> read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open metadata " + path.string());
  std::vector<SampleMeta> out;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      SampleMeta m;
      m.sample_id = j.at("sample_id").get<std::uint64_t>();
      m.split = parse_split(j.at("split").get<std::string>());
      if (j.contains("category") && !j["category"].is_null())
        m.category = j["category"].get<std::string>();
      if (j.contains("n_tokens") && !j["n_tokens"].is_null()) {
        const auto t = j["n_tokens"].get<std::int64_t>();
        if (t < 1) throw FormatError("n_tokens must be positive");
        m.n_tokens = static_cast<std::uint32_t>(t);
      }
      if (j.contains("source") && !j["source"].is_null()) m.source = j["source"].get<std::string>();
      if (!seen.insert(m.sample_id).second) throw FormatError("duplicate sample_id");
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad metadata at " + where + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw FormatError("bad metadata at " + where + ": " + e.what());
    }
  }
  return out;
}

void write_meta(const EmbeddingBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  for (const auto& r : bank.records) {
    const SampleMeta* m = bank.find_meta(r.sample_id);
    if (!m) continue;
    nlohmann::json j;
    j["sample_id"] = m->sample_id;
    j["split"] = to_string(m->split);
    if (m->category) j["category"] = *m->category;
    if (m->n_tokens) j["n_tokens"] = *m->n_tokens;
    if (m->source) j["source"] = *m->source;
    out << j.dump() << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

EmbeddingBank subset(const EmbeddingBank& bank, const SamplePredicate& pred) {
  EmbeddingBank out;
  out.header = bank.header;
  for (const auto& r : bank.records) {
    const SampleMeta* m = bank.find_meta(r.sample_id);
    if (!pred(r, m)) continue;
    out.records.push_back(r);
    if (m) out.meta.emplace(r.sample_id, *m);
  }
  out.header.num_samples = out.records.size();
  return out;
}

EmbeddingBank split_subset(const EmbeddingBank& bank, Split split) {
  return subset(bank, [split](const SampleRecord&, const SampleMeta* m) {
    return m == nullptr || m->split == split;
  });
}

std::vector<std::string> validate_bank(const EmbeddingBank& bank) {
  std::vector<std::string> out;
  const BankHeader& h = bank.header;
  if (h.version != kBankVersion) out.push_back("header: version " + std::to_string(h.version));
  if (h.num_layers < 1) out.push_back("header: num_layers is 0");
  if (h.hidden_dim < 1) out.push_back("header: hidden_dim is 0");
  if (h.reserved != 0) out.push_back("header: reserved field is nonzero");
  if (h.num_samples != bank.records.size())
    out.push_back("header: num_samples " + std::to_string(h.num_samples) + " but " +
                  std::to_string(bank.records.size()) + " records");

  const std::size_t nvals = std::size_t(h.num_layers) * h.hidden_dim;
  std::unordered_set<std::uint64_t> ids;
  for (const auto& r : bank.records) {
    const std::string who = "sample " + std::to_string(r.sample_id);
    if (!ids.insert(r.sample_id).second) out.push_back(who + ": duplicate sample_id");
    if (r.label > 1) out.push_back(who + ": label " + std::to_string(r.label) + " not in {0,1}");
    if (r.vectors.size() != nvals)
      out.push_back(who + ": " + std::to_string(r.vectors.size()) + " values, expected " +
                    std::to_string(nvals));
    for (float v : r.vectors) {
      if (!std::isfinite(v)) {
        out.push_back(who + ": non-finite value");
        break;
      }
    }
  }
  for (const auto& [id, m] : bank.meta) {
    const std::string who = "metadata " + std::to_string(id);
    if (!ids.count(id)) out.push_back(who + ": unknown sample_id");
    if (m.sample_id != id) out.push_back(who + ": key does not match sample_id");
    if (m.n_tokens && *m.n_tokens == 0) out.push_back(who + ": n_tokens must be positive");
  }
  return out;
}

}  // namespace hproto
