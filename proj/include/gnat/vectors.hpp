#pragma once

// Precomputed vector resources for the embedding scorers.
//
// Embedding file layout (all integers little-endian u32):
//   "GNATEMB1" | version=1 | dim | record count
//   per record: id length | id bytes (UTF-8) | segment index | dim x float32
// Records are written ordered by (doc id, segment index). Every vector must
// have unit L2 norm within 1e-4.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gnat/error.hpp"

namespace gnat {

inline constexpr std::string_view kEmbeddingMagic = "GNATEMB1";
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr double kUnitNormTolerance = 1e-4;

class EmbeddingTable {
 public:
  using Key = std::pair<std::string, std::size_t>;

  explicit EmbeddingTable(std::size_t dim, bool normalized = true)
      : dim_(dim), normalized_(normalized) {
    if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dim must be positive");
  }

  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  std::size_t size() const { return vectors_.size(); }
  const std::map<Key, std::vector<float>>& records() const { return vectors_; }

  void Insert(std::string doc_id, std::size_t index, std::vector<float> vector) {
    if (vector.size() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "vector for (" + doc_id + ", " + std::to_string(index) +
                      ") has length " + std::to_string(vector.size()) +
                      ", expected " + std::to_string(dim_));
    }
    if (normalized_) {
      double sq = 0.0;
      for (float v : vector) sq += static_cast<double>(v) * v;
      if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
        throw Error(ErrorCode::kFormat, "vector for (" + doc_id + ", " +
                                            std::to_string(index) +
                                            ") is not unit-normalized");
      }
    }
    vectors_[Key{std::move(doc_id), index}] = std::move(vector);
  }

  const std::vector<float>* Find(std::string_view doc_id, std::size_t index) const {
    const auto it = vectors_.find(Key{std::string(doc_id), index});
    return it == vectors_.end() ? nullptr : &it->second;
  }

 private:
  std::size_t dim_;
  bool normalized_;
  std::map<Key, std::vector<float>> vectors_;
};

namespace detail {

inline void PutU32(std::string& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((value >> shift) & 0xFF));
  }
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::uint32_t U32() {
    Require(4, "u32");
    std::uint32_t value = 0;
    for (int k = 3; k >= 0; --k) {
      value = (value << 8) | static_cast<unsigned char>(bytes_[pos_ + k]);
    }
    pos_ += 4;
    return value;
  }

  std::string_view Bytes(std::size_t count) {
    Require(count, "byte string");
    const std::string_view view = bytes_.substr(pos_, count);
    pos_ += count;
    return view;
  }

  bool AtEnd() const { return pos_ == bytes_.size(); }
  std::size_t offset() const { return pos_; }

 private:
  void Require(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count) {
      throw Error(ErrorCode::kFormat, source_ + ": truncated " + what +
                                          " at byte offset " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading '" + path.string() + "'");
  return bytes;
}

}  // namespace detail

inline std::string EncodeEmbeddings(const EmbeddingTable& table) {
  std::string out(kEmbeddingMagic);
  detail::PutU32(out, kEmbeddingVersion);
  detail::PutU32(out, static_cast<std::uint32_t>(table.dim()));
  detail::PutU32(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& [key, vector] : table.records()) {
    detail::PutU32(out, static_cast<std::uint32_t>(key.first.size()));
    out += key.first;
    detail::PutU32(out, static_cast<std::uint32_t>(key.second));
    for (float v : vector) detail::PutU32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline EmbeddingTable DecodeEmbeddings(std::string_view bytes,
                                       const std::string& source = "embeddings") {
  detail::ByteReader reader(bytes, source);
  if (reader.Bytes(kEmbeddingMagic.size()) != kEmbeddingMagic) {
    throw Error(ErrorCode::kFormat, source + ": bad magic, expected GNATEMB1");
  }
  const std::uint32_t version = reader.U32();
  if (version != kEmbeddingVersion) {
    throw Error(ErrorCode::kFormat,
                source + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t dim = reader.U32();
  if (dim == 0) throw Error(ErrorCode::kFormat, source + ": dim is zero");
  const std::uint32_t count = reader.U32();
  EmbeddingTable table(dim, /*normalized=*/true);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t id_length = reader.U32();
    std::string doc_id(reader.Bytes(id_length));
    const std::uint32_t index = reader.U32();
    if (table.Find(doc_id, index) != nullptr) {
      throw Error(ErrorCode::kFormat, source + ": duplicate record (" + doc_id +
                                          ", " + std::to_string(index) + ")");
    }
    std::vector<float> vector(dim);
    for (auto& v : vector) {
      v = std::bit_cast<float>(reader.U32());
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kFormat, source + ": non-finite value in record " +
                                            std::to_string(r));
      }
    }
    table.Insert(std::move(doc_id), index, std::move(vector));
  }
  if (!reader.AtEnd()) {
    throw Error(ErrorCode::kFormat, source + ": trailing bytes at offset " +
                                        std::to_string(reader.offset()));
  }
  return table;
}

inline EmbeddingTable LoadEmbeddings(const std::filesystem::path& path) {
  return DecodeEmbeddings(detail::ReadFileBytes(path), path.string());
}

// Writes via a temporary file and rename so a failed write never leaves a
// truncated final file.
inline void WriteEmbeddings(const EmbeddingTable& table,
                            const std::filesystem::path& path) {
  const std::string bytes = EncodeEmbeddings(table);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename to '" + path.string() + "'");
}

class WordVectorTable {
 public:
  explicit WordVectorTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "word vector dim must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  void Insert(std::string token, std::vector<float> vector) {
    if (vector.size() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "word vector for '" + token + "' has length " +
                      std::to_string(vector.size()) + ", expected " +
                      std::to_string(dim_));
    }
    vectors_[std::move(token)] = std::move(vector);
  }

  const std::vector<float>* Find(const std::string& token) const {
    const auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
  }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<float>> vectors_;
};

// Text format, one entry per line: "token v1 v2 ... vdim". The dimension is
// taken from the first entry. A leading "<count> <dim>" header line is
// skipped.
inline WordVectorTable ParseWordVectors(std::string_view text,
                                        const std::string& source = "word vectors") {
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(lines, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<float> values;
    std::string field;
    while (fields >> field) {
      char* end = nullptr;
      const float value = std::strtof(field.c_str(), &end);
      if (end != field.c_str() + field.size() || !std::isfinite(value)) {
        throw Error(ErrorCode::kFormat, source + ":" + std::to_string(line_number) +
                                            ": bad number '" + field + "'");
      }
      values.push_back(value);
    }
    if (line_number == 1 && values.size() == 1 &&
        token.find_first_not_of("0123456789") == std::string::npos) {
      continue;
    }
    entries.emplace_back(std::move(token), std::move(values));
  }
  if (entries.empty() || entries.front().second.empty()) {
    throw Error(ErrorCode::kFormat, source + ": no word vectors found");
  }
  WordVectorTable table(entries.front().second.size());
  for (auto& [token, values] : entries) table.Insert(std::move(token), std::move(values));
  return table;
}

inline WordVectorTable LoadWordVectors(const std::filesystem::path& path) {
  return ParseWordVectors(detail::ReadFileBytes(path), path.string());
}

}  // namespace gnat
