#ifndef CDP_ARCHIVE_HPP
#define CDP_ARCHIVE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>

#include "cdp/embeddings.hpp"

namespace cdp {

// On-disk layout of an embedding archive directory:
//
//   manifest.json   {"format": "cdp-embedding-archive", "version": 1,
//                    "blob": "embeddings.f32",
//                    "entries": {HASH: {"tokens": [...], "layer": L, "dim": d,
//                                       "rows": T, "offset": BYTES, "length": BYTES}}}
//   embeddings.f32  little-endian IEEE-754 float32, each entry row-major,
//                   length == rows * dim * 4
//
// HASH is content_hash() of (tokens, layer).

inline constexpr const char* kArchiveManifest = "manifest.json";
inline constexpr const char* kArchiveBlob = "embeddings.f32";
inline constexpr const char* kArchiveFormat = "cdp-embedding-archive";

struct ArchiveEntry {
  std::vector<std::string> tokens;
  int layer = 0;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Read-only memory map of a whole file.
class MappedFile {
 public:
  explicit MappedFile(const std::filesystem::path& path);
  ~MappedFile();
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;

  const std::byte* data() const { return data_; }
  std::size_t size() const { return size_; }

 private:
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

/// Resolves requests by content hash from an archive directory.
class FileArchiveProvider final : public EmbeddingProvider {
 public:
  explicit FileArchiveProvider(const std::filesystem::path& directory);

  std::vector<EmbeddingMatrix> embed_batch(std::span<const EmbeddingRequest> requests) override;
  std::string describe() const override;

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, ArchiveEntry>& entries() const { return entries_; }

 private:
  std::filesystem::path directory_;
  std::map<std::string, ArchiveEntry> entries_;
  std::unique_ptr<MappedFile> blob_;
};

std::shared_ptr<FileArchiveProvider> file_backend_load(const std::filesystem::path& directory);

/// Writes an archive directory. Duplicate sequences are stored once.
class ArchiveWriter {
 public:
  explicit ArchiveWriter(const std::filesystem::path& directory);
  ~ArchiveWriter();

  ArchiveWriter(const ArchiveWriter&) = delete;
  ArchiveWriter& operator=(const ArchiveWriter&) = delete;

  /// Returns false when the sequence was already present.
  bool add(const EmbeddingRequest& request, const EmbeddingMatrix& matrix);
  void finish();

 private:
  std::filesystem::path directory_;
  std::ofstream blob_;
  std::map<std::string, ArchiveEntry> entries_;
  std::size_t offset_ = 0;
  bool finished_ = false;
};

}  // namespace cdp

#endif  // CDP_ARCHIVE_HPP
