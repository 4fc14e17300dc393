#include "cdp/archive.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>

#include <json.hpp>

namespace cdp {

using json = nlohmann::json;
namespace fs = std::filesystem;

MappedFile::MappedFile(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw EmbeddingError("cannot open " + path.string() + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw EmbeddingError("cannot stat " + path.string());
  }
  size_ = static_cast<std::size_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw EmbeddingError("cannot map " + path.string() + ": " + std::strerror(errno));
    }
    data_ = static_cast<const std::byte*>(p);
  }
  ::close(fd);
}

MappedFile::~MappedFile() {
  if (data_) ::munmap(const_cast<std::byte*>(data_), size_);
}

namespace {

float load_le_float(const std::byte* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

void store_le_float(float v, char* p) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  std::memcpy(p, &bits, sizeof bits);
}

}  // namespace

FileArchiveProvider::FileArchiveProvider(const fs::path& directory) : directory_(directory) {
  std::ifstream in(directory / kArchiveManifest);
  if (!in) throw EmbeddingError("cannot open archive manifest in " + directory.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw EmbeddingError("malformed archive manifest: " + std::string(e.what()));
  }
  if (doc.value("format", "") != kArchiveFormat)
    throw EmbeddingError(directory.string() + " is not an embedding archive");
  blob_ = std::make_unique<MappedFile>(directory / doc.value("blob", std::string(kArchiveBlob)));

  for (const auto& [hash, item] : doc.at("entries").items()) {
    ArchiveEntry e;
    e.tokens = item.at("tokens").get<std::vector<std::string>>();
    e.layer = item.at("layer").get<int>();
    e.dim = item.at("dim").get<std::size_t>();
    e.rows = item.at("rows").get<std::size_t>();
    e.offset = item.at("offset").get<std::size_t>();
    e.length = item.at("length").get<std::size_t>();
    if (e.rows != e.tokens.size() || e.length != e.rows * e.dim * sizeof(float) ||
        e.offset + e.length > blob_->size())
      throw EmbeddingError("archive entry " + hash + " is inconsistent with its blob");
    entries_.emplace(hash, std::move(e));
  }
}

std::vector<EmbeddingMatrix> FileArchiveProvider::embed_batch(std::span<const EmbeddingRequest> requests) {
  std::vector<EmbeddingMatrix> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    const std::string hash = content_hash(r);
    auto it = entries_.find(hash);
    if (it == entries_.end()) throw MissingEmbeddingError(hash);
    const ArchiveEntry& e = it->second;
    EmbeddingMatrix m(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.dim));
    const std::byte* p = blob_->data() + e.offset;
    float* dst = m.data();
    for (std::size_t i = 0; i < e.rows * e.dim; ++i) dst[i] = load_le_float(p + 4 * i);
    out.push_back(std::move(m));
  }
  return out;
}

std::string FileArchiveProvider::describe() const {
  return "file(" + directory_.string() + ", " + std::to_string(entries_.size()) + " entries)";
}

std::shared_ptr<FileArchiveProvider> file_backend_load(const fs::path& directory) {
  return std::make_shared<FileArchiveProvider>(directory);
}

ArchiveWriter::ArchiveWriter(const fs::path& directory) : directory_(directory) {
  fs::create_directories(directory);
  blob_.open(directory / kArchiveBlob, std::ios::binary | std::ios::trunc);
  if (!blob_) throw EmbeddingError("cannot create " + (directory / kArchiveBlob).string());
}

ArchiveWriter::~ArchiveWriter() {
  try {
    finish();
  } catch (...) {
  }
}

bool ArchiveWriter::add(const EmbeddingRequest& request, const EmbeddingMatrix& matrix) {
  if (finished_) throw std::logic_error("ArchiveWriter::add after finish");
  if (static_cast<std::size_t>(matrix.rows()) != request.tokens.size())
    throw std::invalid_argument("matrix has " + std::to_string(matrix.rows()) + " rows for " +
                                std::to_string(request.tokens.size()) + " tokens");
  std::string hash = content_hash(request);
  if (entries_.contains(hash)) return false;

  const std::size_t count = static_cast<std::size_t>(matrix.size());
  std::vector<char> bytes(count * sizeof(float));
  for (std::size_t i = 0; i < count; ++i) store_le_float(matrix.data()[i], bytes.data() + 4 * i);
  blob_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!blob_) throw EmbeddingError("write failed for " + (directory_ / kArchiveBlob).string());

  entries_.emplace(std::move(hash), ArchiveEntry{request.tokens, request.layer,
                                                 static_cast<std::size_t>(matrix.cols()),
                                                 static_cast<std::size_t>(matrix.rows()), offset_, bytes.size()});
  offset_ += bytes.size();
  return true;
}

void ArchiveWriter::finish() {
  if (finished_) return;
  finished_ = true;
  blob_.close();
  json entries = json::object();
  for (const auto& [hash, e] : entries_) {
    entries[hash] = {{"tokens", e.tokens}, {"layer", e.layer}, {"dim", e.dim},
                     {"rows", e.rows},     {"offset", e.offset}, {"length", e.length}};
  }
  json doc{{"format", kArchiveFormat}, {"version", 1}, {"blob", kArchiveBlob}, {"entries", std::move(entries)}};
  std::ofstream out(directory_ / kArchiveManifest, std::ios::trunc);
  out << doc.dump(1) << '\n';
  if (!out) throw EmbeddingError("cannot write " + (directory_ / kArchiveManifest).string());
}

}  // namespace cdp
