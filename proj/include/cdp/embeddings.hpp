#ifndef CDP_EMBEDDINGS_HPP
#define CDP_EMBEDDINGS_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdp/perturbation.hpp"
#include "cdp/treebank.hpp"

namespace cdp {

/// T x d word-level representations, one row per word.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using EmbeddingMatrix = Matrix<float>;

struct EmbeddingRequest {
  std::vector<std::string> tokens;
  int layer = 0;

  bool operator==(const EmbeddingRequest&) const = default;
};

/// Lowercase hex SHA-256 of decimal(layer) + 0x1E + tokens joined by 0x1F.
std::string content_hash(const EmbeddingRequest& request);

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sequence absent from a file archive.
class MissingEmbeddingError : public EmbeddingError {
 public:
  explicit MissingEmbeddingError(std::string hash)
      : EmbeddingError("no embedding for sequence " + hash), hash_(std::move(hash)) {}
  const std::string& hash() const { return hash_; }

 private:
  std::string hash_;
};

/// Network-level failure; safe to retry.
class TransportError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

/// The peer answered but the answer violates the /embed protocol.
class ProtocolError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

/// Provider contract: one matrix per request, in request order, with
/// matrix.rows() == request.tokens.size(). Implementations must be safe to
/// call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<EmbeddingMatrix> embed_batch(std::span<const EmbeddingRequest> requests) = 0;
  virtual std::string describe() const = 0;
};

using ProviderPtr = std::shared_ptr<EmbeddingProvider>;

/// Model-free backend for tests. Each row mixes a vector seeded by the word
/// alone with one seeded by (word, position, sequence hash), so identical
/// words stay correlated across perturbed sequences.
/// Values sit on a 2^-20 grid, so multiplying a matrix by small constants is exact in float.
class StubProvider final : public EmbeddingProvider {
 public:
  explicit StubProvider(std::uint64_t seed = 0, int dim = 16, int num_layers = 12);

  std::vector<EmbeddingMatrix> embed_batch(std::span<const EmbeddingRequest> requests) override;
  std::string describe() const override;

  EmbeddingMatrix embed(const EmbeddingRequest& request) const;
  int dim() const { return dim_; }

 private:
  std::uint64_t seed_;
  int dim_;
  int num_layers_;
};

/// Thread-safe LRU cache in front of another provider, keyed by content hash.
class CachingProvider final : public EmbeddingProvider {
 public:
  CachingProvider(ProviderPtr inner, std::size_t capacity);

  std::vector<EmbeddingMatrix> embed_batch(std::span<const EmbeddingRequest> requests) override;
  std::string describe() const override;

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  using Entry = std::pair<std::string, EmbeddingMatrix>;

  ProviderPtr inner_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> lru_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

enum class BackendKind { FileArchive, HttpService, Stub };

struct BackendConfig {
  BackendKind kind = BackendKind::Stub;
  std::string location;  // archive directory, base URL, or stub seed
  std::size_t batch_size = 32;
  std::size_t cache_capacity = 0;  // 0 disables caching

  /// Parses "file:PATH", "http:URL" (or a bare http:// URL), "stub" or "stub:SEED".
  static BackendConfig parse(const std::string& text);
  std::string to_string() const;
};

ProviderPtr make_provider(const BackendConfig& config);

/// One unique sequence to embed offline.
struct ManifestEntry {
  std::string hash;
  std::vector<std::string> tokens;
  int layer = 0;
};

/// Streams a deduplicated request manifest (JSON) to an output stream.
class RequestExporter {
 public:
  RequestExporter(std::ostream& out, std::string mask_placeholder);
  ~RequestExporter();

  RequestExporter(const RequestExporter&) = delete;
  RequestExporter& operator=(const RequestExporter&) = delete;

  /// Adds the sentence and all of its perturbed sequences. Returns the number of new entries.
  std::size_t add_sentence(std::span<const std::string> sentence, KindSet kinds, int layer,
                           const PlanOptions& options = {});
  bool add(const EmbeddingRequest& request);
  void finish();
  std::size_t size() const { return seen_.size(); }

 private:
  std::ostream& out_;
  std::unordered_set<std::string> seen_;
  bool finished_ = false;
};

/// Unique sequences (original sentences plus every perturbed sequence) in first-seen order.
std::vector<ManifestEntry> export_requests(std::span<const SentenceRecord> corpus, KindSet kinds, int layer,
                                           const PlanOptions& options = {});

std::vector<ManifestEntry> read_request_manifest(std::istream& in);

}  // namespace cdp

#endif  // CDP_EMBEDDINGS_HPP
