#ifndef CDP_HTTP_BACKEND_HPP
#define CDP_HTTP_BACKEND_HPP

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "cdp/embeddings.hpp"

namespace cdp {

// /embed protocol:
//   POST /embed  {"layer": L, "sequences": [[tok, ...], ...], "mask_placeholder": "<mask>"}
//   200          {"dim": d, "matrices": [[[f, ...] x d] x T] per sequence}
//   4xx/5xx      {"error": "..."}
// GET /health returns at least {"model": ..., "num_layers": ..., "dim": ...}.

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{100};
  std::chrono::milliseconds max_delay{2000};
  std::chrono::seconds timeout{120};
};

class HttpProvider final : public EmbeddingProvider {
 public:
  HttpProvider(std::string url, std::size_t batch_size, RetryPolicy retry = {},
               std::string mask_placeholder = std::string(kMaskPlaceholder));

  /// Requests are grouped by layer and sent batch_size sequences per call;
  /// results come back in request order.
  std::vector<EmbeddingMatrix> embed_batch(std::span<const EmbeddingRequest> requests) override;
  std::string describe() const override;

  /// Raw /health body. Throws TransportError or ProtocolError.
  std::string health() const;

  std::size_t calls() const { return calls_; }

 private:
  std::vector<EmbeddingMatrix> post_batch(int layer, const std::vector<const EmbeddingRequest*>& batch);
  std::string send(const std::string& method, const std::string& path, const std::string& body) const;

  std::string scheme_host_port_;
  std::string base_path_;
  std::size_t batch_size_;
  RetryPolicy retry_;
  std::string mask_placeholder_;
  std::atomic<std::size_t> calls_{0};
};

std::shared_ptr<HttpProvider> http_backend_connect(const std::string& url, std::size_t batch_size,
                                                   RetryPolicy retry = {});

struct ServeCheckResult {
  bool ok = false;
  std::string health;               // raw /health body
  std::vector<std::string> problems;
};

/// Pings /health and sends probe sequences containing the mask placeholder
/// and separators, checking the row-count and dimension contract.
ServeCheckResult serve_check(const std::string& url, int layer = 0);

}  // namespace cdp

#endif  // CDP_HTTP_BACKEND_HPP
