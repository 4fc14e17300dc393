#include "cdp/http_backend.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace cdp {

using json = nlohmann::json;

namespace {

bool is_transient(int status) { return status == 429 || status == 502 || status == 503 || status == 504; }

std::string error_message(const std::string& body) {
  try {
    auto doc = json::parse(body);
    if (doc.is_object() && doc.contains("error")) return doc["error"].get<std::string>();
  } catch (const json::exception&) {
  }
  return body.substr(0, 200);
}

}  // namespace

HttpProvider::HttpProvider(std::string url, std::size_t batch_size, RetryPolicy retry,
                           std::string mask_placeholder)
    : batch_size_(batch_size), retry_(retry), mask_placeholder_(std::move(mask_placeholder)) {
  if (batch_size_ == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (retry_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  if (!url.starts_with("http://"))
    throw std::invalid_argument("unsupported URL '" + url + "' (only http:// is supported)");
  const auto path_at = url.find('/', 7);
  scheme_host_port_ = url.substr(0, path_at);
  if (path_at != std::string::npos) base_path_ = url.substr(path_at);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::string HttpProvider::describe() const { return "http(" + scheme_host_port_ + base_path_ + ")"; }

std::string HttpProvider::send(const std::string& method, const std::string& path, const std::string& body) const {
  std::string last_error;
  auto delay = retry_.initial_delay;
  for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay = std::min(delay * 2, retry_.max_delay);
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(retry_.timeout);
    client.set_read_timeout(retry_.timeout);
    client.set_write_timeout(retry_.timeout);
    auto res = method == "GET" ? client.Get(base_path_ + path)
                               : client.Post(base_path_ + path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    if (is_transient(res->status)) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + error_message(res->body);
      continue;
    }
    throw ProtocolError(method + " " + path + " returned HTTP " + std::to_string(res->status) + ": " +
                        error_message(res->body));
  }
  throw TransportError(method + " " + scheme_host_port_ + base_path_ + path + " failed after " +
                       std::to_string(retry_.max_attempts) + " attempts: " + last_error);
}

std::string HttpProvider::health() const { return send("GET", "/health", ""); }

std::vector<EmbeddingMatrix> HttpProvider::post_batch(int layer,
                                                      const std::vector<const EmbeddingRequest*>& batch) {
  json sequences = json::array();
  for (const auto* r : batch) sequences.push_back(r->tokens);
  const json body{{"layer", layer}, {"sequences", std::move(sequences)}, {"mask_placeholder", mask_placeholder_}};
  ++calls_;
  const std::string text = send("POST", "/embed", body.dump());

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("/embed response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("matrices") || !doc["matrices"].is_array())
    throw ProtocolError("/embed response lacks dim/matrices");
  const auto dim = doc["dim"].get<long long>();
  const auto& matrices = doc["matrices"];
  if (dim <= 0) throw ProtocolError("/embed response has non-positive dim");
  if (matrices.size() != batch.size())
    throw ProtocolError("/embed returned " + std::to_string(matrices.size()) + " matrices for " +
                        std::to_string(batch.size()) + " sequences");

  std::vector<EmbeddingMatrix> out;
  out.reserve(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& rows = matrices[s];
    if (!rows.is_array() || rows.size() != batch[s]->tokens.size())
      throw ProtocolError("/embed sequence " + std::to_string(s) + ": expected " +
                          std::to_string(batch[s]->tokens.size()) + " rows, got " + std::to_string(rows.size()));
    EmbeddingMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const auto& row = rows[t];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(dim))
        throw ProtocolError("/embed sequence " + std::to_string(s) + " row " + std::to_string(t) +
                            " does not have dim " + std::to_string(dim) + " entries");
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double v = row[j].get<double>();
        if (!std::isfinite(v)) throw ProtocolError("/embed returned a non-finite value");
        m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = static_cast<float>(v);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EmbeddingMatrix> HttpProvider::embed_batch(std::span<const EmbeddingRequest> requests) {
  std::vector<EmbeddingMatrix> out(requests.size());
  std::map<int, std::vector<std::size_t>> by_layer;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (requests[i].tokens.empty()) throw std::invalid_argument("embedding request without tokens");
    by_layer[requests[i].layer].push_back(i);
  }
  for (const auto& [layer, indices] : by_layer) {
    for (std::size_t begin = 0; begin < indices.size(); begin += batch_size_) {
      const std::size_t end = std::min(indices.size(), begin + batch_size_);
      std::vector<const EmbeddingRequest*> batch;
      for (std::size_t k = begin; k < end; ++k) batch.push_back(&requests[indices[k]]);
      auto matrices = post_batch(layer, batch);
      for (std::size_t k = begin; k < end; ++k) out[indices[k]] = std::move(matrices[k - begin]);
    }
  }
  return out;
}

std::shared_ptr<HttpProvider> http_backend_connect(const std::string& url, std::size_t batch_size,
                                                   RetryPolicy retry) {
  return std::make_shared<HttpProvider>(url, batch_size, retry);
}

ServeCheckResult serve_check(const std::string& url, int layer) {
  ServeCheckResult result;
  HttpProvider provider(url, 8, RetryPolicy{2, std::chrono::milliseconds(100), std::chrono::milliseconds(200),
                                            std::chrono::seconds(60)});
  long long health_dim = -1;
  try {
    result.health = provider.health();
    auto doc = json::parse(result.health);
    for (const char* key : {"model", "num_layers", "dim"}) {
      if (!doc.contains(key)) result.problems.push_back(std::string("/health lacks '") + key + "'");
    }
    if (doc.contains("dim") && doc["dim"].is_number_integer()) health_dim = doc["dim"].get<long long>();
    if (doc.contains("num_layers") && doc["num_layers"].is_number_integer() &&
        layer > doc["num_layers"].get<int>())
      result.problems.push_back("probe layer " + std::to_string(layer) + " exceeds num_layers");
  } catch (const std::exception& e) {
    result.problems.push_back(std::string("/health: ") + e.what());
    return result;
  }

  const std::string mask(kMaskPlaceholder);
  const std::vector<EmbeddingRequest> probes{
      {{"the", mask, "sat", "down"}, layer},
      {{"a", ",", "b", ",", "c"}, layer},
      {{mask}, layer},
      {{"unbelievably", "long", "words", "split"}, layer},
  };
  try {
    auto matrices = provider.embed_batch(probes);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      if (static_cast<std::size_t>(matrices[i].rows()) != probes[i].tokens.size())
        result.problems.push_back("probe " + std::to_string(i) + " row count mismatch");
      if (health_dim > 0 && matrices[i].cols() != health_dim)
        result.problems.push_back("probe " + std::to_string(i) + " dim differs from /health");
    }
    auto again = provider.embed_batch(std::span(probes).first(1));
    if (again.front().rows() != matrices.front().rows() || again.front().cols() != matrices.front().cols() ||
        (again.front() - matrices.front()).cwiseAbs().maxCoeff() > 1e-6f)
      result.problems.push_back("repeated request is not deterministic");
  } catch (const std::exception& e) {
    result.problems.push_back(std::string("/embed: ") + e.what());
  }
  result.ok = result.problems.empty();
  return result;
}

}  // namespace cdp
