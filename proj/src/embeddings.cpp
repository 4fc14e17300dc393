#include "cdp/embeddings.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>

#include <json.hpp>

#include "cdp/archive.hpp"
#include "cdp/http_backend.hpp"

namespace cdp {

using json = nlohmann::json;

std::string content_hash(const EmbeddingRequest& request) {
  std::string payload = std::to_string(request.layer);
  payload += '\x1e';
  for (std::size_t i = 0; i < request.tokens.size(); ++i) {
    if (i) payload += '\x1f';
    payload += request.tokens[i];
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(payload.data(), payload.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1)
    throw EmbeddingError("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Stub backend

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(state);
}

// Uniform in [-1, 1).
double unit(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0; }

}  // namespace

StubProvider::StubProvider(std::uint64_t seed, int dim, int num_layers)
    : seed_(seed), dim_(dim), num_layers_(num_layers) {
  if (dim <= 0) throw std::invalid_argument("stub dim must be positive");
}

EmbeddingMatrix StubProvider::embed(const EmbeddingRequest& request) const {
  if (request.layer < 0 || request.layer > num_layers_)
    throw EmbeddingError("layer " + std::to_string(request.layer) + " outside stub range [0, " +
                         std::to_string(num_layers_) + "]");
  std::uint64_t sequence = fnv1a(std::to_string(request.layer));
  for (const auto& token : request.tokens) sequence = fnv1a(token, fnv1a("\x1f", sequence));

  const std::uint64_t layer_seed = mix(seed_, static_cast<std::uint64_t>(request.layer));
  EmbeddingMatrix out(static_cast<Eigen::Index>(request.tokens.size()), dim_);
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    std::uint64_t word_state = mix(layer_seed, fnv1a(request.tokens[t]));
    std::uint64_t context_state = mix(mix(word_state, static_cast<std::uint64_t>(t)), sequence);
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(t, j) = static_cast<float>(std::round((unit(word_state) + 0.5 * unit(context_state)) * 0x1.0p20) * 0x1.0p-20);
  }
  return out;
}

std::vector<EmbeddingMatrix> StubProvider::embed_batch(std::span<const EmbeddingRequest> requests) {
  std::vector<EmbeddingMatrix> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(embed(r));
  return out;
}

std::string StubProvider::describe() const {
  return "stub(seed=" + std::to_string(seed_) + ", dim=" + std::to_string(dim_) +
         ", layers=" + std::to_string(num_layers_) + ")";
}

// ---------------------------------------------------------------------------
// Cache

CachingProvider::CachingProvider(ProviderPtr inner, std::size_t capacity)
    : inner_(std::move(inner)), capacity_(capacity) {
  if (!inner_) throw std::invalid_argument("CachingProvider needs an inner provider");
}

std::vector<EmbeddingMatrix> CachingProvider::embed_batch(std::span<const EmbeddingRequest> requests) {
  std::vector<EmbeddingMatrix> out(requests.size());
  std::vector<std::string> keys(requests.size());
  std::vector<EmbeddingRequest> missing;
  std::map<std::string, std::size_t> missing_slot;
  std::vector<std::ptrdiff_t> from_missing(requests.size(), -1);

  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < requests.size(); ++i) {
      keys[i] = content_hash(requests[i]);
      if (auto it = index_.find(keys[i]); it != index_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        out[i] = it->second->second;
        ++hits_;
        continue;
      }
      auto [slot, inserted] = missing_slot.emplace(keys[i], missing.size());
      if (inserted) {
        missing.push_back(requests[i]);
        ++misses_;
      } else {
        ++hits_;
      }
      from_missing[i] = static_cast<std::ptrdiff_t>(slot->second);
    }
  }
  if (missing.empty()) return out;

  auto fetched = inner_->embed_batch(missing);
  if (fetched.size() != missing.size())
    throw ProtocolError("inner provider returned " + std::to_string(fetched.size()) + " matrices for " +
                        std::to_string(missing.size()) + " requests");

  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (from_missing[i] >= 0) out[i] = fetched[static_cast<std::size_t>(from_missing[i])];
  }
  for (const auto& [key, slot] : missing_slot) {
    if (capacity_ == 0 || index_.contains(key)) continue;
    lru_.emplace_front(key, std::move(fetched[slot]));
    index_[key] = lru_.begin();
    if (lru_.size() > capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
  }
  return out;
}

std::string CachingProvider::describe() const {
  return "cache(" + std::to_string(capacity_) + ") -> " + inner_->describe();
}

std::size_t CachingProvider::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t CachingProvider::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

// ---------------------------------------------------------------------------
// Backend selection

BackendConfig BackendConfig::parse(const std::string& text) {
  BackendConfig config;
  auto starts = [&](std::string_view prefix) { return text.starts_with(prefix); };
  if (starts("http://") || starts("https://")) {
    config.kind = BackendKind::HttpService;
    config.location = text;
  } else if (starts("http:")) {
    config.kind = BackendKind::HttpService;
    config.location = text.substr(5);
    if (!config.location.starts_with("http://") && !config.location.starts_with("https://"))
      config.location = "http://" + config.location;
  } else if (starts("file:")) {
    config.kind = BackendKind::FileArchive;
    config.location = text.substr(5);
  } else if (text == "stub" || starts("stub:")) {
    config.kind = BackendKind::Stub;
    config.location = text == "stub" ? "0" : text.substr(5);
    if (config.location.empty() ||
        config.location.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("stub seed must be a non-negative integer: '" + text + "'");
  } else {
    throw std::invalid_argument("unknown backend '" + text + "' (expected file:PATH, http:URL or stub[:SEED])");
  }
  if (config.location.empty()) throw std::invalid_argument("backend '" + text + "' has no location");
  return config;
}

std::string BackendConfig::to_string() const {
  switch (kind) {
    case BackendKind::FileArchive: return "file:" + location;
    case BackendKind::HttpService: return "http:" + location;
    case BackendKind::Stub: return "stub:" + location;
  }
  return location;
}

ProviderPtr make_provider(const BackendConfig& config) {
  if (config.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  ProviderPtr base;
  switch (config.kind) {
    case BackendKind::FileArchive: base = file_backend_load(config.location); break;
    case BackendKind::HttpService: base = http_backend_connect(config.location, config.batch_size); break;
    case BackendKind::Stub: base = std::make_shared<StubProvider>(std::stoull(config.location)); break;
  }
  if (config.cache_capacity > 0) return std::make_shared<CachingProvider>(base, config.cache_capacity);
  return base;
}

// ---------------------------------------------------------------------------
// Request manifests

namespace {

template <typename Fn>
void for_each_sequence(std::span<const std::string> sentence, KindSet kinds, int layer,
                       const PlanOptions& options, Fn&& fn) {
  fn(EmbeddingRequest{{sentence.begin(), sentence.end()}, layer});
  if (sentence.size() < 2) return;
  for (auto& [span, plans] : plans_for_sentence(sentence, kinds, options)) {
    for (auto& plan : plans) fn(EmbeddingRequest{std::move(plan.tokens), layer});
  }
}

}  // namespace

RequestExporter::RequestExporter(std::ostream& out, std::string mask_placeholder) : out_(out) {
  out_ << "{\"format\":\"cdp-embedding-requests\",\"version\":1,\"mask_placeholder\":"
       << json(std::move(mask_placeholder)).dump() << ",\"requests\":[";
}

RequestExporter::~RequestExporter() {
  try {
    finish();
  } catch (...) {
  }
}

bool RequestExporter::add(const EmbeddingRequest& request) {
  if (finished_) throw std::logic_error("RequestExporter::add after finish");
  std::string hash = content_hash(request);
  if (!seen_.insert(hash).second) return false;
  json entry{{"hash", hash}, {"layer", request.layer}, {"tokens", request.tokens}};
  out_ << (seen_.size() == 1 ? "\n" : ",\n") << entry.dump();
  return true;
}

std::size_t RequestExporter::add_sentence(std::span<const std::string> sentence, KindSet kinds, int layer,
                                          const PlanOptions& options) {
  std::size_t added = 0;
  for_each_sequence(sentence, kinds, layer, options, [&](const EmbeddingRequest& r) { added += add(r); });
  return added;
}

void RequestExporter::finish() {
  if (finished_) return;
  finished_ = true;
  out_ << "\n]}\n";
  out_.flush();
}

std::vector<ManifestEntry> export_requests(std::span<const SentenceRecord> corpus, KindSet kinds, int layer,
                                           const PlanOptions& options) {
  std::vector<ManifestEntry> out;
  std::unordered_set<std::string> seen;
  for (const auto& rec : corpus) {
    const auto words = token_texts(rec.tokens);
    for_each_sequence(words, kinds, layer, options, [&](EmbeddingRequest r) {
      std::string hash = content_hash(r);
      if (seen.insert(hash).second) out.push_back({std::move(hash), std::move(r.tokens), r.layer});
    });
  }
  return out;
}

std::vector<ManifestEntry> read_request_manifest(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw EmbeddingError(std::string("malformed request manifest: ") + e.what());
  }
  std::vector<ManifestEntry> out;
  for (const auto& item : doc.at("requests")) {
    ManifestEntry entry{item.at("hash").get<std::string>(), item.at("tokens").get<std::vector<std::string>>(),
                        item.at("layer").get<int>()};
    if (content_hash({entry.tokens, entry.layer}) != entry.hash)
      throw EmbeddingError("request manifest hash mismatch for " + entry.hash);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace cdp
