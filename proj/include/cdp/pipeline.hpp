#ifndef CDP_PIPELINE_HPP
#define CDP_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cdp/chart.hpp"
#include "cdp/distortion.hpp"
#include "cdp/embeddings.hpp"
#include "cdp/perturbation.hpp"
#include "cdp/treebank.hpp"

namespace cdp {

struct ParserConfig {
  int layer = 10;
  NormVariant norm = NormVariant::SquaredFrobenius;
  CombineRule combine = CombineRule::SumThenNormalize;
  KindSet kinds = KindSet::all();
  PlanOptions plan;
  bool sqrt_row_divisor = false;
  /// Upper bound on perturbed sequences handed to the provider at once.
  std::size_t max_sequences_per_call = 256;

  DistortionOptions distortion() const { return {norm, sqrt_row_divisor}; }
  /// Short "layer=10 norm=sqfro combine=sumN perturbations=sub,dc,move" tag.
  std::string describe() const;
};

/// Raw per-span scores of one sentence, computed once per requested distortion
/// option. Perturbed matrices are fetched span by span and dropped after scoring.
std::vector<std::map<Span, RawScores>> raw_scores(std::span<const std::string> words, EmbeddingProvider& provider,
                                                  int layer, KindSet kinds, const PlanOptions& plan,
                                                  std::span<const DistortionOptions> options,
                                                  std::size_t max_sequences_per_call = 256);

ScoreTable score_sentence(std::span<const std::string> words, EmbeddingProvider& provider,
                          const ParserConfig& config);

/// Full pipeline for one sentence. Sentences of one word yield a single leaf.
struct SentenceParse {
  ParseResult result;
  ScoreTable table;
};

SentenceParse parse_sentence(std::span<const std::string> words, EmbeddingProvider& provider,
                             const ParserConfig& config);

/// Parse tree whose leaves carry the tokens' POS tags where present.
Tree retag_leaves(Tree tree, std::span<const Token> tokens);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  const std::size_t threads = std::min(workers, count);
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace cdp

#endif  // CDP_PIPELINE_HPP
