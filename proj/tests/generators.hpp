#ifndef CDP_TESTS_GENERATORS_HPP
#define CDP_TESTS_GENERATORS_HPP

// Hand-rolled random inputs for the property tests.

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cdp/distortion.hpp"
#include "cdp/treebank.hpp"

namespace cdp::testing {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[uniform(rng, 0, items.size() - 1)];
}

inline std::vector<std::string> random_words(Rng& rng, std::size_t n) {
  static const std::vector<std::string> vocab{"the", "cat", "sat", "on",  "a",   "mat", "they",
                                              "watched", "film", "this", "old", "dog", "ran", "it"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pick(rng, vocab));
  return out;
}

/// Bracketed text of a random labeled tree over n words named w0, w1, ...
/// Unary chains, punctuation tags and function tags show up at random.
class TreeTextGenerator {
 public:
  explicit TreeTextGenerator(Rng& rng, double punct_rate = 0.2) : rng_(rng), punct_rate_(punct_rate) {}

  std::string operator()(std::size_t n) {
    next_word_ = 0;
    return node(n);
  }

 private:
  std::string node(std::size_t len) {
    static const std::vector<std::string> phrases{"S", "NP", "VP", "PP", "SBAR", "ADJP", "ADVP", "NP-SBJ", "PP-TMP"};
    std::string inner;
    if (len == 1) {
      static const std::vector<std::string> tags{"DT", "NN", "VBD", "IN", "JJ", "PRP"};
      static const std::vector<std::string> punct{",", ".", ":", "``", "''", "-LRB-", "-RRB-"};
      const std::string tag = coin(rng_, punct_rate_) ? pick(rng_, punct) : pick(rng_, tags);
      inner = "(" + tag + " w" + std::to_string(next_word_++) + ")";
    } else {
      const std::size_t parts = uniform(rng_, 2, std::min<std::size_t>(len, 4));
      // Random composition of len into `parts` positive sizes.
      std::vector<std::size_t> cuts;
      while (cuts.size() < parts - 1) {
        const std::size_t c = uniform(rng_, 1, len - 1);
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
      }
      std::sort(cuts.begin(), cuts.end());
      cuts.push_back(len);
      std::size_t prev = 0;
      inner = "(" + pick(rng_, phrases);
      for (auto c : cuts) {
        inner += " " + node(c - prev);
        prev = c;
      }
      inner += ")";
    }
    const std::size_t chain = coin(rng_, 0.25) ? uniform(rng_, 1, 2) : 0;
    for (std::size_t i = 0; i < chain; ++i) inner = "(" + pick(rng_, phrases) + " " + inner + ")";
    return inner;
  }

  Rng& rng_;
  double punct_rate_;
  std::size_t next_word_ = 0;
};

/// Non-negative normalized-score table over the non-trivial spans of n words.
/// Values come from a small grid so that ties are common.
inline SpanScores random_table(Rng& rng, std::size_t n, bool coarse) {
  SpanScores out;
  for (std::size_t len = 2; len < n; ++len)
    for (std::size_t i = 0; i + len <= n; ++i) {
      const double v = coarse ? static_cast<double>(uniform(rng, 0, 3)) * 0.25
                              : std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      out.emplace(Span{i, i + len}, v);
    }
  return out;
}

/// Every node span of a tree, leaves included.
inline void collect_spans(const Tree& t, std::set<Span>& out) {
  out.insert(t.span);
  for (const auto& c : t.children) collect_spans(c, out);
}

}  // namespace cdp::testing

#endif  // CDP_TESTS_GENERATORS_HPP
