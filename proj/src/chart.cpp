#include "cdp/chart.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cdp {

namespace {

double span_cost(const SpanScores& normalized, Span span, std::size_t n) {
  if (is_trivial(span, n)) return 0.0;
  auto it = normalized.find(span);
  if (it == normalized.end()) throw std::out_of_range("no normalized score for span " + to_string(span));
  return it->second;
}

Tree leaf(std::size_t i) { return Tree{{kPredictedLabel}, {i, i + 1}, {}}; }

// Row-major (n+1) x (n+1) chart indexed by [start][end].
class Chart {
 public:
  explicit Chart(std::size_t n) : n_(n), cells_((n + 1) * (n + 1)) {}
  ChartCell& at(std::size_t i, std::size_t j) { return cells_[i * (n_ + 1) + j]; }
  const ChartCell& at(std::size_t i, std::size_t j) const { return cells_[i * (n_ + 1) + j]; }

  Tree backtrack(std::size_t i, std::size_t j) const {
    const auto& cell = at(i, j);
    if (!cell.split) return leaf(i);
    const std::size_t k = *cell.split;
    Tree node{{kPredictedLabel}, {i, j}, {}};
    node.children.push_back(backtrack(i, k));
    node.children.push_back(backtrack(k, j));
    return node;
  }

 private:
  std::size_t n_;
  std::vector<ChartCell> cells_;
};

void require_sentence(std::size_t n) {
  if (n < 2) throw std::invalid_argument("chart parsing needs at least 2 words, got " + std::to_string(n));
}

}  // namespace

ParseResult min_score_parse(std::size_t n, const SpanScores& normalized) {
  require_sentence(n);
  Chart chart(n);
  for (std::size_t length = 2; length <= n; ++length) {
    for (std::size_t i = 0; i + length <= n; ++i) {
      const std::size_t j = i + length;
      const double own = span_cost(normalized, {i, j}, n);
      auto& cell = chart.at(i, j);
      for (std::size_t k = i + 1; k < j; ++k) {
        const double candidate = chart.at(i, k).best + chart.at(k, j).best + own;
        if (!cell.split || candidate < cell.best) {
          cell.best = candidate;
          cell.split = k;
        }
      }
    }
  }
  return {chart.backtrack(0, n), chart.at(0, n).best};
}

ParseResult min_score_parse(const ScoreTable& table) { return min_score_parse(table.n, table.normalized); }

namespace {

// Every binary tree over a span as its split points in preorder, enumerated
// with the root split ascending, then left subtrees, then right subtrees.
using SplitSequence = std::vector<std::uint8_t>;

class TreeEnumerator {
 public:
  explicit TreeEnumerator(std::size_t n) : n_(n), memo_((n + 1) * (n + 1)), done_((n + 1) * (n + 1), false) {}

  const std::vector<SplitSequence>& trees(std::size_t i, std::size_t j) {
    const std::size_t key = i * (n_ + 1) + j;
    if (done_[key]) return memo_[key];
    std::vector<SplitSequence> out;
    if (j - i == 1) {
      out.emplace_back();
    } else {
      for (std::size_t k = i + 1; k < j; ++k) {
        const auto& lefts = trees(i, k);
        const auto& rights = trees(k, j);
        for (const auto& l : lefts) {
          for (const auto& r : rights) {
            SplitSequence seq;
            seq.reserve(1 + l.size() + r.size());
            seq.push_back(static_cast<std::uint8_t>(k));
            seq.insert(seq.end(), l.begin(), l.end());
            seq.insert(seq.end(), r.begin(), r.end());
            out.push_back(std::move(seq));
          }
        }
      }
    }
    done_[key] = true;
    memo_[key] = std::move(out);
    return memo_[key];
  }

 private:
  std::size_t n_;
  std::vector<std::vector<SplitSequence>> memo_;
  std::vector<bool> done_;
};

Tree materialize(const SplitSequence& seq, std::size_t& pos, std::size_t i, std::size_t j) {
  if (j - i == 1) return leaf(i);
  const std::size_t k = seq.at(pos++);
  Tree node{{kPredictedLabel}, {i, j}, {}};
  node.children.push_back(materialize(seq, pos, i, k));
  node.children.push_back(materialize(seq, pos, k, j));
  return node;
}

}  // namespace

ParseResult brute_force_parse(std::size_t n, const SpanScores& normalized) {
  require_sentence(n);
  if (n > kBruteForceLimit)
    throw std::invalid_argument("brute_force_parse refuses n = " + std::to_string(n) + " (limit " +
                                std::to_string(kBruteForceLimit) + ")");
  TreeEnumerator enumerator(n);
  std::optional<ParseResult> best;
  for (const auto& seq : enumerator.trees(0, n)) {
    std::size_t pos = 0;
    Tree tree = materialize(seq, pos, 0, n);
    const double score = tree_score(tree, normalized);
    if (!best || score < best->score) best = ParseResult{std::move(tree), score};
  }
  return std::move(*best);
}

ParseResult brute_force_parse(const ScoreTable& table) { return brute_force_parse(table.n, table.normalized); }

namespace {

double score_node(const Tree& node, const SpanScores& normalized, std::size_t n) {
  if (node.is_leaf()) return 0.0;
  double sum = 0.0;
  bool first = true;
  for (const auto& child : node.children) {
    const double s = score_node(child, normalized, n);
    sum = first ? s : sum + s;
    first = false;
  }
  return sum + span_cost(normalized, node.span, n);
}

}  // namespace

double tree_score(const Tree& tree, const SpanScores& normalized) {
  return score_node(tree, normalized, tree.span.end);
}

double tree_score(const Tree& tree, const ScoreTable& table) { return tree_score(tree, table.normalized); }

}  // namespace cdp
