#ifndef CDP_CHART_HPP
#define CDP_CHART_HPP

#include <cstddef>
#include <optional>

#include "cdp/distortion.hpp"
#include "cdp/treebank.hpp"

namespace cdp {

inline constexpr const char* kPredictedLabel = "X";

struct ChartCell {
  double best = 0.0;
  std::optional<std::size_t> split;  // absent for single words
};

struct ParseResult {
  Tree tree;     // binary, every label "X"
  double score;  // sum of normalized scores over the tree's non-trivial spans
};

/// CKY over normalized span scores; returns the minimum-score binary tree.
/// Trivial spans cost 0 and ties go to the smallest split point.
/// Throws std::out_of_range naming a span whose score is missing.
ParseResult min_score_parse(std::size_t n, const SpanScores& normalized);
ParseResult min_score_parse(const ScoreTable& table);

/// Exhaustive search over every binary tree (n <= 12), same cost and tie order as CKY.
ParseResult brute_force_parse(std::size_t n, const SpanScores& normalized);
ParseResult brute_force_parse(const ScoreTable& table);

inline constexpr std::size_t kBruteForceLimit = 12;

/// Sum of normalized scores over the non-trivial spans of any tree, children
/// accumulated left to right before the node's own score is added.
double tree_score(const Tree& tree, const SpanScores& normalized);
double tree_score(const Tree& tree, const ScoreTable& table);

}  // namespace cdp

#endif  // CDP_CHART_HPP
