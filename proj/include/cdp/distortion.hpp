#ifndef CDP_DISTORTION_HPP
#define CDP_DISTORTION_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cdp/embeddings.hpp"
#include "cdp/perturbation.hpp"
#include "cdp/treebank.hpp"

namespace cdp {

enum class NormVariant { SquaredFrobenius, Frobenius };

enum class CombineRule { SumThenNormalize, NormalizeThenSum, NormalizeThenMin, NormalizeThenMax };

/// "sqfro" | "fro"
NormVariant parse_norm(std::string_view text);
std::string_view to_string(NormVariant norm);
/// "sumN" | "Nsum" | "Nmin" | "Nmax"
CombineRule parse_combine(std::string_view text);
std::string_view to_string(CombineRule rule);

struct DistortionOptions {
  NormVariant norm = NormVariant::SquaredFrobenius;
  /// Frobenius only: divide the root by sqrt(rows) instead of rows.
  bool sqrt_row_divisor = false;
};

namespace detail {

inline double finish_distortion(double squared_sum, std::size_t rows, const DistortionOptions& options) {
  const double t = static_cast<double>(rows);
  if (options.norm == NormVariant::SquaredFrobenius) return squared_sum / t;
  return std::sqrt(squared_sum) / (options.sqrt_row_divisor ? std::sqrt(t) : t);
}

template <typename DerivedA, typename DerivedB>
double squared_difference(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return (a.template cast<double>() - b.template cast<double>()).squaredNorm();
}

}  // namespace detail

/// Squared Frobenius distance per compared row (or its Frobenius analogue).
/// Accumulates in double regardless of the input scalar.
template <typename DerivedA, typename DerivedB>
double distortion(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                  const DistortionOptions& options = {}) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("distortion: shape " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  if (a.rows() < 1) throw std::invalid_argument("distortion: no rows to compare");
  return detail::finish_distortion(detail::squared_difference(a, b), static_cast<std::size_t>(a.rows()), options);
}

template <typename DerivedA, typename DerivedB>
double distortion(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, NormVariant norm) {
  return distortion(a, b, DistortionOptions{norm, false});
}

/// Distortion of the row blocks named by pairs, stacked into one matrix on each side.
template <typename DerivedA, typename DerivedB>
double stacked_distortion(const Eigen::MatrixBase<DerivedA>& original, const Eigen::MatrixBase<DerivedB>& perturbed,
                          std::span<const SegmentPair> pairs, const DistortionOptions& options = {}) {
  double sum = 0.0;
  std::size_t rows = 0;
  for (const auto& p : pairs) {
    if (p.original.length() != p.perturbed.length())
      throw std::invalid_argument("segment pair " + to_string(p.original) + " / " + to_string(p.perturbed) +
                                  " has unequal lengths");
    if (p.original.end > static_cast<std::size_t>(original.rows()) ||
        p.perturbed.end > static_cast<std::size_t>(perturbed.rows()))
      throw std::invalid_argument("segment pair " + to_string(p.original) + " / " + to_string(p.perturbed) +
                                  " exceeds matrix rows");
    if (original.cols() != perturbed.cols()) throw std::invalid_argument("stacked_distortion: hidden sizes differ");
    const auto len = static_cast<Eigen::Index>(p.original.length());
    sum += detail::squared_difference(original.middleRows(static_cast<Eigen::Index>(p.original.start), len),
                                      perturbed.middleRows(static_cast<Eigen::Index>(p.perturbed.start), len));
    rows += p.original.length();
  }
  if (rows == 0) throw std::invalid_argument("stacked_distortion: no rows to compare");
  return detail::finish_distortion(sum, rows, options);
}

/// Summed distortion and term count for each perturbation of one span.
struct RawScores {
  double sub = 0.0;
  double dc = 0.0;
  double move = 0.0;
  std::size_t sub_terms = 0;
  std::size_t dc_terms = 0;
  std::size_t move_terms = 0;

  std::size_t terms() const { return sub_terms + dc_terms + move_terms; }
  /// Mean over all contributing terms.
  double average() const;
  /// Drops the perturbations that are not in kinds.
  RawScores restricted(KindSet kinds) const;

  bool operator==(const RawScores&) const = default;
};

/// Scores one span from its plans and the matrices of the perturbed sequences
/// (perturbed[i] belongs to plans[i]).
RawScores span_distortion(const EmbeddingMatrix& original, std::span<const PerturbationPlan> plans,
                          std::span<const EmbeddingMatrix> perturbed, const DistortionOptions& options = {});

using SpanScores = std::map<Span, double>;

/// Scales each span-length group of a sentence to unit L2 norm. All-zero groups stay zero.
SpanScores normalize_by_length(const SpanScores& scores, std::size_t n);

/// Normalized per-span score under a combination rule.
SpanScores combine(const std::map<Span, RawScores>& raw, std::size_t n, CombineRule rule);

/// Raw and normalized scores over the non-trivial spans of one sentence.
struct ScoreTable {
  std::size_t n = 0;
  std::map<Span, RawScores> raw;
  SpanScores normalized;
};

ScoreTable make_score_table(std::size_t n, std::map<Span, RawScores> raw, CombineRule rule);

/// One JSON object per sentence:
/// {"n": n, "spans": {"i:j": {"d_sub", "d_dc", "d_move", "L", "d", "d_hat"}}}
std::string score_table_json(const ScoreTable& table);

/// Per-span raw averaged score (the "d" field) read back from a dump line.
struct ScoreDump {
  std::size_t n = 0;
  SpanScores d;
  SpanScores d_hat;
};

ScoreDump parse_score_dump(std::string_view line);
ScoreDump to_dump(const ScoreTable& table);

}  // namespace cdp

#endif  // CDP_DISTORTION_HPP
