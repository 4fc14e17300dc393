#ifndef CDP_PERTURBATION_HPP
#define CDP_PERTURBATION_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdp/treebank.hpp"

namespace cdp {

inline constexpr std::string_view kMaskPlaceholder = "<mask>";
inline constexpr std::string_view kDefaultSeparator = ",";

enum class PerturbationKind : std::uint8_t {
  Substitution,
  Decontextualization,
  FrontMovement,
  EndMovement,
};

std::string_view to_string(PerturbationKind kind);

/// Subset of perturbation kinds. Movement is selected as a pair: the
/// user-facing name "move" enables both FrontMovement and EndMovement.
class KindSet {
 public:
  constexpr KindSet() = default;

  static constexpr KindSet all() {
    KindSet s;
    s.bits_ = 0b1111;
    return s;
  }
  static constexpr KindSet of(std::initializer_list<PerturbationKind> kinds) {
    KindSet s;
    for (auto k : kinds) s.insert(k);
    return s;
  }

  constexpr void insert(PerturbationKind k) { bits_ |= bit(k); }
  constexpr bool contains(PerturbationKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool operator==(const KindSet&) const = default;

  bool has_substitution() const { return contains(PerturbationKind::Substitution); }
  bool has_decontextualization() const { return contains(PerturbationKind::Decontextualization); }
  bool has_movement() const {
    return contains(PerturbationKind::FrontMovement) || contains(PerturbationKind::EndMovement);
  }

  std::vector<PerturbationKind> kinds() const;

  /// Parses "sub,dc,move" (any subset, ',' or '+' separated).
  static KindSet parse(std::string_view text);
  /// Canonical "sub,dc,move" form.
  std::string to_string() const;

 private:
  static constexpr std::uint8_t bit(PerturbationKind k) { return std::uint8_t(1u << static_cast<unsigned>(k)); }
  std::uint8_t bits_ = 0;
};

/// Rows of the original sentence's matrix matched against rows of the
/// perturbed sequence's matrix. Both sides have the same length.
struct SegmentPair {
  Span original;
  Span perturbed;

  bool operator==(const SegmentPair&) const = default;
};

struct PerturbationPlan {
  PerturbationKind kind{};
  Span span;
  std::vector<std::string> tokens;
  std::vector<SegmentPair> pairs;

  /// Number of distortion terms this plan contributes. Substitution and
  /// decontextualization compare their pairs as one stacked matrix; each
  /// movement pair is a separate term.
  std::size_t term_count() const;

  bool operator==(const PerturbationPlan&) const = default;
};

struct PlanOptions {
  std::string mask{kMaskPlaceholder};
  std::string separator{kDefaultSeparator};
};

/// Span replaced by a single mask; the surrounding words are compared.
PerturbationPlan substitution_plan(std::span<const std::string> sentence, Span span,
                                   std::string_view mask = kMaskPlaceholder);

/// Context replaced by one mask per non-empty side; the span words are compared.
PerturbationPlan decontextualization_plan(std::span<const std::string> sentence, Span span,
                                          std::string_view mask = kMaskPlaceholder);

struct MovementPlans {
  PerturbationPlan front;
  PerturbationPlan end;
};

/// Span moved to the front and to the end, with separators between non-empty segments.
MovementPlans movement_plans(std::span<const std::string> sentence, Span span,
                             std::string_view separator = kDefaultSeparator);

/// Plans for every span with 2 <= length < n, in span order, then kind order.
std::map<Span, std::vector<PerturbationPlan>> plans_for_sentence(std::span<const std::string> sentence,
                                                                  KindSet kinds,
                                                                  const PlanOptions& options = {});

std::vector<std::string> token_texts(std::span<const Token> tokens);

}  // namespace cdp

#endif  // CDP_PERTURBATION_HPP
