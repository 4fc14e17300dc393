#include "cdp/perturbation.hpp"

#include <stdexcept>

namespace cdp {

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::Substitution: return "substitution";
    case PerturbationKind::Decontextualization: return "decontextualization";
    case PerturbationKind::FrontMovement: return "front_movement";
    case PerturbationKind::EndMovement: return "end_movement";
  }
  return "unknown";
}

std::vector<PerturbationKind> KindSet::kinds() const {
  std::vector<PerturbationKind> out;
  for (auto k : {PerturbationKind::Substitution, PerturbationKind::Decontextualization,
                 PerturbationKind::FrontMovement, PerturbationKind::EndMovement}) {
    if (contains(k)) out.push_back(k);
  }
  return out;
}

KindSet KindSet::parse(std::string_view text) {
  KindSet out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto cut = text.find_first_of(",+", pos);
    if (cut == std::string_view::npos) cut = text.size();
    const auto name = text.substr(pos, cut - pos);
    if (name == "sub") {
      out.insert(PerturbationKind::Substitution);
    } else if (name == "dc") {
      out.insert(PerturbationKind::Decontextualization);
    } else if (name == "move") {
      out.insert(PerturbationKind::FrontMovement);
      out.insert(PerturbationKind::EndMovement);
    } else if (!name.empty()) {
      throw std::invalid_argument("unknown perturbation '" + std::string(name) + "' (expected sub, dc, move)");
    }
    pos = cut + 1;
  }
  if (out.empty()) throw std::invalid_argument("perturbation set is empty");
  return out;
}

std::string KindSet::to_string() const {
  std::string out;
  auto add = [&](std::string_view name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (has_substitution()) add("sub");
  if (has_decontextualization()) add("dc");
  if (has_movement()) add("move");
  return out;
}

std::size_t PerturbationPlan::term_count() const {
  switch (kind) {
    case PerturbationKind::Substitution:
    case PerturbationKind::Decontextualization:
      return pairs.empty() ? 0 : 1;
    case PerturbationKind::FrontMovement:
    case PerturbationKind::EndMovement:
      return pairs.size();
  }
  return 0;
}

namespace {

void check_proper(std::span<const std::string> sentence, Span span) {
  if (span.start >= span.end || span.end > sentence.size())
    throw std::invalid_argument("span " + to_string(span) + " outside sentence of length " +
                                std::to_string(sentence.size()));
  if (span.start == 0 && span.end == sentence.size())
    throw std::invalid_argument("span " + to_string(span) + " covers the whole sentence");
}

// Appends sentence[seg] to tokens and records the pair when seg is non-empty.
void append_segment(std::span<const std::string> sentence, Span seg, PerturbationPlan& plan) {
  if (seg.length() == 0) return;
  const std::size_t at = plan.tokens.size();
  plan.tokens.insert(plan.tokens.end(), sentence.begin() + seg.start, sentence.begin() + seg.end);
  plan.pairs.push_back({seg, {at, at + seg.length()}});
}

PerturbationPlan moved(std::span<const std::string> sentence, Span span, std::string_view separator,
                       PerturbationKind kind, std::initializer_list<Span> order) {
  PerturbationPlan plan{kind, span, {}, {}};
  for (const Span& seg : order) {
    if (seg.length() == 0) continue;
    if (!plan.tokens.empty()) plan.tokens.emplace_back(separator);
    append_segment(sentence, seg, plan);
  }
  return plan;
}

}  // namespace

PerturbationPlan substitution_plan(std::span<const std::string> sentence, Span span, std::string_view mask) {
  check_proper(sentence, span);
  PerturbationPlan plan{PerturbationKind::Substitution, span, {}, {}};
  append_segment(sentence, {0, span.start}, plan);
  plan.tokens.emplace_back(mask);
  const std::size_t at = plan.tokens.size();
  plan.tokens.insert(plan.tokens.end(), sentence.begin() + span.end, sentence.end());
  if (span.end < sentence.size()) plan.pairs.push_back({{span.end, sentence.size()}, {at, plan.tokens.size()}});
  return plan;
}

PerturbationPlan decontextualization_plan(std::span<const std::string> sentence, Span span,
                                          std::string_view mask) {
  check_proper(sentence, span);
  PerturbationPlan plan{PerturbationKind::Decontextualization, span, {}, {}};
  if (span.start > 0) plan.tokens.emplace_back(mask);
  append_segment(sentence, span, plan);
  if (span.end < sentence.size()) plan.tokens.emplace_back(mask);
  return plan;
}

MovementPlans movement_plans(std::span<const std::string> sentence, Span span, std::string_view separator) {
  check_proper(sentence, span);
  const Span prefix{0, span.start};
  const Span suffix{span.end, sentence.size()};
  return {moved(sentence, span, separator, PerturbationKind::FrontMovement, {span, prefix, suffix}),
          moved(sentence, span, separator, PerturbationKind::EndMovement, {prefix, suffix, span})};
}

std::map<Span, std::vector<PerturbationPlan>> plans_for_sentence(std::span<const std::string> sentence,
                                                                  KindSet kinds, const PlanOptions& options) {
  std::map<Span, std::vector<PerturbationPlan>> out;
  const std::size_t n = sentence.size();
  for (std::size_t length = 2; length < n; ++length) {
    for (std::size_t start = 0; start + length <= n; ++start) {
      const Span span{start, start + length};
      auto& plans = out[span];
      if (kinds.has_substitution()) plans.push_back(substitution_plan(sentence, span, options.mask));
      if (kinds.has_decontextualization())
        plans.push_back(decontextualization_plan(sentence, span, options.mask));
      if (kinds.has_movement()) {
        auto [front, end] = movement_plans(sentence, span, options.separator);
        if (kinds.contains(PerturbationKind::FrontMovement)) plans.push_back(std::move(front));
        if (kinds.contains(PerturbationKind::EndMovement)) plans.push_back(std::move(end));
      }
    }
  }
  return out;
}

std::vector<std::string> token_texts(std::span<const Token> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

}  // namespace cdp
