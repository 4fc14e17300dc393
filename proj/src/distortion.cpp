#include "cdp/distortion.hpp"

#include <algorithm>
#include <array>
#include <optional>

#include <json.hpp>

namespace cdp {

NormVariant parse_norm(std::string_view text) {
  if (text == "sqfro") return NormVariant::SquaredFrobenius;
  if (text == "fro") return NormVariant::Frobenius;
  throw std::invalid_argument("unknown norm '" + std::string(text) + "' (expected sqfro or fro)");
}

std::string_view to_string(NormVariant norm) {
  return norm == NormVariant::SquaredFrobenius ? "sqfro" : "fro";
}

CombineRule parse_combine(std::string_view text) {
  if (text == "sumN") return CombineRule::SumThenNormalize;
  if (text == "Nsum") return CombineRule::NormalizeThenSum;
  if (text == "Nmin") return CombineRule::NormalizeThenMin;
  if (text == "Nmax") return CombineRule::NormalizeThenMax;
  throw std::invalid_argument("unknown combine rule '" + std::string(text) + "' (expected sumN, Nsum, Nmin or Nmax)");
}

std::string_view to_string(CombineRule rule) {
  switch (rule) {
    case CombineRule::SumThenNormalize: return "sumN";
    case CombineRule::NormalizeThenSum: return "Nsum";
    case CombineRule::NormalizeThenMin: return "Nmin";
    case CombineRule::NormalizeThenMax: return "Nmax";
  }
  return "?";
}

double RawScores::average() const {
  const std::size_t l = terms();
  return l == 0 ? 0.0 : (sub + dc + move) / static_cast<double>(l);
}

RawScores RawScores::restricted(KindSet kinds) const {
  RawScores out = *this;
  if (!kinds.has_substitution()) out.sub = 0.0, out.sub_terms = 0;
  if (!kinds.has_decontextualization()) out.dc = 0.0, out.dc_terms = 0;
  if (!kinds.has_movement()) out.move = 0.0, out.move_terms = 0;
  return out;
}

RawScores span_distortion(const EmbeddingMatrix& original, std::span<const PerturbationPlan> plans,
                          std::span<const EmbeddingMatrix> perturbed, const DistortionOptions& options) {
  RawScores out;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& plan = plans[i];
    if (i >= perturbed.size())
      throw std::invalid_argument("no matrix for " + std::string(to_string(plan.kind)) + " plan of span " +
                                  to_string(plan.span));
    const auto& m = perturbed[i];
    if (static_cast<std::size_t>(m.rows()) != plan.tokens.size())
      throw std::invalid_argument("matrix for " + std::string(to_string(plan.kind)) + " plan of span " +
                                  to_string(plan.span) + " has " + std::to_string(m.rows()) + " rows, expected " +
                                  std::to_string(plan.tokens.size()));
    switch (plan.kind) {
      case PerturbationKind::Substitution:
        out.sub += stacked_distortion(original, m, plan.pairs, options);
        out.sub_terms += plan.term_count();
        break;
      case PerturbationKind::Decontextualization:
        out.dc += stacked_distortion(original, m, plan.pairs, options);
        out.dc_terms += plan.term_count();
        break;
      case PerturbationKind::FrontMovement:
      case PerturbationKind::EndMovement:
        for (const auto& pair : plan.pairs) {
          out.move += stacked_distortion(original, m, std::span(&pair, 1), options);
          ++out.move_terms;
        }
        break;
    }
  }
  return out;
}

SpanScores normalize_by_length(const SpanScores& scores, std::size_t n) {
  std::vector<double> group_norm(n + 1, 0.0);
  for (const auto& [span, d] : scores) {
    if (span.end > n) throw std::invalid_argument("span " + to_string(span) + " outside sentence of length " +
                                                  std::to_string(n));
    group_norm[span.length()] += d * d;
  }
  for (auto& g : group_norm) g = std::sqrt(g);
  SpanScores out;
  for (const auto& [span, d] : scores) {
    const double norm = group_norm[span.length()];
    out.emplace(span, norm > 0.0 ? d / norm : 0.0);
  }
  return out;
}

SpanScores combine(const std::map<Span, RawScores>& raw, std::size_t n, CombineRule rule) {
  if (rule == CombineRule::SumThenNormalize) {
    SpanScores averaged;
    for (const auto& [span, r] : raw) averaged.emplace(span, r.average());
    return normalize_by_length(averaged, n);
  }

  // Each perturbation is first averaged over its own terms and normalized on its own.
  using Field = std::pair<double RawScores::*, std::size_t RawScores::*>;
  constexpr std::array<Field, 3> fields{Field{&RawScores::sub, &RawScores::sub_terms},
                                        Field{&RawScores::dc, &RawScores::dc_terms},
                                        Field{&RawScores::move, &RawScores::move_terms}};
  std::vector<SpanScores> groups;
  for (const auto& [value, terms] : fields) {
    const bool present = std::any_of(raw.begin(), raw.end(), [&](const auto& kv) { return kv.second.*terms > 0; });
    if (!present) continue;
    SpanScores per_span;
    for (const auto& [span, r] : raw)
      per_span.emplace(span, r.*terms > 0 ? r.*value / static_cast<double>(r.*terms) : 0.0);
    groups.push_back(normalize_by_length(per_span, n));
  }

  SpanScores out;
  for (const auto& [span, r] : raw) {
    std::optional<double> acc;
    for (const auto& g : groups) {
      const double v = g.at(span);
      if (!acc) {
        acc = v;
      } else if (rule == CombineRule::NormalizeThenSum) {
        *acc += v;
      } else if (rule == CombineRule::NormalizeThenMin) {
        *acc = std::min(*acc, v);
      } else {
        *acc = std::max(*acc, v);
      }
    }
    out.emplace(span, acc.value_or(0.0));
  }
  return out;
}

ScoreTable make_score_table(std::size_t n, std::map<Span, RawScores> raw, CombineRule rule) {
  ScoreTable table;
  table.n = n;
  table.normalized = combine(raw, n, rule);
  table.raw = std::move(raw);
  return table;
}

std::string score_table_json(const ScoreTable& table) {
  nlohmann::ordered_json spans = nlohmann::ordered_json::object();
  for (const auto& [span, r] : table.raw) {
    auto it = table.normalized.find(span);
    spans[std::to_string(span.start) + ":" + std::to_string(span.end)] = {
        {"d_sub", r.sub}, {"d_dc", r.dc},         {"d_move", r.move},
        {"L", r.terms()}, {"d", r.average()}, {"d_hat", it == table.normalized.end() ? 0.0 : it->second}};
  }
  nlohmann::ordered_json doc{{"n", table.n}, {"spans", std::move(spans)}};
  return doc.dump();
}

ScoreDump parse_score_dump(std::string_view line) {
  ScoreDump out;
  try {
    auto doc = nlohmann::json::parse(line);
    out.n = doc.at("n").get<std::size_t>();
    for (const auto& [key, value] : doc.at("spans").items()) {
      const auto colon = key.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("bad span key '" + key + "'");
      const Span span{std::stoul(key.substr(0, colon)), std::stoul(key.substr(colon + 1))};
      out.d.emplace(span, value.at("d").get<double>());
      out.d_hat.emplace(span, value.at("d_hat").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed score dump: ") + e.what());
  }
  return out;
}

ScoreDump to_dump(const ScoreTable& table) {
  ScoreDump out;
  out.n = table.n;
  for (const auto& [span, r] : table.raw) out.d.emplace(span, r.average());
  out.d_hat = table.normalized;
  return out;
}

}  // namespace cdp
