#include "cdp/pipeline.hpp"

#include <stdexcept>

namespace cdp {

std::string ParserConfig::describe() const {
  std::string out = "layer=" + std::to_string(layer) + " norm=" + std::string(to_string(norm)) +
                    " combine=" + std::string(to_string(combine)) + " perturbations=" + kinds.to_string();
  if (sqrt_row_divisor) out += " sqrt_row_divisor";
  return out;
}

std::vector<std::map<Span, RawScores>> raw_scores(std::span<const std::string> words, EmbeddingProvider& provider,
                                                  int layer, KindSet kinds, const PlanOptions& plan,
                                                  std::span<const DistortionOptions> options,
                                                  std::size_t max_sequences_per_call) {
  if (words.empty()) throw std::invalid_argument("cannot score an empty sentence");
  if (kinds.empty()) throw std::invalid_argument("no perturbations enabled");
  std::vector<std::map<Span, RawScores>> out(options.size());
  if (words.size() < 3) return out;

  const EmbeddingRequest original_request{{words.begin(), words.end()}, layer};
  const EmbeddingMatrix original = provider.embed_batch(std::span(&original_request, 1)).at(0);
  if (static_cast<std::size_t>(original.rows()) != words.size())
    throw ProtocolError("provider returned " + std::to_string(original.rows()) + " rows for " +
                        std::to_string(words.size()) + " words");

  const auto plans = plans_for_sentence(words, kinds, plan);
  std::vector<const std::pair<const Span, std::vector<PerturbationPlan>>*> pending;
  std::size_t pending_sequences = 0;

  auto flush = [&] {
    if (pending.empty()) return;
    std::vector<EmbeddingRequest> requests;
    std::map<std::vector<std::string>, std::size_t> unique;
    std::vector<std::vector<std::size_t>> slots;
    for (const auto* entry : pending) {
      auto& span_slots = slots.emplace_back();
      for (const auto& p : entry->second) {
        auto [it, inserted] = unique.emplace(p.tokens, requests.size());
        if (inserted) requests.push_back({p.tokens, layer});
        span_slots.push_back(it->second);
      }
    }
    const auto matrices = provider.embed_batch(requests);
    if (matrices.size() != requests.size())
      throw ProtocolError("provider returned " + std::to_string(matrices.size()) + " matrices for " +
                          std::to_string(requests.size()) + " requests");
    for (std::size_t s = 0; s < pending.size(); ++s) {
      const auto& [span, span_plans] = *pending[s];
      std::vector<EmbeddingMatrix> perturbed;
      perturbed.reserve(span_plans.size());
      for (std::size_t slot : slots[s]) perturbed.push_back(matrices[slot]);
      for (std::size_t o = 0; o < options.size(); ++o)
        out[o].emplace(span, span_distortion(original, span_plans, perturbed, options[o]));
    }
    pending.clear();
    pending_sequences = 0;
  };

  for (const auto& entry : plans) {
    pending.push_back(&entry);
    pending_sequences += entry.second.size();
    if (pending_sequences >= max_sequences_per_call) flush();
  }
  flush();
  return out;
}

ScoreTable score_sentence(std::span<const std::string> words, EmbeddingProvider& provider,
                          const ParserConfig& config) {
  const DistortionOptions options = config.distortion();
  auto raw = raw_scores(words, provider, config.layer, config.kinds, config.plan, std::span(&options, 1),
                        config.max_sequences_per_call);
  return make_score_table(words.size(), std::move(raw.front()), config.combine);
}

SentenceParse parse_sentence(std::span<const std::string> words, EmbeddingProvider& provider,
                             const ParserConfig& config) {
  if (words.empty()) throw std::invalid_argument("cannot parse an empty sentence");
  if (words.size() == 1) {
    ScoreTable table;
    table.n = 1;
    return {{Tree{{kPredictedLabel}, {0, 1}, {}}, 0.0}, std::move(table)};
  }
  ScoreTable table = score_sentence(words, provider, config);
  ParseResult result = min_score_parse(table);
  return {std::move(result), std::move(table)};
}

namespace {

void retag(Tree& node, std::span<const Token> tokens) {
  if (node.is_leaf()) {
    if (node.span.start < tokens.size() && !tokens[node.span.start].tag.empty())
      node.labels = {tokens[node.span.start].tag};
    return;
  }
  for (auto& child : node.children) retag(child, tokens);
}

}  // namespace

Tree retag_leaves(Tree tree, std::span<const Token> tokens) {
  retag(tree, tokens);
  return tree;
}

}  // namespace cdp
