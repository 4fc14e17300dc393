#include "cdp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace cdp {

using ordered_json = nlohmann::ordered_json;

double sentence_f1(const std::set<Span>& pred, const std::set<Span>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::size_t overlap = 0;
  for (const auto& s : pred) overlap += gold.contains(s);
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

const std::vector<std::string>& default_recall_labels() {
  static const std::vector<std::string> labels{"SBAR", "NP", "VP", "PP", "ADJP", "ADVP"};
  return labels;
}

namespace {

Tree x_leaf(std::size_t i) { return Tree{{"X"}, {i, i + 1}, {}}; }

bool has_label(const Labels& chain, const std::string& label) {
  return std::any_of(chain.begin(), chain.end(), [&](const std::string& l) { return base_label(l) == label; });
}

}  // namespace

Tree right_branching_tree(std::size_t n) {
  if (n == 0) throw std::invalid_argument("branching tree over zero words");
  Tree node = x_leaf(n - 1);
  for (std::size_t i = n - 1; i-- > 0;) {
    Tree parent{{"X"}, {i, n}, {}};
    parent.children.push_back(x_leaf(i));
    parent.children.push_back(std::move(node));
    node = std::move(parent);
  }
  return node;
}

Tree left_branching_tree(std::size_t n) {
  if (n == 0) throw std::invalid_argument("branching tree over zero words");
  Tree node = x_leaf(0);
  for (std::size_t j = 2; j <= n; ++j) {
    Tree parent{{"X"}, {0, j}, {}};
    parent.children.push_back(std::move(node));
    parent.children.push_back(x_leaf(j - 1));
    node = std::move(parent);
  }
  return node;
}

std::map<std::string, double> label_recall(const std::set<Span>& pred, const std::map<Span, Labels>& gold,
                                           std::span<const std::string> labels) {
  std::map<std::string, double> out;
  for (const auto& label : labels) {
    std::size_t total = 0;
    std::size_t found = 0;
    for (const auto& [span, chain] : gold) {
      if (!has_label(chain, label)) continue;
      ++total;
      found += pred.contains(span);
    }
    if (total > 0) out[label] = 100.0 * static_cast<double>(found) / static_cast<double>(total);
  }
  return out;
}

Evaluator::Evaluator(std::vector<std::string> labels) : labels_(std::move(labels)) {}

void Evaluator::add(const Tree& pred, const Tree& gold) {
  if (pred.span != gold.span)
    throw std::invalid_argument("predicted tree spans " + to_string(pred.span) + " but gold spans " +
                                to_string(gold.span));
  const auto pred_spans = nontrivial_spans(pred);
  const auto gold_labeled = gold_spans(gold, false);
  std::set<Span> gold_set;
  for (const auto& [span, chain] : gold_labeled) gold_set.insert(span);

  per_sentence_.push_back(100.0 * sentence_f1(pred_spans, gold_set));
  predicted_ += pred_spans.size();
  gold_ += gold_set.size();
  for (const auto& s : pred_spans) matched_ += gold_set.contains(s);

  for (const auto& label : labels_) {
    for (const auto& [span, chain] : gold_labeled) {
      if (!has_label(chain, label)) continue;
      ++label_total_[label];
      label_found_[label] += pred_spans.contains(span);
    }
  }
}

EvalReport Evaluator::report() const {
  EvalReport r;
  r.per_sentence_f1 = per_sentence_;
  r.sentences = per_sentence_.size();
  r.skipped = skipped_;
  if (!per_sentence_.empty()) {
    double sum = 0.0;
    for (double f : per_sentence_) sum += f;
    r.corpus_f1 = sum / static_cast<double>(per_sentence_.size());
  }
  if (predicted_ == 0 && gold_ == 0) {
    r.micro_f1 = r.sentences > 0 ? 100.0 : 0.0;
  } else if (matched_ > 0) {
    const double p = static_cast<double>(matched_) / static_cast<double>(predicted_);
    const double rc = static_cast<double>(matched_) / static_cast<double>(gold_);
    r.micro_f1 = 100.0 * 2.0 * p * rc / (p + rc);
  }
  for (const auto& [label, total] : label_total_) {
    r.label_support[label] = total;
    r.label_recall[label] = 100.0 * static_cast<double>(label_found_.at(label)) / static_cast<double>(total);
  }
  return r;
}

PreparedCorpus prepare_corpus(std::span<const SentenceRecord> records, const std::set<std::string>& punct_tags,
                              bool defer_punct) {
  PreparedCorpus out;
  for (std::size_t index = 0; index < records.size(); ++index) {
    const auto& rec = records[index];
    if (!rec.gold) {
      ++out.skipped;
      continue;
    }
    SentenceRecord collapsed{rec.tokens, collapse_unary(*rec.gold)};
    if (!defer_punct) {
      auto pruned = remove_punctuation(collapsed, punct_tags);
      if (!pruned || pruned->tokens.size() < 2) {
        ++out.skipped;
        continue;
      }
      out.sentences.push_back({std::move(pruned->tokens), std::move(*pruned->gold), {}});
      out.source.push_back(index);
      continue;
    }
    std::vector<bool> keep(collapsed.tokens.size());
    std::size_t kept = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      keep[i] = !punct_tags.contains(collapsed.tokens[i].tag);
      kept += keep[i];
    }
    if (kept < 2) {
      ++out.skipped;
      continue;
    }
    auto gold = filter_words(*collapsed.gold, keep);
    if (kept == keep.size()) keep.clear();
    out.sentences.push_back({std::move(collapsed.tokens), std::move(*gold), std::move(keep)});
    out.source.push_back(index);
  }
  return out;
}

Tree project_prediction(const Tree& pred, const PreparedSentence& sentence) {
  if (sentence.keep.empty()) return pred;
  auto projected = filter_words(pred, sentence.keep);
  if (!projected) throw std::logic_error("prediction vanished after punctuation removal");
  return std::move(*projected);
}

EvalReport evaluate_baseline(const PreparedCorpus& corpus, Baseline baseline) {
  Evaluator evaluator;
  for (std::size_t i = 0; i < corpus.skipped; ++i) evaluator.skip();
  for (const auto& s : corpus.sentences) {
    const std::size_t n = s.tokens.size();
    const Tree pred = baseline == Baseline::RightBranching ? right_branching_tree(n) : left_branching_tree(n);
    evaluator.add(project_prediction(pred, s), s.gold);
  }
  auto report = evaluator.report();
  report.config["baseline"] = baseline == Baseline::RightBranching ? "right-branching" : "left-branching";
  return report;
}

std::map<std::string, std::string> config_echo(const ParserConfig& config) {
  return {{"layer", std::to_string(config.layer)},
          {"norm", std::string(to_string(config.norm))},
          {"combine", std::string(to_string(config.combine))},
          {"perturbations", config.kinds.to_string()},
          {"mask", config.plan.mask},
          {"separator", config.plan.separator},
          {"sqrt_row_divisor", config.sqrt_row_divisor ? "true" : "false"}};
}

std::vector<EvalReport> evaluate_configs(const PreparedCorpus& corpus, EmbeddingProvider& provider,
                                         std::span<const ParserConfig> configs, std::size_t workers,
                                         const TableHook& hook) {
  // Configs that agree on layer and plan options reuse one set of embedding calls.
  std::map<std::tuple<int, std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    if (configs[c].kinds.empty()) throw std::invalid_argument("config without perturbations");
    groups[{configs[c].layer, configs[c].plan.mask, configs[c].plan.separator}].push_back(c);
  }

  const std::size_t count = corpus.sentences.size();
  std::vector<std::vector<Tree>> predictions(configs.size(), std::vector<Tree>(count));

  for (const auto& [key, members] : groups) {
    const ParserConfig& lead = configs[members.front()];
    KindSet kinds;
    std::vector<DistortionOptions> options;
    std::vector<std::size_t> option_of(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& cfg = configs[members[m]];
      for (auto k : cfg.kinds.kinds()) kinds.insert(k);
      const DistortionOptions o = cfg.distortion();
      auto it = std::find_if(options.begin(), options.end(), [&](const DistortionOptions& x) {
        return x.norm == o.norm && x.sqrt_row_divisor == o.sqrt_row_divisor;
      });
      option_of[m] = static_cast<std::size_t>(it - options.begin());
      if (it == options.end()) options.push_back(o);
    }

    parallel_for(count, workers, [&](std::size_t i) {
      const auto& sentence = corpus.sentences[i];
      const auto words = token_texts(sentence.tokens);
      const auto raw = raw_scores(words, provider, lead.layer, kinds, lead.plan, options,
                                  lead.max_sequences_per_call);
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto& cfg = configs[members[m]];
        std::map<Span, RawScores> restricted;
        for (const auto& [span, r] : raw[option_of[m]]) restricted.emplace(span, r.restricted(cfg.kinds));
        const auto table = make_score_table(words.size(), std::move(restricted), cfg.combine);
        if (hook) hook(members[m], i, table);
        predictions[members[m]][i] = project_prediction(min_score_parse(table).tree, sentence);
      }
    });
  }

  std::vector<EvalReport> reports;
  reports.reserve(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    Evaluator evaluator;
    for (std::size_t i = 0; i < corpus.skipped; ++i) evaluator.skip();
    for (std::size_t i = 0; i < count; ++i) evaluator.add(predictions[c][i], corpus.sentences[i].gold);
    auto report = evaluator.report();
    report.config = config_echo(configs[c]);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::map<int, EvalReport> layer_sweep(const PreparedCorpus& corpus, EmbeddingProvider& provider,
                                      std::span<const int> layers, const ParserConfig& base, std::size_t workers) {
  std::vector<ParserConfig> configs;
  for (int layer : layers) {
    ParserConfig cfg = base;
    cfg.layer = layer;
    configs.push_back(cfg);
  }
  auto reports = evaluate_configs(corpus, provider, configs, workers);
  std::map<int, EvalReport> out;
  for (std::size_t i = 0; i < configs.size(); ++i) out.emplace(configs[i].layer, std::move(reports[i]));
  return out;
}

std::vector<AblationRow> ablation_grid(const PreparedCorpus& corpus, EmbeddingProvider& provider,
                                       std::span<const ParserConfig> configs, std::size_t workers) {
  auto reports = evaluate_configs(corpus, provider, configs, workers);
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) rows.push_back({configs[i], std::move(reports[i])});
  return rows;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

std::vector<LengthStats> distortion_by_length_report(std::span<const ScoreDump> dumps, std::span<const Tree> golds,
                                                     std::size_t max_length) {
  if (dumps.size() != golds.size())
    throw std::invalid_argument(std::to_string(dumps.size()) + " score dumps for " + std::to_string(golds.size()) +
                                " gold trees");
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_length;
  for (std::size_t i = 0; i < dumps.size(); ++i) {
    if (dumps[i].n != golds[i].span.end)
      throw std::invalid_argument("score dump " + std::to_string(i) + " has n = " + std::to_string(dumps[i].n) +
                                  " but its gold tree has " + std::to_string(golds[i].span.end) + " words");
    const auto constituents = nontrivial_spans(golds[i]);
    for (const auto& [span, d] : dumps[i].d) {
      if (max_length != 0 && span.length() > max_length) continue;
      auto& [cons, dist] = by_length[span.length()];
      (constituents.contains(span) ? cons : dist).push_back(d);
    }
  }
  std::vector<LengthStats> out;
  for (const auto& [length, groups] : by_length) {
    for (const auto& [name, values] : {std::pair{"constituent", &groups.first}, {"distituent", &groups.second}}) {
      if (values->empty()) continue;
      double sum = 0.0;
      for (double v : *values) sum += v;
      out.push_back({length, name, values->size(), sum / static_cast<double>(values->size()),
                     percentile(*values, 0.30), percentile(*values, 0.70)});
    }
  }
  return out;
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

ordered_json report_object(const EvalReport& r) {
  ordered_json config(r.config);
  ordered_json recall = ordered_json::object();
  for (const auto& [label, value] : r.label_recall) recall[label] = value;
  ordered_json support = ordered_json::object();
  for (const auto& [label, value] : r.label_support) support[label] = value;
  return ordered_json{{"config", std::move(config)},
                      {"corpus_f1", r.corpus_f1},
                      {"micro_f1", r.micro_f1},
                      {"sentences", r.sentences},
                      {"skipped", r.skipped},
                      {"label_recall", std::move(recall)},
                      {"label_support", std::move(support)},
                      {"per_sentence_f1", r.per_sentence_f1}};
}

}  // namespace

std::string report_json(const EvalReport& report) { return report_object(report).dump(2) + "\n"; }

std::string report_table(const EvalReport& report) {
  std::string out;
  for (const auto& [key, value] : report.config) {
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %s\n", key.c_str(), value.c_str());
    out += line;
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %8s\n", "S-F1", fixed(report.corpus_f1).c_str());
  out += line;
  std::snprintf(line, sizeof line, "%-16s %8s\n", "micro-F1", fixed(report.micro_f1).c_str());
  out += line;
  std::snprintf(line, sizeof line, "%-16s %8zu\n", "sentences", report.sentences);
  out += line;
  std::snprintf(line, sizeof line, "%-16s %8zu\n", "skipped", report.skipped);
  out += line;
  if (!report.label_recall.empty()) {
    std::snprintf(line, sizeof line, "%-8s %8s %8s\n", "label", "recall", "support");
    out += line;
    for (const auto& [label, value] : report.label_recall) {
      std::snprintf(line, sizeof line, "%-8s %8s %8zu\n", label.c_str(), fixed(value).c_str(),
                    report.label_support.at(label));
      out += line;
    }
  }
  return out;
}

std::string sweep_csv(const std::map<int, EvalReport>& sweep) {
  std::string out = "layer,f1\n";
  for (const auto& [layer, report] : sweep) out += std::to_string(layer) + "," + fixed(report.corpus_f1, 4) + "\n";
  return out;
}

std::string sweep_json(const std::map<int, EvalReport>& sweep) {
  ordered_json rows = ordered_json::array();
  for (const auto& [layer, report] : sweep) rows.push_back(report_object(report));
  return rows.dump(2) + "\n";
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-6s %-7s %-14s %8s\n", "layer", "norm", "combine", "perturbations", "S-F1");
  out += line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-6d %-6s %-7s %-14s %8s\n", row.config.layer,
                  std::string(to_string(row.config.norm)).c_str(), std::string(to_string(row.config.combine)).c_str(),
                  row.config.kinds.to_string().c_str(), fixed(row.report.corpus_f1).c_str());
    out += line;
  }
  return out;
}

std::string ablation_json(std::span<const AblationRow> rows) {
  ordered_json out = ordered_json::array();
  for (const auto& row : rows) out.push_back(report_object(row.report));
  return out.dump(2) + "\n";
}

std::string length_csv(std::span<const LengthStats> rows) {
  std::string out = "length,group,mean,p30,p70\n";
  for (const auto& r : rows) {
    out += std::to_string(r.length) + "," + r.group + "," + general(r.mean) + "," + general(r.p30) + "," +
           general(r.p70) + "\n";
  }
  return out;
}

}  // namespace cdp
