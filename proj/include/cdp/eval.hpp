#ifndef CDP_EVAL_HPP
#define CDP_EVAL_HPP

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cdp/distortion.hpp"
#include "cdp/embeddings.hpp"
#include "cdp/pipeline.hpp"
#include "cdp/treebank.hpp"

namespace cdp {

/// Unlabeled F1 in [0, 1]. Both sets empty gives 1, exactly one empty gives 0.
double sentence_f1(const std::set<Span>& pred, const std::set<Span>& gold);

const std::vector<std::string>& default_recall_labels();

Tree right_branching_tree(std::size_t n);
Tree left_branching_tree(std::size_t n);

struct EvalReport {
  double corpus_f1 = 0.0;               // mean of per_sentence_f1, percent
  double micro_f1 = 0.0;                // pooled span counts, percent (diagnostic)
  std::vector<double> per_sentence_f1;  // percent
  std::map<std::string, double> label_recall;  // percent; labels absent from gold are omitted
  std::map<std::string, std::size_t> label_support;
  std::size_t sentences = 0;
  std::size_t skipped = 0;
  std::map<std::string, std::string> config;
};

/// Streaming accumulator over (predicted, gold) tree pairs with identical word counts.
class Evaluator {
 public:
  explicit Evaluator(std::vector<std::string> labels = default_recall_labels());

  void add(const Tree& pred, const Tree& gold);
  void skip() { ++skipped_; }
  EvalReport report() const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> per_sentence_;
  std::size_t matched_ = 0;
  std::size_t predicted_ = 0;
  std::size_t gold_ = 0;
  std::map<std::string, std::size_t> label_found_;
  std::map<std::string, std::size_t> label_total_;
  std::size_t skipped_ = 0;
};

/// Per-label recall (percent) of gold constituents recovered by pred. A gold
/// node counts for a label when any label of its collapsed chain has that base label.
std::map<std::string, double> label_recall(const std::set<Span>& pred, const std::map<Span, Labels>& gold,
                                           std::span<const std::string> labels = default_recall_labels());

/// A gold sentence ready for parsing and scoring. The parser sees `tokens`;
/// `keep` (empty when punctuation was removed up front) selects the words that
/// survive into evaluation, and `gold` is indexed over those words.
struct PreparedSentence {
  std::vector<Token> tokens;
  Tree gold;
  std::vector<bool> keep;
};

struct PreparedCorpus {
  std::vector<PreparedSentence> sentences;
  std::vector<std::size_t> source;  // input record index of each sentence
  std::size_t skipped = 0;
};

/// Removes punctuation (before parsing, or only for evaluation when
/// defer_punct is set), collapses unary chains and drops sentences with
/// fewer than 2 evaluated words or without a gold tree.
PreparedCorpus prepare_corpus(std::span<const SentenceRecord> records, const std::set<std::string>& punct_tags,
                              bool defer_punct = false);

/// Projects a predicted tree onto the evaluated words of a prepared sentence.
Tree project_prediction(const Tree& pred, const PreparedSentence& sentence);

enum class Baseline { RightBranching, LeftBranching };

EvalReport evaluate_baseline(const PreparedCorpus& corpus, Baseline baseline);

/// Receives (config index, sentence index, table) from worker threads.
using TableHook = std::function<void(std::size_t, std::size_t, const ScoreTable&)>;

/// One report per config. Configs sharing a layer share embedding calls.
std::vector<EvalReport> evaluate_configs(const PreparedCorpus& corpus, EmbeddingProvider& provider,
                                         std::span<const ParserConfig> configs, std::size_t workers = 1,
                                         const TableHook& hook = {});

std::map<int, EvalReport> layer_sweep(const PreparedCorpus& corpus, EmbeddingProvider& provider,
                                      std::span<const int> layers, const ParserConfig& base, std::size_t workers = 1);

struct AblationRow {
  ParserConfig config;
  EvalReport report;
};

std::vector<AblationRow> ablation_grid(const PreparedCorpus& corpus, EmbeddingProvider& provider,
                                       std::span<const ParserConfig> configs, std::size_t workers = 1);

struct LengthStats {
  std::size_t length = 0;
  std::string group;  // "constituent" or "distituent"
  std::size_t count = 0;
  double mean = 0.0;
  double p30 = 0.0;
  double p70 = 0.0;
};

/// Linear-interpolation percentile of unsorted values, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Raw averaged distortion by span length for gold constituents vs
/// distituents. dumps[i] must describe the sentence of golds[i]. Lengths above
/// max_length (0 = unbounded) are left out.
std::vector<LengthStats> distortion_by_length_report(std::span<const ScoreDump> dumps, std::span<const Tree> golds,
                                                     std::size_t max_length = 0);

std::map<std::string, std::string> config_echo(const ParserConfig& config);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);
std::string sweep_csv(const std::map<int, EvalReport>& sweep);
std::string sweep_json(const std::map<int, EvalReport>& sweep);
std::string ablation_table(std::span<const AblationRow> rows);
std::string ablation_json(std::span<const AblationRow> rows);
std::string length_csv(std::span<const LengthStats> rows);

}  // namespace cdp

#endif  // CDP_EVAL_HPP
