#ifndef CDP_CLI_HPP
#define CDP_CLI_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdp/embeddings.hpp"
#include "cdp/eval.hpp"
#include "cdp/pipeline.hpp"

namespace cdp {

/// Fully resolved settings of one command invocation.
struct RunConfig {
  std::string command;
  std::optional<BackendConfig> backend;
  ParserConfig parser;
  std::set<std::string> punct_tags = default_punct_tags();
  bool defer_punct = false;
  std::string format = "auto";  // auto | tree | text
  std::string input;
  std::string gold;
  std::string output;
  std::string report;
  std::string dump_scores;
  std::string length_report;
  std::size_t max_length = 0;
  std::size_t workers = 1;
  std::vector<int> layers;
  std::string grid;
  std::optional<Baseline> baseline;
};

/// "0-12", "3,5,7" or a mix such as "0-2,10".
std::vector<int> parse_layers(const std::string& text);

/// Whitespace-separated tag list; "none" gives the empty set.
std::set<std::string> parse_tag_list(const std::string& text);

/// Cartesian product of "axis=v1,v2;axis=..." over layer, norm, combine and
/// perturbations (sets joined by '+'), outermost axis first. Missing axes keep
/// the base value.
std::vector<ParserConfig> parse_grid(const std::string& text, const ParserConfig& base);

/// Configuration echo embedded in every report.
std::map<std::string, std::string> run_echo(const RunConfig& config);

/// Tokens the parser sees for one input record: punctuation is dropped unless
/// removal is deferred, the record has no tags, or nothing would remain.
std::vector<Token> parse_tokens(const SentenceRecord& record, const RunConfig& config);

/// Entry point shared by the cdparse binary and the tests. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdp

#endif  // CDP_CLI_HPP
