#ifndef CDP_TREEBANK_HPP
#define CDP_TREEBANK_HPP

#include <compare>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cdp {

struct Token {
  std::string text;
  std::string tag;  // empty when the input carried no POS tags

  bool operator==(const Token&) const = default;
};

/// Half-open word interval [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(const Span& other) const { return start <= other.start && other.end <= end; }

  auto operator<=>(const Span&) const = default;
  bool operator==(const Span&) const = default;
};

std::string to_string(const Span& span);

/// A span is trivial for evaluation when it covers one word or the whole sentence.
inline bool is_trivial(const Span& span, std::size_t sentence_length) {
  return span.length() <= 1 || (span.start == 0 && span.end == sentence_length);
}

using Labels = std::vector<std::string>;

/// Constituency tree over word positions. A leaf is a preterminal: its labels
/// hold the POS tag and its span has length 1. Word text lives in the token
/// list of the owning sentence.
///
/// After collapse_unary an internal node has either >= 2 children or a single
/// leaf child (a phrase chain sitting directly above one word).
struct Tree {
  Labels labels;
  Span span;
  std::vector<Tree> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const Tree&) const = default;
};

struct SentenceRecord {
  std::vector<Token> tokens;
  std::optional<Tree> gold;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Incremental reader for s-expression bracketed trees. Trees may be
/// pretty-printed across lines; several trees may share a line.
class BracketedReader {
 public:
  explicit BracketedReader(std::istream& in) : in_(in) {}

  /// Returns the next tree, or nullopt at end of input.
  std::optional<SentenceRecord> next();

 private:
  int get();
  int peek() { return in_.peek(); }
  void skip_space();
  std::string read_atom();

  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t column_ = 0;
};

std::vector<SentenceRecord> read_bracketed(std::string_view text);

/// Plain tokenized text: one sentence per line, space separated. Blank lines are skipped.
std::vector<SentenceRecord> read_tokenized(std::string_view text);

/// Merges every chain of internal nodes sharing a span into one node whose
/// labels are the chain's labels top-down. Idempotent.
Tree collapse_unary(const Tree& tree);

/// Keeps the words whose flag is set, reindexing spans. Returns nullopt when
/// no word survives. Emptied nodes disappear and the result is re-collapsed.
std::optional<Tree> filter_words(const Tree& tree, const std::vector<bool>& keep);

const std::set<std::string>& default_punct_tags();

/// Deletes tokens whose tag is in punct_tags. Returns nullopt (skip) when the
/// sentence becomes empty.
std::optional<SentenceRecord> remove_punctuation(const SentenceRecord& rec,
                                                 const std::set<std::string>& punct_tags);

/// Internal-node spans mapped to their label chains. With include_trivial the
/// root span and the leaves are added; a leaf sharing a span with its parent
/// chain contributes its tag after the chain labels.
std::map<Span, Labels> gold_spans(const Tree& tree, bool include_trivial);

/// Unlabeled span set of a tree, trivial spans excluded.
std::set<Span> nontrivial_spans(const Tree& tree);

/// One tree, no trailing newline. Throws std::invalid_argument on span/token mismatch.
std::string write_tree(const Tree& tree, std::span<const Token> tokens);

/// One bracketed tree per line.
std::string write_bracketed(std::span<const Tree> trees, std::span<const std::vector<Token>> tokens);

/// Checks the span-partition invariant; throws std::invalid_argument naming the offending node.
void validate_tree(const Tree& tree);

/// Label with function tags and coindexation removed ("NP-SBJ-1" -> "NP").
/// Labels that begin with '-' ("-NONE-", "-LRB-") are returned unchanged.
std::string base_label(std::string_view label);

}  // namespace cdp

#endif  // CDP_TREEBANK_HPP
