#include "cdp/treebank.hpp"

#include <cctype>
#include <sstream>
#include <utility>

namespace cdp {

std::string to_string(const Span& span) {
  return "[" + std::to_string(span.start) + "," + std::to_string(span.end) + ")";
}

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

namespace {

// Raw s-expression node before tokens and spans are assigned.
struct SExpr {
  std::string label;
  std::string atom;  // non-empty for bare words
  std::vector<SExpr> children;
  std::size_t line = 0;
  std::size_t column = 0;

  bool is_atom() const { return !atom.empty(); }
};

bool is_delimiter(int c) { return c == '(' || c == ')' || std::isspace(c) || c == EOF; }

void assign(const SExpr& node, std::vector<Token>& tokens, Tree& out);

Tree leaf_for(const std::string& tag, std::string word, std::vector<Token>& tokens) {
  Tree leaf;
  leaf.labels = {tag.empty() ? std::string("X") : tag};
  leaf.span = {tokens.size(), tokens.size() + 1};
  tokens.push_back({std::move(word), tag});
  return leaf;
}

void assign(const SExpr& node, std::vector<Token>& tokens, Tree& out) {
  if (node.children.size() == 1 && node.children.front().is_atom()) {
    out = leaf_for(node.label, node.children.front().atom, tokens);
    return;
  }
  if (node.label.empty()) throw ParseError("constituent without a label", node.line, node.column);
  out.labels = {node.label};
  out.span.start = tokens.size();
  for (const auto& child : node.children) {
    Tree sub;
    if (child.is_atom())
      sub = leaf_for("", child.atom, tokens);
    else
      assign(child, tokens, sub);
    out.children.push_back(std::move(sub));
  }
  out.span.end = tokens.size();
}

}  // namespace

int BracketedReader::get() {
  int c = in_.get();
  if (c == '\n') {
    ++line_;
    column_ = 0;
  } else if (c != EOF) {
    ++column_;
  }
  return c;
}

void BracketedReader::skip_space() {
  while (peek() != EOF && std::isspace(peek())) get();
}

std::string BracketedReader::read_atom() {
  std::string atom;
  while (!is_delimiter(peek())) atom.push_back(static_cast<char>(get()));
  return atom;
}

std::optional<SentenceRecord> BracketedReader::next() {
  skip_space();
  if (peek() == EOF) return std::nullopt;
  if (peek() != '(') {
    const int c = get();
    throw ParseError(c == ')' ? "unbalanced ')'" : "expected '(' at start of tree", line_, column_);
  }

  // Iterative descent keeps deep trees off the call stack.
  std::vector<SExpr> stack;
  for (;;) {
    skip_space();
    int c = peek();
    if (c == EOF) {
      const auto& open = stack.back();
      throw ParseError("unbalanced '(' opened at line " + std::to_string(open.line) + ", column " +
                           std::to_string(open.column),
                       line_, column_);
    }
    if (c == '(') {
      get();
      SExpr node;
      node.line = line_;
      node.column = column_;
      skip_space();
      if (peek() != '(' && peek() != ')') node.label = read_atom();
      stack.push_back(std::move(node));
    } else if (c == ')') {
      get();
      if (stack.empty()) throw ParseError("unbalanced ')'", line_, column_);
      SExpr done = std::move(stack.back());
      stack.pop_back();
      if (done.children.empty()) throw ParseError("empty tree", done.line, done.column);
      if (stack.empty()) {
        // Strip unlabeled root wrappers: "( (S ...) )".
        while (done.label.empty() && done.children.size() == 1 && !done.children.front().is_atom()) {
          SExpr inner = std::move(done.children.front());
          done = std::move(inner);
        }
        SentenceRecord rec;
        Tree root;
        assign(done, rec.tokens, root);
        rec.gold = std::move(root);
        return rec;
      }
      stack.back().children.push_back(std::move(done));
    } else {
      if (stack.empty()) throw ParseError("expected '('", line_, column_);
      SExpr atom;
      atom.line = line_;
      atom.column = column_ + 1;
      atom.atom = read_atom();
      stack.back().children.push_back(std::move(atom));
    }
  }
}

std::vector<SentenceRecord> read_bracketed(std::string_view text) {
  std::istringstream in{std::string(text)};
  BracketedReader reader(in);
  std::vector<SentenceRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

std::vector<SentenceRecord> read_tokenized(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<SentenceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    SentenceRecord rec;
    std::string word;
    while (words >> word) rec.tokens.push_back({word, ""});
    if (!rec.tokens.empty()) out.push_back(std::move(rec));
  }
  return out;
}

Tree collapse_unary(const Tree& tree) {
  if (tree.is_leaf()) return tree;
  Tree out;
  out.labels = tree.labels;
  out.span = tree.span;
  const Tree* cur = &tree;
  while (cur->children.size() == 1 && !cur->children.front().is_leaf()) {
    cur = &cur->children.front();
    out.labels.insert(out.labels.end(), cur->labels.begin(), cur->labels.end());
  }
  out.children.reserve(cur->children.size());
  for (const auto& child : cur->children) out.children.push_back(collapse_unary(child));
  return out;
}

namespace {

std::optional<Tree> rebuild(const Tree& node, const std::vector<bool>& keep,
                            const std::vector<std::size_t>& new_index) {
  if (node.is_leaf()) {
    if (!keep.at(node.span.start)) return std::nullopt;
    const std::size_t i = new_index[node.span.start];
    return Tree{node.labels, {i, i + 1}, {}};
  }
  Tree out;
  out.labels = node.labels;
  for (const auto& child : node.children) {
    if (auto sub = rebuild(child, keep, new_index)) out.children.push_back(std::move(*sub));
  }
  if (out.children.empty()) return std::nullopt;
  out.span = {out.children.front().span.start, out.children.back().span.end};
  return out;
}

}  // namespace

std::optional<Tree> filter_words(const Tree& tree, const std::vector<bool>& keep) {
  if (keep.size() != tree.span.end)
    throw std::invalid_argument("filter_words: mask length " + std::to_string(keep.size()) +
                                " does not match tree span " + to_string(tree.span));
  std::vector<std::size_t> new_index(keep.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    new_index[i] = next;
    if (keep[i]) ++next;
  }
  auto out = rebuild(tree, keep, new_index);
  if (!out) return std::nullopt;
  return collapse_unary(*out);
}

const std::set<std::string>& default_punct_tags() {
  static const std::set<std::string> tags{",", ".", ":", "``", "''", "-LRB-", "-RRB-"};
  return tags;
}

std::optional<SentenceRecord> remove_punctuation(const SentenceRecord& rec,
                                                 const std::set<std::string>& punct_tags) {
  std::vector<bool> keep(rec.tokens.size());
  SentenceRecord out;
  for (std::size_t i = 0; i < rec.tokens.size(); ++i) {
    keep[i] = !punct_tags.contains(rec.tokens[i].tag);
    if (keep[i]) out.tokens.push_back(rec.tokens[i]);
  }
  if (out.tokens.empty()) return std::nullopt;
  if (rec.gold) out.gold = filter_words(*rec.gold, keep);
  return out;
}

namespace {

void collect_spans(const Tree& node, std::size_t n, bool include_trivial, std::map<Span, Labels>& out) {
  if (node.is_leaf() && !include_trivial) return;
  if (include_trivial || !is_trivial(node.span, n)) {
    auto& labels = out[node.span];
    labels.insert(labels.end(), node.labels.begin(), node.labels.end());
  }
  for (const auto& child : node.children) collect_spans(child, n, include_trivial, out);
}

void collect_unlabeled(const Tree& node, std::size_t n, std::set<Span>& out) {
  if (node.is_leaf()) return;
  if (!is_trivial(node.span, n)) out.insert(node.span);
  for (const auto& child : node.children) collect_unlabeled(child, n, out);
}

void write_node(const Tree& node, std::span<const Token> tokens, std::string& out) {
  for (const auto& label : node.labels) {
    out += '(';
    out += label;
    out += ' ';
  }
  if (node.is_leaf()) {
    if (node.span.length() != 1 || node.span.end > tokens.size())
      throw std::invalid_argument("leaf span " + to_string(node.span) + " does not match " +
                                  std::to_string(tokens.size()) + " tokens");
    out += tokens[node.span.start].text;
  } else {
    for (std::size_t c = 0; c < node.children.size(); ++c) {
      if (c) out += ' ';
      write_node(node.children[c], tokens, out);
    }
  }
  out.append(node.labels.size(), ')');
}

}  // namespace

std::map<Span, Labels> gold_spans(const Tree& tree, bool include_trivial) {
  std::map<Span, Labels> out;
  collect_spans(tree, tree.span.end, include_trivial, out);
  return out;
}

std::set<Span> nontrivial_spans(const Tree& tree) {
  std::set<Span> out;
  collect_unlabeled(tree, tree.span.end, out);
  return out;
}

std::string write_tree(const Tree& tree, std::span<const Token> tokens) {
  if (tree.span.start != 0 || tree.span.end != tokens.size())
    throw std::invalid_argument("tree span " + to_string(tree.span) + " does not cover " +
                                std::to_string(tokens.size()) + " tokens");
  std::string out;
  write_node(tree, tokens, out);
  return out;
}

std::string write_bracketed(std::span<const Tree> trees, std::span<const std::vector<Token>> tokens) {
  if (trees.size() != tokens.size())
    throw std::invalid_argument("write_bracketed: " + std::to_string(trees.size()) + " trees but " +
                                std::to_string(tokens.size()) + " token lists");
  std::string out;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    out += write_tree(trees[i], tokens[i]);
    out += '\n';
  }
  return out;
}

void validate_tree(const Tree& tree) {
  if (tree.labels.empty()) throw std::invalid_argument("node " + to_string(tree.span) + " has no label");
  if (tree.span.start >= tree.span.end) throw std::invalid_argument("empty span " + to_string(tree.span));
  if (tree.is_leaf()) {
    if (tree.span.length() != 1) throw std::invalid_argument("leaf spans " + to_string(tree.span));
    return;
  }
  std::size_t cursor = tree.span.start;
  for (const auto& child : tree.children) {
    if (child.span.start != cursor)
      throw std::invalid_argument("children of " + to_string(tree.span) + " are not contiguous at " +
                                  std::to_string(cursor));
    validate_tree(child);
    cursor = child.span.end;
  }
  if (cursor != tree.span.end)
    throw std::invalid_argument("children of " + to_string(tree.span) + " stop at " + std::to_string(cursor));
}

std::string base_label(std::string_view label) {
  if (label.empty() || label.front() == '-') return std::string(label);
  const auto cut = label.find_first_of("-=");
  return std::string(label.substr(0, cut));
}

}  // namespace cdp
