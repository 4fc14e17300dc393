#include "cdp/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "cdp/http_backend.hpp"

namespace cdp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

// Opens a named file or falls back to a default stream for "" and "-".
class Input {
 public:
  Input(const std::string& path, std::istream& fallback) : stream_(&fallback) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file_) throw std::runtime_error("cannot open '" + path + "'");
    stream_ = file_.get();
  }
  std::istream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ifstream> file_;
  std::istream* stream_;
};

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw std::runtime_error("cannot write '" + path + "'");
    stream_ = file_.get();
  }
  std::ostream& get() { return *stream_; }
  void close() {
    stream_->flush();
    if (file_) {
      file_->close();
      if (!*file_) throw std::runtime_error("write failed");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

void write_file(const std::string& path, const std::string& text) {
  Output o(path, std::cout);
  o.get() << text;
  o.close();
}

// Reads either bracketed trees or one tokenized sentence per line.
class SentenceSource {
 public:
  SentenceSource(std::istream& in, std::string format) : in_(in), format_(std::move(format)), reader_(in) {
    if (format_ == "auto") {
      in_ >> std::ws;
      format_ = in_.peek() == '(' ? "tree" : "text";
    }
    if (format_ != "tree" && format_ != "text") throw std::invalid_argument("unknown format '" + format_ + "'");
  }

  std::optional<SentenceRecord> next() {
    if (format_ == "tree") return reader_.next();
    std::string line;
    while (std::getline(in_, line)) {
      std::istringstream words(line);
      SentenceRecord rec;
      std::string w;
      while (words >> w) rec.tokens.push_back({w, ""});
      if (!rec.tokens.empty()) return rec;
    }
    return std::nullopt;
  }

 private:
  std::istream& in_;
  std::string format_;
  BracketedReader reader_;
};

std::vector<SentenceRecord> read_treebank(const std::string& path) {
  Input in(path, std::cin);
  BracketedReader reader(in.get());
  std::vector<SentenceRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

ProviderPtr require_provider(const RunConfig& config) {
  if (!config.backend) throw std::invalid_argument("--backend is required");
  return make_provider(*config.backend);
}

const std::string& corpus_path(const RunConfig& config) {
  if (!config.gold.empty()) return config.gold;
  if (!config.input.empty()) return config.input;
  throw std::invalid_argument("--gold treebank is required");
}

std::string joined_tags(const std::set<std::string>& tags) {
  if (tags.empty()) return "none";
  std::string out;
  for (const auto& t : tags) out += (out.empty() ? "" : " ") + t;
  return out;
}

void write_parse_chunk(std::vector<SentenceRecord>& chunk, EmbeddingProvider& provider, const RunConfig& config,
                       std::ostream& out, std::ostream* dump) {
  std::vector<std::vector<Token>> tokens(chunk.size());
  std::vector<SentenceParse> parses(chunk.size());
  for (std::size_t i = 0; i < chunk.size(); ++i) tokens[i] = parse_tokens(chunk[i], config);
  parallel_for(chunk.size(), config.workers, [&](std::size_t i) {
    parses[i] = parse_sentence(token_texts(tokens[i]), provider, config.parser);
  });
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    out << write_tree(retag_leaves(parses[i].result.tree, tokens[i]), tokens[i]) << '\n';
    if (dump) *dump << score_table_json(parses[i].table) << '\n';
  }
  out.flush();
  chunk.clear();
}

int cmd_parse(const RunConfig& config, std::ostream& out) {
  auto provider = require_provider(config);
  Input in(config.input, std::cin);
  Output output(config.output, out);
  std::optional<Output> dump;
  if (!config.dump_scores.empty()) dump.emplace(config.dump_scores, out);
  SentenceSource source(in.get(), config.format);
  const std::size_t chunk_size = std::max<std::size_t>(64, 8 * config.workers);
  std::vector<SentenceRecord> chunk;
  while (auto rec = source.next()) {
    chunk.push_back(std::move(*rec));
    if (chunk.size() == chunk_size)
      write_parse_chunk(chunk, *provider, config, output.get(), dump ? &dump->get() : nullptr);
  }
  if (!chunk.empty()) write_parse_chunk(chunk, *provider, config, output.get(), dump ? &dump->get() : nullptr);
  output.close();
  if (dump) dump->close();
  return 0;
}

// Predicted trees read back from a file, matched to gold by record index.
EvalReport evaluate_predictions(const RunConfig& config, const std::vector<SentenceRecord>& gold,
                                const PreparedCorpus& corpus) {
  auto predicted = read_treebank(config.input);
  if (predicted.size() != gold.size())
    throw std::invalid_argument("prediction file has " + std::to_string(predicted.size()) + " trees, gold has " +
                                std::to_string(gold.size()));
  Evaluator evaluator;
  for (std::size_t k = 0; k < corpus.skipped; ++k) evaluator.skip();
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sentence = corpus.sentences[s];
    const std::size_t r = corpus.source[s];
    if (!predicted[r].gold) throw std::invalid_argument("prediction " + std::to_string(r + 1) + " has no tree");
    Tree pred = collapse_unary(*predicted[r].gold);
    const std::size_t words = pred.span.end;
    if (words == sentence.tokens.size()) {
      evaluator.add(project_prediction(pred, sentence), sentence.gold);
      continue;
    }
    if (words == gold[r].tokens.size()) {
      std::vector<bool> keep(words);
      for (std::size_t i = 0; i < words; ++i) keep[i] = !config.punct_tags.contains(gold[r].tokens[i].tag);
      auto filtered = filter_words(pred, keep);
      if (filtered && filtered->span.end == sentence.gold.span.end) {
        evaluator.add(*filtered, sentence.gold);
        continue;
      }
    }
    throw std::invalid_argument("prediction " + std::to_string(r + 1) + " has " + std::to_string(words) +
                                " words, gold has " + std::to_string(gold[r].tokens.size()));
  }
  return evaluator.report();
}

int cmd_evaluate(const RunConfig& config, std::ostream& out) {
  if (config.gold.empty()) throw std::invalid_argument("--gold treebank is required");
  const auto gold = read_treebank(config.gold);
  const auto corpus = prepare_corpus(gold, config.punct_tags, config.defer_punct);

  EvalReport report;
  std::vector<std::optional<ScoreTable>> tables;
  const bool want_tables = !config.dump_scores.empty() || !config.length_report.empty();
  if (config.baseline) {
    report = evaluate_baseline(corpus, *config.baseline);
  } else if (!config.input.empty()) {
    report = evaluate_predictions(config, gold, corpus);
  } else {
    auto provider = require_provider(config);
    tables.resize(corpus.sentences.size());
    TableHook hook;
    if (want_tables) hook = [&](std::size_t, std::size_t s, const ScoreTable& t) { tables[s] = t; };
    const std::vector<ParserConfig> configs{config.parser};
    report = evaluate_configs(corpus, *provider, configs, config.workers, hook).front();
  }
  for (const auto& [k, v] : run_echo(config)) report.config[k] = v;

  if (want_tables && !tables.empty()) {
    std::vector<ScoreDump> dumps;
    std::vector<Tree> golds;
    std::string lines;
    for (std::size_t s = 0; s < tables.size(); ++s) {
      if (!tables[s]) continue;
      lines += score_table_json(*tables[s]) + "\n";
      // Length statistics need scores indexed like the gold tree.
      if (corpus.sentences[s].keep.empty()) {
        dumps.push_back(to_dump(*tables[s]));
        golds.push_back(corpus.sentences[s].gold);
      }
    }
    if (!config.dump_scores.empty()) write_file(config.dump_scores, lines);
    if (!config.length_report.empty()) {
      const auto stats = distortion_by_length_report(dumps, golds, config.max_length);
      write_file(config.length_report, length_csv(stats));
    }
  }

  Output output(config.output, out);
  output.get() << report_table(report);
  output.close();
  if (!config.report.empty()) write_file(config.report, report_json(report));
  return 0;
}

int cmd_export(const RunConfig& config, std::ostream& out) {
  Input in(corpus_path(config), std::cin);
  SentenceSource source(in.get(), config.format);
  const std::vector<int> layers = config.layers.empty() ? std::vector<int>{config.parser.layer} : config.layers;
  Output output(config.output, out);
  std::size_t sentences = 0;
  {
    RequestExporter exporter(output.get(), config.parser.plan.mask);
    while (auto rec = source.next()) {
      const auto words = token_texts(parse_tokens(*rec, config));
      for (int layer : layers) exporter.add_sentence(words, config.parser.kinds, layer, config.parser.plan);
      ++sentences;
    }
    exporter.finish();
    if (!config.output.empty() && config.output != "-")
      out << exporter.size() << " unique sequences from " << sentences << " sentences\n";
  }
  output.close();
  return 0;
}

PreparedCorpus load_corpus(const RunConfig& config) {
  const auto gold = read_treebank(corpus_path(config));
  return prepare_corpus(gold, config.punct_tags, config.defer_punct);
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
  if (config.layers.empty()) throw std::invalid_argument("--layers is required");
  auto provider = require_provider(config);
  const auto corpus = load_corpus(config);
  auto sweep = layer_sweep(corpus, *provider, config.layers, config.parser, config.workers);
  for (auto& [layer, report] : sweep)
    for (const auto& [k, v] : run_echo(config))
      if (k != "layer") report.config[k] = v;
  Output output(config.output, out);
  output.get() << sweep_csv(sweep);
  output.close();
  if (!config.report.empty()) write_file(config.report, sweep_json(sweep));
  return 0;
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
  auto provider = require_provider(config);
  const auto corpus = load_corpus(config);
  const auto configs = parse_grid(config.grid, config.parser);
  auto rows = ablation_grid(corpus, *provider, configs, config.workers);
  const auto echo = run_echo(config);
  for (auto& row : rows)
    for (const auto& key : {"backend", "punct_tags", "punct_timing"}) row.report.config[key] = echo.at(key);
  Output output(config.output, out);
  output.get() << ablation_table(rows);
  output.close();
  if (!config.report.empty()) write_file(config.report, ablation_json(rows));
  return 0;
}

int cmd_serve_check(const RunConfig& config, std::ostream& out) {
  if (!config.backend || config.backend->kind != BackendKind::HttpService)
    throw std::invalid_argument("serve-check needs an http backend");
  const auto result = serve_check(config.backend->location, config.parser.layer);
  out << "health: " << result.health << '\n';
  for (const auto& p : result.problems) out << "problem: " << p << '\n';
  out << (result.ok ? "OK" : "FAILED") << '\n';
  return result.ok ? 0 : 1;
}

}  // namespace

std::vector<int> parse_layers(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) throw std::invalid_argument("empty layer in '" + text + "'");
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_int(part));
      continue;
    }
    const int lo = parse_int(trim(part.substr(0, dash)));
    const int hi = parse_int(trim(part.substr(dash + 1)));
    if (lo > hi) throw std::invalid_argument("descending layer range '" + part + "'");
    for (int l = lo; l <= hi; ++l) out.push_back(l);
  }
  for (int l : out)
    if (l < 0) throw std::invalid_argument("negative layer in '" + text + "'");
  return out;
}

std::set<std::string> parse_tag_list(const std::string& text) {
  std::istringstream in(text);
  std::set<std::string> out;
  std::string tag;
  while (in >> tag) out.insert(tag);
  if (out.size() == 1 && out.contains("none")) out.clear();
  return out;
}

std::vector<ParserConfig> parse_grid(const std::string& text, const ParserConfig& base) {
  std::vector<int> layers{base.layer};
  std::vector<NormVariant> norms{base.norm};
  std::vector<CombineRule> rules{base.combine};
  std::vector<KindSet> kinds{base.kinds};
  for (const auto& axis : split(text, ';')) {
    if (axis.empty()) continue;
    const auto eq = axis.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("grid axis '" + axis + "' lacks '='");
    const auto name = trim(axis.substr(0, eq));
    const auto values = trim(axis.substr(eq + 1));
    if (name == "layer") {
      layers = parse_layers(values);
    } else if (name == "norm") {
      norms.clear();
      for (const auto& v : split(values, ',')) norms.push_back(parse_norm(v));
    } else if (name == "combine") {
      rules.clear();
      for (const auto& v : split(values, ',')) rules.push_back(parse_combine(v));
    } else if (name == "perturbations") {
      kinds.clear();
      for (const auto& v : split(values, ',')) kinds.push_back(KindSet::parse(v));
    } else {
      throw std::invalid_argument("unknown grid axis '" + name + "'");
    }
  }
  std::vector<ParserConfig> out;
  for (int layer : layers)
    for (auto norm : norms)
      for (auto rule : rules)
        for (auto k : kinds) {
          ParserConfig cfg = base;
          cfg.layer = layer;
          cfg.norm = norm;
          cfg.combine = rule;
          cfg.kinds = k;
          out.push_back(cfg);
        }
  return out;
}

std::map<std::string, std::string> run_echo(const RunConfig& config) {
  auto echo = config_echo(config.parser);
  echo["backend"] = config.backend ? config.backend->to_string() : "none";
  echo["punct_tags"] = joined_tags(config.punct_tags);
  echo["punct_timing"] = config.defer_punct ? "eval" : "parse";
  return echo;
}

std::vector<Token> parse_tokens(const SentenceRecord& record, const RunConfig& config) {
  if (config.defer_punct) return record.tokens;
  auto pruned = remove_punctuation(SentenceRecord{record.tokens, std::nullopt}, config.punct_tags);
  if (!pruned || pruned->tokens.empty()) return record.tokens;
  return pruned->tokens;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constituency parsing from masked-LM representational distortion", "cdparse"};
  app.set_config("--config", "", "key=value configuration file; flags take precedence");
  app.get_config_formatter_base()->arrayDelimiter('\x1f');
  app.require_subcommand(1);
  app.fallthrough();

  std::string backend, norm = "sqfro", combine = "sumN", perturbations = "sub,dc,move";
  std::string punct_tags = joined_tags(default_punct_tags()), punct_timing = "parse";
  std::string layers, baseline;
  RunConfig config;
  std::size_t batch_size = 32, cache = 0;
  std::string divisor = "rows";

  app.add_option("--backend", backend, "file:PATH | http:URL | stub[:SEED]");
  app.add_option("--layer", config.parser.layer, "Encoder layer")->capture_default_str();
  app.add_option("--norm", norm, "sqfro | fro")->capture_default_str();
  app.add_option("--frobenius-divisor", divisor, "rows | sqrt-rows")->capture_default_str();
  app.add_option("--combine", combine, "sumN | Nsum | Nmin | Nmax")->capture_default_str();
  app.add_option("--perturbations", perturbations, "Subset of sub,dc,move")->capture_default_str();
  app.add_option("--punct-tags", punct_tags, "Whitespace-separated tags, or none")->capture_default_str();
  app.add_option("--punct-timing", punct_timing, "parse | eval")->capture_default_str();
  app.add_option("--mask", config.parser.plan.mask, "Mask placeholder token")->capture_default_str();
  app.add_option("--separator", config.parser.plan.separator, "Segment separator token")->capture_default_str();
  app.add_option("--workers", config.workers, "Parallel sentence workers")->capture_default_str();
  app.add_option("--batch-size", batch_size, "Sequences per backend request")->capture_default_str();
  app.add_option("--max-sequences", config.parser.max_sequences_per_call, "Perturbed sequences scored at once")
      ->capture_default_str();
  app.add_option("--cache", cache, "Embedding cache entries (0 disables)")->capture_default_str();
  app.add_option("--format", config.format, "Input format: auto | tree | text")->capture_default_str();
  app.add_option("--input", config.input, "Input file (- for stdin)");
  app.add_option("--gold", config.gold, "Gold treebank");
  app.add_option("--output", config.output, "Output file (default stdout)");
  app.add_option("--report", config.report, "JSON report file");
  app.add_option("--dump-scores", config.dump_scores, "Per-sentence score table JSONL");
  app.add_option("--length-report", config.length_report, "Distortion-by-length CSV");
  app.add_option("--max-length", config.max_length, "Longest span length in the length report (0 = all)");
  app.add_option("--layers", layers, "Layer list, e.g. 0-12 or 3,5,7");
  app.add_option("--grid", config.grid, "Ablation grid, e.g. combine=sumN,Nsum;perturbations=sub+dc+move,sub");
  app.add_option("--baseline", baseline, "right | left");

  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"parse", "Parse sentences into trees"},
           {"evaluate", "Score parses against a gold treebank"},
           {"export", "Write the embedding request manifest"},
           {"sweep", "Evaluate every layer in --layers"},
           {"ablate", "Evaluate an ablation grid"},
           {"serve-check", "Probe an embedding service"}})
    app.add_subcommand(name, help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    config.command = app.get_subcommands().front()->get_name();
    if (!backend.empty()) {
      auto b = BackendConfig::parse(backend);
      b.batch_size = batch_size;
      b.cache_capacity = cache;
      config.backend = b;
    }
    if (batch_size == 0) throw std::invalid_argument("--batch-size must be positive");
    if (config.workers == 0) throw std::invalid_argument("--workers must be positive");
    if (config.parser.max_sequences_per_call == 0) throw std::invalid_argument("--max-sequences must be positive");
    config.parser.norm = parse_norm(norm);
    config.parser.combine = parse_combine(combine);
    config.parser.kinds = KindSet::parse(perturbations);
    if (divisor != "rows" && divisor != "sqrt-rows")
      throw std::invalid_argument("--frobenius-divisor must be rows or sqrt-rows");
    config.parser.sqrt_row_divisor = divisor == "sqrt-rows";
    config.punct_tags = parse_tag_list(punct_tags);
    if (punct_timing != "parse" && punct_timing != "eval")
      throw std::invalid_argument("--punct-timing must be parse or eval");
    config.defer_punct = punct_timing == "eval";
    if (config.parser.layer < 0) throw std::invalid_argument("--layer must be non-negative");
    if (!layers.empty()) config.layers = parse_layers(layers);
    if (!baseline.empty()) {
      if (baseline == "right") config.baseline = Baseline::RightBranching;
      else if (baseline == "left") config.baseline = Baseline::LeftBranching;
      else throw std::invalid_argument("--baseline must be right or left");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (config.command == "parse") return cmd_parse(config, out);
    if (config.command == "evaluate") return cmd_evaluate(config, out);
    if (config.command == "export") return cmd_export(config, out);
    if (config.command == "sweep") return cmd_sweep(config, out);
    if (config.command == "ablate") return cmd_ablate(config, out);
    return cmd_serve_check(config, out);
  } catch (const ParseError& e) {
    err << "error: line " << e.line() << ", column " << e.column() << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace cdp
