// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "cdp/chart.hpp"
#include "cdp/cli.hpp"
#include "cdp/eval.hpp"
#include "cdp/pipeline.hpp"
#include "generators.hpp"

using namespace cdp;
using cdp::testing::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::set<Span> internal_spans(const Tree& t) {
  std::set<Span> out;
  cdp::testing::collect_spans(t, out);
  std::erase_if(out, [](const Span& s) { return s.length() < 2; });
  return out;
}

// Multiplies every matrix coming out of the wrapped provider by a constant.
class ScaledProvider final : public EmbeddingProvider {
 public:
  ScaledProvider(EmbeddingProvider& inner, float c) : inner_(inner), c_(c) {}
  std::vector<EmbeddingMatrix> embed_batch(std::span<const EmbeddingRequest> requests) override {
    auto out = inner_.embed_batch(requests);
    for (auto& m : out) m *= c_;
    return out;
  }
  std::string describe() const override { return "scaled"; }

 private:
  EmbeddingProvider& inner_;
  float c_;
};

// ---------------------------------------------------------------------------

Outcome chart_oracle() {
  Outcome r;
  Rng rng(1001);
  const auto t0 = Clock::now();
  const int tables = 1200;
  for (int iter = 0; iter < tables && r.ok; ++iter) {
    const std::size_t n = cdp::testing::uniform(rng, 2, 8);
    const auto scores = cdp::testing::random_table(rng, n, iter % 2 == 0);
    const auto cky = min_score_parse(n, scores);
    const auto brute = brute_force_parse(n, scores);
    if (cky.score != brute.score) r.fail("score mismatch at table " + std::to_string(iter));
    if (!(cky.tree == brute.tree)) r.fail("tree mismatch at table " + std::to_string(iter));
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 30.0) r.fail("took " + fmt("%.2f s", elapsed));
  if (r.ok) r.detail = std::to_string(tables) + " tables, " + fmt("%.2f s", elapsed);
  return r;
}

Outcome normalization() {
  Outcome r;
  Rng rng(1002);
  std::size_t groups = 0, zero_groups = 0;
  for (int iter = 0; iter < 500 && r.ok; ++iter) {
    const std::size_t n = cdp::testing::uniform(rng, 3, 20);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-6, 6)(rng));
    SpanScores raw;
    std::set<std::size_t> zeroed;
    for (std::size_t len = 2; len < n; ++len)
      if (cdp::testing::coin(rng, 0.1)) zeroed.insert(len);
    for (std::size_t len = 2; len < n; ++len)
      for (std::size_t i = 0; i + len <= n; ++i)
        raw.emplace(Span{i, i + len},
                    zeroed.contains(len) ? 0.0 : scale * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    const auto normalized = normalize_by_length(raw, n);
    for (std::size_t len = 2; len < n; ++len) {
      double sq = 0.0;
      bool all_zero = true;
      for (std::size_t i = 0; i + len <= n; ++i) {
        const double v = normalized.at(Span{i, i + len});
        sq += v * v;
        all_zero = all_zero && v == 0.0;
      }
      ++groups;
      if (zeroed.contains(len)) {
        ++zero_groups;
        if (!all_zero) r.fail("all-zero group of length " + std::to_string(len) + " not left at zero");
      } else if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) {
        r.fail("group norm " + fmt("%.17g", std::sqrt(sq)));
      }
    }
  }
  if (r.ok) r.detail = std::to_string(groups) + " groups (" + std::to_string(zero_groups) + " all-zero)";
  return r;
}

Outcome scale_invariance() {
  Outcome r;
  Rng rng(1003);
  StubProvider stub(7);
  double worst = 0.0;
  std::size_t sentences = 0;
  for (auto norm : {NormVariant::SquaredFrobenius, NormVariant::Frobenius}) {
    ParserConfig cfg;
    cfg.norm = norm;
    for (int iter = 0; iter < 12 && r.ok; ++iter) {
      const auto words = cdp::testing::random_words(rng, cdp::testing::uniform(rng, 3, 12));
      const auto base = parse_sentence(words, stub, cfg);
      for (float c : {0.5f, 3.0f}) {
        ScaledProvider scaled(stub, c);
        const auto other = parse_sentence(words, scaled, cfg);
        if (!(other.result.tree == base.result.tree)) r.fail("tree changed under scale " + fmt("%g", c));
        for (const auto& [span, v] : base.table.normalized) {
          const double diff = std::abs(other.table.normalized.at(span) - v);
          worst = std::max(worst, diff);
          if (diff > 1e-9) r.fail("normalized score moved by " + fmt("%.3g", diff));
        }
      }
      ++sentences;
    }
  }
  if (r.ok) r.detail = std::to_string(sentences) + " sentences, max deviation " + fmt("%.3g", worst);
  return r;
}

Outcome score_count() {
  Outcome r;
  Rng rng(1004);
  StubProvider stub(11);
  std::size_t spans = 0;
  for (std::size_t n = 4; n <= 12 && r.ok; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto words = cdp::testing::random_words(rng, n);
      const auto plans = plans_for_sentence(words, KindSet::all());
      const DistortionOptions opts;
      const auto raw = raw_scores(words, stub, 4, KindSet::all(), PlanOptions{}, std::span(&opts, 1));
      for (std::size_t len = 2; len < n; ++len)
        for (std::size_t i = 0; i + len <= n; ++i) {
          const Span s{i, i + len};
          const std::size_t expected = (i == 0 || i + len == n) ? 6 : 8;
          std::size_t enumerated = 0;
          for (const auto& p : plans.at(s)) enumerated += p.term_count();
          if (enumerated != expected)
            r.fail("span [" + std::to_string(i) + "," + std::to_string(i + len) + ") of n=" + std::to_string(n) +
                   " has " + std::to_string(enumerated) + " terms");
          if (raw.at(0).at(s).terms() != expected) r.fail("scored term count differs from enumeration");
          ++spans;
        }
      if (plans.size() != (n - 1) * (n - 2) / 2 + (n - 2)) r.fail("unexpected span count for n=" + std::to_string(n));
    }
  }
  if (r.ok) r.detail = std::to_string(spans) + " spans over n = 4..12";
  return r;
}

Outcome zero_identity() {
  Outcome r;
  Rng rng(1005);
  std::size_t plans_checked = 0;
  for (int iter = 0; iter < 40 && r.ok; ++iter) {
    const std::size_t n = cdp::testing::uniform(rng, 3, 10);
    const auto words = cdp::testing::random_words(rng, n);
    EmbeddingMatrix original(static_cast<Eigen::Index>(n), 8);
    for (Eigen::Index i = 0; i < original.size(); ++i)
      original.data()[i] = std::uniform_real_distribution<float>(-3.0f, 3.0f)(rng);
    for (const auto& [span, plans] : plans_for_sentence(words, KindSet::all())) {
      std::vector<EmbeddingMatrix> perturbed;
      for (const auto& plan : plans) {
        EmbeddingMatrix m = EmbeddingMatrix::Constant(static_cast<Eigen::Index>(plan.tokens.size()), 8, -9.0f);
        for (const auto& p : plan.pairs)
          m.middleRows(p.perturbed.start, p.perturbed.length()) =
              original.middleRows(p.original.start, p.original.length());
        perturbed.push_back(std::move(m));
      }
      for (auto norm : {NormVariant::SquaredFrobenius, NormVariant::Frobenius}) {
        const auto d = span_distortion(original, plans, perturbed, DistortionOptions{norm, false});
        if (d.sub != 0.0 || d.dc != 0.0 || d.move != 0.0) r.fail("nonzero distortion for copied segments");
      }
      plans_checked += plans.size();
    }
  }
  if (r.ok) r.detail = std::to_string(plans_checked) + " plans";
  return r;
}

Tree tree_of(std::string_view text) { return collapse_unary(*read_bracketed(text).at(0).gold); }

Outcome evaluation_protocol() {
  Outcome r;
  // Gold against itself, including random trees.
  {
    Evaluator ev;
    Rng rng(1006);
    cdp::testing::TreeTextGenerator gen(rng, 0.0);
    for (int i = 0; i < 200; ++i) {
      const Tree t = tree_of(gen(cdp::testing::uniform(rng, 1, 15)));
      ev.add(t, t);
    }
    const auto rep = ev.report();
    if (rep.corpus_f1 != 100.0) r.fail("gold-vs-gold F1 " + fmt("%.17g", rep.corpus_f1));
    for (const auto& [label, v] : rep.label_recall)
      if (v != 100.0) r.fail("gold-vs-gold recall for " + label);
  }
  // Toy treebank: sentence F1 2/3, 1, 1, 0, 1/2.
  {
    const std::vector<std::pair<const char*, const char*>> toy{
        {"(S (NP (DT the) (NN cat)) (VP (VBD sat) (PP (IN on) (NP (DT the) (NN mat)))))",
         "(X (X (X the) (X cat)) (X sat) (X on) (X (X the) (X mat)))"},
        {"(S (NP (PRP they)) (VP (VBD watched) (NP (DT a) (NN film))))",
         "(X (X they) (X (X watched) (X (X a) (X film))))"},
        {"(S (NP (NNP john)) (VP (VBD ran)))", "(X (X john) (X ran))"},
        {"(S (SBAR (IN if) (S (NP (PRP it)) (VP (VBZ rains)))) (NP (PRP we)) (VP (VBP stay)))",
         "(X (X if) (X (X it) (X (X rains) (X (X we) (X stay)))))"},
        {"(S (NP (DT the) (JJ old) (NN dog)) (ADVP (RB slowly)) (VP (VBD ran)))",
         "(X (X (X (X (X the) (X old)) (X dog)) (X slowly)) (X ran))"},
    };
    Evaluator ev;
    for (const auto& [gold, pred] : toy) ev.add(tree_of(pred), tree_of(gold));
    const auto rep = ev.report();
    const std::vector<double> expected{200.0 / 3.0, 100.0, 100.0, 0.0, 50.0};
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (std::abs(rep.per_sentence_f1.at(i) - expected[i]) > 1e-12)
        r.fail("toy sentence " + std::to_string(i) + " F1 " + fmt("%.17g", rep.per_sentence_f1[i]));
    const std::map<std::string, double> recall{{"NP", 100.0}, {"PP", 0.0}, {"SBAR", 0.0}, {"VP", 50.0}};
    if (rep.label_recall != recall) r.fail("toy label recalls differ");
  }
  // Baselines against enumerated span sets.
  for (std::size_t n = 1; n <= 12; ++n) {
    std::set<Span> rb, lb;
    for (std::size_t i = 1; i + 1 < n; ++i) rb.insert(Span{i, n});
    for (std::size_t j = 2; j < n; ++j) lb.insert(Span{0, j});
    if (nontrivial_spans(right_branching_tree(n)) != rb) r.fail("right-branching spans wrong for n=" + std::to_string(n));
    if (nontrivial_spans(left_branching_tree(n)) != lb) r.fail("left-branching spans wrong for n=" + std::to_string(n));
  }
  if (r.ok) r.detail = "gold-vs-gold 100.00, toy treebank exact, baselines n = 1..12";
  return r;
}

Outcome preprocessing() {
  Outcome r;
  const std::vector<std::pair<std::string, std::string>> cases{
      {"(S (NP (DT The) (NN cat)) (VP (VBD sat)) (. .))", "(S (NP (DT The) (NN cat)) (VP (VBD sat)))"},
      {"((S (NP (PRP It)) (VP (VBD rained)) (. .)))", "(S (NP (PRP It)) (VP (VBD rained)))"},
      {"(S (NP (NNP John)) (, ,) (NP (NNP Mary)) (VP (VBD left)))", "(S (NP (NNP John)) (NP (NNP Mary)) (VP (VBD left)))"},
      {"(S (NP (PRP He)) (PRN (-LRB- -LRB-) (-RRB- -RRB-)) (VP (VBD won)))", "(S (NP (PRP He)) (VP (VBD won)))"},
      {"(S (NP (NP (NN tea)) (, ,)) (VP (VBD cooled)))", "(S (NP (NP (NN tea))) (VP (VBD cooled)))"},
      {"(S (`` ``) (NP (PRP We)) (VP (VBD sang)) ('' ''))", "(S (NP (PRP We)) (VP (VBD sang)))"},
      {"(S (NP (DT a) (NN b)) (VP (VBD c) (NP (DT d) (NN e)) (: :)))",
       "(S (NP (DT a) (NN b)) (VP (VBD c) (NP (DT d) (NN e))))"},
      {"(S (NP-SBJ (NP (DT the) (NN dog))) (VP (VBD barked)))", "(S (NP-SBJ (NP (DT the) (NN dog))) (VP (VBD barked)))"},
      {"(S (NP (NN Yes)) (. .))", "(S (NP (NN Yes)))"},
      {"(S (S (NP (PRP I)) (VP (VBD came))) (, ,) (. .))", "(S (S (NP (PRP I)) (VP (VBD came))))"},
  };
  std::string file, expected;
  for (const auto& [in, out] : cases) {
    file += in + "\n";
    expected += out + "\n";
  }
  std::vector<Tree> trees;
  std::vector<std::vector<Token>> tokens;
  for (const auto& rec : read_bracketed(file)) {
    auto pruned = remove_punctuation(rec, default_punct_tags());
    if (!pruned) {
      r.fail("sentence unexpectedly skipped");
      continue;
    }
    trees.push_back(collapse_unary(*pruned->gold));
    tokens.push_back(pruned->tokens);
  }
  const std::string written = write_bracketed(trees, tokens);
  if (written != expected) r.fail("written trees differ:\n" + written);
  // Chains end up merged: only a node directly above a single word may keep one child.
  std::function<void(const Tree&)> check = [&](const Tree& t) {
    if (t.children.size() == 1 && !t.children[0].children.empty()) r.fail("unmerged unary chain");
    for (const auto& c : t.children) check(c);
  };
  for (const auto& t : trees) check(t);
  if (trees.size() > 4 && trees[4].children.at(0).labels != Labels{"NP", "NP"}) r.fail("chain labels not merged");

  Rng rng(1007);
  cdp::testing::TreeTextGenerator gen(rng, 0.2);
  for (int i = 0; i < 1000 && r.ok; ++i) {
    const Tree raw = *read_bracketed(gen(cdp::testing::uniform(rng, 1, 16))).at(0).gold;
    const Tree once = collapse_unary(raw);
    if (!(collapse_unary(once) == once)) r.fail("collapse not idempotent on random tree " + std::to_string(i));
    std::set<Span> before, after;
    cdp::testing::collect_spans(raw, before);
    cdp::testing::collect_spans(once, after);
    if (before != after) r.fail("collapse changed the span set");
  }
  if (r.ok) r.detail = "10 crafted trees byte-identical, 1000 random trees idempotent";
  return r;
}

Outcome ablation_coherence() {
  Outcome r;
  Rng rng(1008);
  StubProvider stub(13);
  const std::vector<CombineRule> rules{CombineRule::SumThenNormalize, CombineRule::NormalizeThenSum,
                                       CombineRule::NormalizeThenMin, CombineRule::NormalizeThenMax};
  std::size_t sentences = 0;
  for (const char* kinds : {"sub", "dc", "move"}) {
    for (int iter = 0; iter < 10 && r.ok; ++iter) {
      const auto words = cdp::testing::random_words(rng, cdp::testing::uniform(rng, 3, 12));
      std::vector<Tree> trees;
      for (auto rule : rules) {
        ParserConfig cfg;
        cfg.kinds = KindSet::parse(kinds);
        cfg.combine = rule;
        trees.push_back(parse_sentence(words, stub, cfg).result.tree);
      }
      for (std::size_t i = 1; i < trees.size(); ++i)
        if (!(trees[i] == trees[0]))
          r.fail(std::string(kinds) + ": " + std::string(to_string(rules[i])) + " tree differs from sumN");
      ++sentences;
    }
  }
  if (r.ok) r.detail = std::to_string(sentences) + " sentences x 4 rules";
  return r;
}

Outcome end_to_end() {
  Outcome r;
  const fs::path dir = fs::temp_directory_path() / ("cdp_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Rng rng(1009);
  cdp::testing::TreeTextGenerator gen(rng, 0.15);
  {
    std::ofstream corpus(dir / "toy.mrg");
    for (int i = 0; i < 20; ++i) corpus << gen(cdp::testing::uniform(rng, 4, 18)) << "\n";
  }
  auto run = [&](const std::string& out, const std::string& workers) {
    std::ostringstream sink, err;
    const int rc = run_cli({"parse", "--backend", "stub:5", "--input", (dir / "toy.mrg").string(), "--output",
                            (dir / out).string(), "--workers", workers},
                           sink, err);
    if (rc != 0) r.fail("parse exited " + std::to_string(rc) + ": " + err.str());
    std::ifstream in(dir / out);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto t0 = Clock::now();
  const std::string first = run("a.txt", "1");
  const double elapsed = seconds_since(t0);
  const std::string second = run("b.txt", "1");
  const std::string threaded = run("c.txt", "4");
  if (first != second) r.fail("two runs differ");
  if (first != threaded) r.fail("worker count changes output");
  if (std::count(first.begin(), first.end(), '\n') != 20) r.fail("expected 20 output trees");
  if (elapsed >= 10.0) r.fail("20 sentences took " + fmt("%.2f s", elapsed));
  fs::remove_all(dir);
  if (r.ok) r.detail = "byte-identical, 20 sentences in " + fmt("%.2f s", elapsed);
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"chart-oracle-equivalence", chart_oracle},
      {"normalization-invariant", normalization},
      {"scale-invariance", scale_invariance},
      {"score-count-invariant", score_count},
      {"distortion-zero-identity", zero_identity},
      {"evaluation-protocol", evaluation_protocol},
      {"preprocessing", preprocessing},
      {"ablation-coherence", ablation_coherence},
      {"end-to-end-determinism", end_to_end},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %s: %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
    failures += !o.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
