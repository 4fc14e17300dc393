#include <gtest/gtest.h>

#include <algorithm>

#include "cdp/perturbation.hpp"
#include "generators.hpp"

using namespace cdp;
using cdp::testing::Rng;

namespace {

const std::vector<std::string> kFilm{"they", "watched", "a", "film", "this", "afternoon"};

using Words = std::vector<std::string>;

// Expected term count for one span, counted segment by segment.
std::size_t expected_terms(std::size_t n, Span s) {
  const std::size_t segments = 1 + (s.start > 0) + (s.end < n);
  return 1 + 1 + 2 * segments;
}

}  // namespace

TEST(SubstitutionPlan, MidSentence) {
  const auto p = substitution_plan(kFilm, {2, 4});
  EXPECT_EQ(p.kind, PerturbationKind::Substitution);
  EXPECT_EQ(p.tokens, (Words{"they", "watched", "<mask>", "this", "afternoon"}));
  EXPECT_EQ(p.pairs, (std::vector<SegmentPair>{{{0, 2}, {0, 2}}, {{4, 6}, {3, 5}}}));
  EXPECT_EQ(p.term_count(), 1u);
}

TEST(SubstitutionPlan, AtStartHasOnlySuffix) {
  const auto p = substitution_plan(kFilm, {0, 2});
  EXPECT_EQ(p.tokens, (Words{"<mask>", "a", "film", "this", "afternoon"}));
  EXPECT_EQ(p.pairs, (std::vector<SegmentPair>{{{2, 6}, {1, 5}}}));
}

TEST(SubstitutionPlan, RejectsWholeSentence) {
  EXPECT_THROW(substitution_plan(kFilm, {0, 6}), std::invalid_argument);
  EXPECT_THROW(substitution_plan(kFilm, {3, 9}), std::invalid_argument);
}

TEST(DecontextualizationPlan, Cases) {
  const auto mid = decontextualization_plan(kFilm, {2, 4});
  EXPECT_EQ(mid.tokens, (Words{"<mask>", "a", "film", "<mask>"}));
  EXPECT_EQ(mid.pairs, (std::vector<SegmentPair>{{{2, 4}, {1, 3}}}));
  const auto start = decontextualization_plan(kFilm, {0, 2});
  EXPECT_EQ(start.tokens, (Words{"they", "watched", "<mask>"}));
  EXPECT_EQ(start.pairs, (std::vector<SegmentPair>{{{0, 2}, {0, 2}}}));
  const auto end = decontextualization_plan(kFilm, {4, 6});
  EXPECT_EQ(end.tokens, (Words{"<mask>", "this", "afternoon"}));
  EXPECT_EQ(end.term_count(), 1u);
}

TEST(MovementPlans, FrontAndEnd) {
  const auto m = movement_plans(kFilm, {2, 4});
  EXPECT_EQ(m.front.tokens, (Words{"a", "film", ",", "they", "watched", ",", "this", "afternoon"}));
  EXPECT_EQ(m.end.tokens, (Words{"they", "watched", ",", "this", "afternoon", ",", "a", "film"}));
  EXPECT_EQ(m.front.pairs.size(), 3u);
  EXPECT_EQ(m.end.pairs.size(), 3u);
  EXPECT_EQ(m.front.term_count() + m.end.term_count(), 6u);
}

TEST(MovementPlans, BoundaryDropsEmptySegment) {
  const auto m = movement_plans(kFilm, {0, 2});
  EXPECT_EQ(m.front.tokens, (Words{"they", "watched", ",", "a", "film", "this", "afternoon"}));
  EXPECT_EQ(m.end.tokens, (Words{"a", "film", "this", "afternoon", ",", "they", "watched"}));
  EXPECT_EQ(m.front.pairs.size() + m.end.pairs.size(), 4u);
}

TEST(MovementPlans, CustomSeparator) {
  const auto m = movement_plans(kFilm, {2, 4}, "|");
  EXPECT_EQ(std::count(m.front.tokens.begin(), m.front.tokens.end(), "|"), 2);
}

TEST(PlansForSentence, Counts) {
  const Words three{"a", "b", "c"};
  const auto all = plans_for_sentence(three, KindSet::all());
  ASSERT_EQ(all.size(), 2u);
  EXPECT_TRUE(all.contains(Span{0, 2}));
  EXPECT_TRUE(all.contains(Span{1, 3}));
  for (const auto& [span, plans] : all) EXPECT_EQ(plans.size(), 4u);

  const auto sub = plans_for_sentence(three, KindSet::of({PerturbationKind::Substitution}));
  for (const auto& [span, plans] : sub) EXPECT_EQ(plans.size(), 1u);

  std::size_t sequences = 0;
  for (const auto& [span, plans] : plans_for_sentence(kFilm, KindSet::all())) sequences += plans.size();
  std::size_t spans = 0;
  for (std::size_t len = 2; len < 6; ++len) spans += 6 - len + 1;
  EXPECT_EQ(sequences, spans * 4);
}

TEST(KindSet, ParseAndFormat) {
  EXPECT_EQ(KindSet::parse("sub,dc,move"), KindSet::all());
  EXPECT_EQ(KindSet::parse("move").to_string(), "move");
  EXPECT_EQ(KindSet::parse("dc+sub").to_string(), "sub,dc");
  EXPECT_THROW(KindSet::parse("swap"), std::invalid_argument);
  EXPECT_THROW(KindSet::parse(""), std::invalid_argument);
}

TEST(PerturbationProperty, PlansAreConsistent) {
  Rng rng(21);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = cdp::testing::uniform(rng, 2, 12);
    const auto words = cdp::testing::random_words(rng, n);
    const auto plans = plans_for_sentence(words, KindSet::all());
    for (const auto& [span, list] : plans) {
      ASSERT_GE(span.length(), 2u);
      ASSERT_LT(span.length(), n);
      std::size_t terms = 0;
      for (const auto& plan : list) {
        terms += plan.term_count();
        std::vector<bool> used_orig(n, false), used_pert(plan.tokens.size(), false);
        for (const auto& pair : plan.pairs) {
          ASSERT_EQ(pair.original.length(), pair.perturbed.length());
          ASSERT_LE(pair.perturbed.end, plan.tokens.size());
          for (std::size_t k = 0; k < pair.original.length(); ++k) {
            const auto o = pair.original.start + k, p = pair.perturbed.start + k;
            ASSERT_EQ(words[o], plan.tokens[p]);
            ASSERT_FALSE(used_orig[o]);
            ASSERT_FALSE(used_pert[p]);
            used_orig[o] = used_pert[p] = true;
          }
        }
        if (plan.kind == PerturbationKind::FrontMovement || plan.kind == PerturbationKind::EndMovement) {
          // Every original word appears exactly once; the rest are separators.
          ASSERT_TRUE(std::all_of(used_orig.begin(), used_orig.end(), [](bool b) { return b; }));
          for (std::size_t p = 0; p < plan.tokens.size(); ++p)
            if (!used_pert[p]) ASSERT_EQ(plan.tokens[p], ",");
          ASSERT_EQ(plan.tokens.size(), n + plan.pairs.size() - 1);
        }
      }
      ASSERT_EQ(terms, expected_terms(n, span)) << to_string(span) << " n=" << n;
      const bool boundary = span.start == 0 || span.end == n;
      ASSERT_EQ(terms, boundary ? 6u : 8u);
    }
    ASSERT_EQ(plans, plans_for_sentence(words, KindSet::all()));
  }
}
