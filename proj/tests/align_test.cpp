#include "gnat/align.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "gnat/corpus.hpp"
#include "gnat/simscore.hpp"
#include "oracles/alignment_oracle.hpp"

namespace gnat {
namespace {

using testing::ExhaustiveBestScore;
using testing::OracleGaps;

std::vector<double> RandomGrid(std::mt19937_64& rng, std::size_t m, std::size_t n,
                               bool quantized) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::uniform_int_distribution<int> steps(-4, 4);
  std::vector<double> grid(m * n);
  for (double& v : grid) v = quantized ? steps(rng) * 0.25 : uniform(rng);
  return grid;
}

TEST(SmithWaterman, AllNegativeSimilarityGivesZeroMatrix) {
  const std::vector<double> sim = {-0.5, -1.0, -0.2, -0.9, -0.1, -0.7};
  const DPState dp = SmithWaterman(2, 3, sim, GapParams::Linear(-1.0));
  for (std::size_t i = 0; i <= 2; ++i) {
    for (std::size_t j = 0; j <= 3; ++j) EXPECT_EQ(dp.H(i, j), 0.0);
  }
  EXPECT_EQ(dp.MaxScore(), 0.0);
  EXPECT_TRUE(ExtractAlignments(dp, 5).empty());
}

TEST(SmithWaterman, TwoByTwoLinear) {
  const std::vector<double> sim = {1.0, -1.0, -1.0, 1.0};
  ASSERT_EQ(ExhaustiveBestScore(2, 2, sim, {-1.0, -1.0, false}), 2.0);
  const DPState dp = SmithWaterman(2, 2, sim, GapParams::Linear(-1.0));
  EXPECT_EQ(dp.MaxScore(), 2.0);
  EXPECT_EQ(dp.H(2, 2), 2.0);
  EXPECT_EQ(dp.move(2, 2), Move::kDiag);
  EXPECT_EQ(dp.move(1, 1), Move::kDiag);

  const auto spans = ExtractAlignments(dp, 5);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].x_start, 0u);
  EXPECT_EQ(spans[0].x_end, 1u);
  EXPECT_EQ(spans[0].y_start, 0u);
  EXPECT_EQ(spans[0].y_end, 1u);
  EXPECT_EQ(spans[0].score, 2.0);
  const std::vector<PathStep> expected_path = {{0, 0, Move::kDiag}, {1, 1, Move::kDiag}};
  EXPECT_EQ(spans[0].path, expected_path);
}

// Corner matches separated by a strongly negative middle. Under the
// three-state recurrence an up step followed by a left step opens two gaps,
// so bridging the corners costs 0.9 - 0.5 - 0.5 + 0.9 = 0.8 (or 0.8 via the
// middle diagonal) and the best local alignment is a single corner match.
TEST(SmithWaterman, AffineCornerFixtureMatchesOracle) {
  const std::vector<double> sim = {0.9, -1, -1, -1, -1, -1, -1, -1, 0.9};
  const double oracle = ExhaustiveBestScore(3, 3, sim, {-0.5, -0.1, false});
  EXPECT_NEAR(oracle, 0.9, 1e-12);
  const DPState dp = SmithWaterman(3, 3, sim, GapParams::Affine(-0.5, -0.1));
  EXPECT_NEAR(dp.MaxScore(), oracle, 1e-12);
}

TEST(SmithWaterman, AffineGapRunIsChargedOpenThenExtend) {
  // Matches at (0,0) and (3,1): X segments 1 and 2 are skipped by a two-step
  // gap costing open + extend.
  const std::vector<double> sim = {0.9, -1, -1, -1, -1, -1, -1, 0.9};
  const double oracle = ExhaustiveBestScore(4, 2, sim, {-0.5, -0.1, false});
  EXPECT_NEAR(oracle, 0.9 - 0.5 - 0.1 + 0.9, 1e-12);
  const DPState dp = SmithWaterman(4, 2, sim, GapParams::Affine(-0.5, -0.1));
  EXPECT_NEAR(dp.MaxScore(), 1.2, 1e-12);
  const auto spans = ExtractAlignments(dp, 3);
  ASSERT_FALSE(spans.empty());
  EXPECT_EQ(spans[0].x_start, 0u);
  EXPECT_EQ(spans[0].x_end, 3u);
  EXPECT_EQ(spans[0].y_start, 0u);
  EXPECT_EQ(spans[0].y_end, 1u);
  const std::vector<PathStep> expected_path = {
      {0, 0, Move::kDiag}, {1, 0, Move::kUp}, {2, 0, Move::kUp}, {3, 1, Move::kDiag}};
  EXPECT_EQ(spans[0].path, expected_path);
  EXPECT_EQ(spans[0].score, dp.MaxScore());
}

TEST(SmithWaterman, LinearMatchesExhaustiveOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t m = 1 + rng() % 5;
    const std::size_t n = 1 + rng() % 5;
    const auto sim = RandomGrid(rng, m, n, trial % 2 == 0);
    const double g = -0.25 * static_cast<double>(1 + rng() % 4);
    const double oracle = ExhaustiveBestScore(m, n, sim, {g, g, false});
    EXPECT_NEAR(SmithWaterman(m, n, sim, GapParams::Linear(g)).MaxScore(), oracle, 1e-12)
        << "trial " << trial;
  }
}

TEST(SmithWaterman, AffineMatchesExhaustiveOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 4;
    const auto sim = RandomGrid(rng, m, n, trial % 2 == 0);
    const double open = -0.2 - 0.2 * static_cast<double>(rng() % 5);
    const double extend = open * 0.25 * static_cast<double>(rng() % 5);
    const double oracle = ExhaustiveBestScore(m, n, sim, {open, extend, false});
    EXPECT_NEAR(SmithWaterman(m, n, sim, GapParams::Affine(open, extend)).MaxScore(), oracle,
                1e-12)
        << "trial " << trial;
  }
}

TEST(SmithWaterman, ManyToManyMatchesExhaustiveOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t m = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 4;
    const auto sim = RandomGrid(rng, m, n, trial % 2 == 0);
    GapParams gap = GapParams::Affine(-0.6, -0.2);
    gap.many_to_many = true;
    const double oracle = ExhaustiveBestScore(m, n, sim, {-0.6, -0.2, true});
    EXPECT_NEAR(SmithWaterman(m, n, sim, gap).MaxScore(), oracle, 1e-12) << "trial " << trial;
  }
}

TEST(SmithWaterman, ManyToManyLetsOneSegmentMatchTwo) {
  // X0 matches both Y0 and Y1.
  const std::vector<double> sim = {0.8, 0.7, -1.0, -1.0};
  GapParams gap = GapParams::Affine(-1.0, -0.25);
  EXPECT_NEAR(SmithWaterman(2, 2, sim, gap).MaxScore(), 0.8, 1e-12);
  gap.many_to_many = true;
  const DPState dp = SmithWaterman(2, 2, sim, gap);
  EXPECT_NEAR(dp.MaxScore(), 1.5, 1e-12);
  const auto spans = ExtractAlignments(dp, 3);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].x_start, 0u);
  EXPECT_EQ(spans[0].x_end, 0u);
  EXPECT_EQ(spans[0].y_start, 0u);
  EXPECT_EQ(spans[0].y_end, 1u);
}

TEST(SmithWaterman, AffineWithEqualPenaltiesEqualsLinearEverywhere) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng() % 8;
    const std::size_t n = 1 + rng() % 8;
    const auto sim = RandomGrid(rng, m, n, false);
    const double g = -0.1 - 0.3 * static_cast<double>(rng() % 4);
    const DPState lin = SmithWaterman(m, n, sim, GapParams::Linear(g));
    const DPState aff = SmithWaterman(m, n, sim, GapParams::Affine(g, g));
    for (std::size_t i = 0; i <= m; ++i) {
      for (std::size_t j = 0; j <= n; ++j) ASSERT_EQ(lin.H(i, j), aff.H(i, j));
    }
  }
}

TEST(SmithWaterman, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng() % 12;
    const std::size_t n = 1 + rng() % 12;
    const auto sim = RandomGrid(rng, m, n, trial % 3 == 0);
    const DPState dp = SmithWaterman(m, n, sim, GapParams::Affine(-0.7, -0.2));
    for (std::size_t i = 0; i <= m; ++i) {
      EXPECT_EQ(dp.H(i, 0), 0.0);
      for (std::size_t j = 0; j <= n; ++j) {
        EXPECT_GE(dp.H(i, j), 0.0);
        if (i == 0) {
          EXPECT_EQ(dp.H(0, j), 0.0);
        }
      }
    }
  }
}

TEST(SmithWaterman, RaisingACellNeverLowersMaxScore) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng() % 7;
    const std::size_t n = 1 + rng() % 7;
    auto sim = RandomGrid(rng, m, n, false);
    const GapParams gap = GapParams::Affine(-0.8, -0.3);
    const double before = SmithWaterman(m, n, sim, gap).MaxScore();
    sim[rng() % sim.size()] += 0.5;
    EXPECT_GE(SmithWaterman(m, n, sim, gap).MaxScore(), before);
  }
}

TEST(SmithWaterman, ScalingScoresAndPenaltiesScalesResult) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 2 + rng() % 8;
    const std::size_t n = 2 + rng() % 8;
    const auto sim = RandomGrid(rng, m, n, trial % 2 == 0);
    const double factor = trial % 2 == 0 ? 4.0 : 0.5;
    std::vector<double> scaled(sim);
    for (double& v : scaled) v *= factor;
    const DPState base = SmithWaterman(m, n, sim, GapParams::Affine(-0.75, -0.25));
    const DPState big =
        SmithWaterman(m, n, scaled, GapParams::Affine(-0.75 * factor, -0.25 * factor));
    EXPECT_EQ(big.MaxScore(), base.MaxScore() * factor);
    const auto a = ExtractAlignments(base, 10);
    const auto b = ExtractAlignments(big, 10);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].path, b[k].path);
      EXPECT_EQ(b[k].score, a[k].score * factor);
    }
  }
}

TEST(SmithWaterman, NonFiniteSimilarityIsRejectedWithCell) {
  const std::vector<double> sim = {0.1, NAN, 0.2, 0.3};
  try {
    SmithWaterman(2, 2, sim, GapParams{});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteScore);
    EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos);
  }
}

TEST(GapParams, ValidationRejectsBadPenalties) {
  EXPECT_THROW(GapParams::Linear(0.5).Validate(), Error);
  EXPECT_THROW(GapParams::Affine(-0.2, -0.5).Validate(), Error);
  EXPECT_NO_THROW(GapParams::Affine(-0.5, -0.5).Validate());
  EXPECT_NO_THROW(GapParams::Linear(0.0).Validate());
}

// Background -1 with planted blocks of positive diagonal cells.
struct PlantedBlock {
  std::size_t row, col, size;
  double value;
};

std::vector<double> PlantBlocks(std::size_t m, std::size_t n,
                                const std::vector<PlantedBlock>& blocks) {
  std::vector<double> sim(m * n, -1.0);
  for (const auto& b : blocks) {
    for (std::size_t k = 0; k < b.size; ++k) sim[(b.row + k) * n + (b.col + k)] = b.value;
  }
  return sim;
}

TEST(ExtractAlignments, RecoversPlantedBlocksInScoreOrder) {
  const std::vector<PlantedBlock> blocks = {{0, 6, 3, 0.9}, {5, 0, 4, 0.8}, {10, 10, 2, 0.7}};
  const auto sim = PlantBlocks(12, 12, blocks);
  const DPState dp = SmithWaterman(12, 12, sim, GapParams::Affine(-1.0, -0.25));
  const auto spans = ExtractAlignments(dp, 10);
  ASSERT_EQ(spans.size(), 3u);
  // Expected by hand: block sums 3.2 (4 x 0.8), 2.7 (3 x 0.9), 1.4 (2 x 0.7).
  EXPECT_NEAR(spans[0].score, 3.2, 1e-12);
  EXPECT_NEAR(spans[1].score, 2.7, 1e-12);
  EXPECT_NEAR(spans[2].score, 1.4, 1e-12);
  EXPECT_EQ(spans[0].score, dp.MaxScore());
  const std::vector<PlantedBlock> order = {blocks[1], blocks[0], blocks[2]};
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(spans[k].x_start, order[k].row);
    EXPECT_EQ(spans[k].x_end, order[k].row + order[k].size - 1);
    EXPECT_EQ(spans[k].y_start, order[k].col);
    EXPECT_EQ(spans[k].y_end, order[k].col + order[k].size - 1);
  }
}

TEST(ExtractAlignments, HonoursMaxCountAndMinScore) {
  const auto sim = PlantBlocks(12, 12, {{0, 6, 3, 0.9}, {5, 0, 4, 0.8}, {10, 10, 2, 0.7}});
  const DPState dp = SmithWaterman(12, 12, sim, GapParams::Affine(-1.0, -0.25));
  EXPECT_EQ(ExtractAlignments(dp, 1).size(), 1u);
  EXPECT_EQ(ExtractAlignments(dp, 0).size(), 0u);
  const auto strong = ExtractAlignments(dp, 10, 2.0);
  ASSERT_EQ(strong.size(), 2u);
  for (const auto& span : strong) EXPECT_GT(span.score, 2.0);
}

TEST(ExtractAlignments, SpansAreDisjointAndRescorable) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 3 + rng() % 20;
    const std::size_t n = 3 + rng() % 20;
    auto sim = RandomGrid(rng, m, n, trial % 2 == 0);
    for (double& v : sim) v -= 0.3;
    GapParams gap = GapParams::Affine(-0.6, -0.15);
    gap.many_to_many = trial % 3 == 0;
    const DPState dp = SmithWaterman(m, n, sim, gap);
    const auto spans = ExtractAlignments(dp, 50);
    std::set<std::size_t> rows, cols;
    for (std::size_t k = 0; k < spans.size(); ++k) {
      const auto& span = spans[k];
      EXPECT_GT(span.score, 0.0);
      EXPECT_LE(span.x_start, span.x_end);
      EXPECT_LE(span.y_start, span.y_end);
      if (k > 0) {
        EXPECT_GE(spans[k - 1].score, span.score);
      }
      EXPECT_EQ(PathScore(dp, span.path), span.score);
      ASSERT_FALSE(span.path.empty());
      EXPECT_TRUE(IsMatchMove(span.path.front().move));
      EXPECT_TRUE(IsMatchMove(span.path.back().move));
      EXPECT_EQ(span.path.front().i, span.x_start);
      EXPECT_EQ(span.path.front().j, span.y_start);
      EXPECT_EQ(span.path.back().i, span.x_end);
      EXPECT_EQ(span.path.back().j, span.y_end);
      for (std::size_t x = span.x_start; x <= span.x_end; ++x) {
        EXPECT_TRUE(rows.insert(x).second) << "row " << x << " reused";
      }
      for (std::size_t y = span.y_start; y <= span.y_end; ++y) {
        EXPECT_TRUE(cols.insert(y).second) << "column " << y << " reused";
      }
    }
    if (dp.MaxScore() > 0.0) {
      ASSERT_FALSE(spans.empty());
      EXPECT_EQ(spans[0].score, dp.MaxScore());
    } else {
      EXPECT_TRUE(spans.empty());
    }
  }
}

SegmentedDocument Sentences(const std::string& id, const std::string& text) {
  return SegmentDocument(MakeDocument(id, text), SegmentationPolicy::Sentence());
}

TEST(AlignPair, SelfAlignmentCoversTheDiagonal) {
  const auto doc = Sentences(
      "self",
      "The fox jumped over the fence. A crow sat upon a branch. The lion slept in the sun. "
      "Bees hummed among clover flowers. An old man gathered sticks.");
  const ScorerConfig scorer{ScorerKind::kJaccard};
  const auto refs = SegmentRefs(doc);
  const CalibrationStats stats = EstimateCalibration(scorer, refs, 500, 3);
  const auto result = AlignPair(doc, doc, scorer, stats, 3.0, GapParams{}, 20);
  ASSERT_FALSE(result.spans.empty());
  EXPECT_EQ(result.spans[0].x_start, 0u);
  EXPECT_EQ(result.spans[0].y_start, 0u);
  EXPECT_EQ(result.spans[0].x_end, doc.size() - 1);
  EXPECT_EQ(result.spans[0].y_end, doc.size() - 1);
  const SimilarityMatrix sim = BuildSimilarityMatrix(doc, doc, scorer, stats, 3.0);
  double diagonal = 0.0;
  for (std::size_t k = 0; k < doc.size(); ++k) diagonal += sim.calibrated(k, k);
  EXPECT_NEAR(result.max_score, diagonal, 1e-12);
  EXPECT_EQ(result.spans[0].score, result.max_score);
}

TEST(AlignPair, DisjointVocabularyGivesNoSpans) {
  const auto a = Sentences("a", "Wolves howl at night.");
  const auto b = Sentences("b", "Bread rises slowly.");
  const CalibrationStats stats{0.1, 0.1, 100, ScorerKind::kJaccard};
  const auto result = AlignPair(a, b, {ScorerKind::kJaccard}, stats, 3.0, GapParams{}, 20);
  EXPECT_TRUE(result.spans.empty());
  EXPECT_EQ(result.max_score, 0.0);
  EXPECT_EQ(result.m, 1u);
  EXPECT_EQ(result.n, 1u);
}

TEST(AlignPair, ReversedDocumentAlignsAsShortSpans) {
  const std::vector<std::string> sentences = {
      "The fox jumped over the fence.", "A crow sat upon a branch.",
      "The lion slept in the sun.", "Bees hummed among clover flowers."};
  std::string forward, backward;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    forward += sentences[k] + " ";
    backward += sentences[sentences.size() - 1 - k] + " ";
  }
  const auto a = Sentences("fwd", forward);
  const auto b = Sentences("bwd", backward);
  const CalibrationStats stats{0.1, 0.1, 100, ScorerKind::kJaccard};
  const auto result = AlignPair(a, b, {ScorerKind::kJaccard}, stats, 3.0, GapParams{}, 20);
  // Only identical sentences score positively, and the anti-diagonal allows
  // no two of them in one monotone path: one unit span per sentence.
  ASSERT_EQ(result.spans.size(), 4u);
  std::set<std::pair<std::size_t, std::size_t>> starts;
  for (const auto& span : result.spans) {
    EXPECT_GT(span.score, 0.0);
    EXPECT_EQ(span.x_start, span.x_end);
    EXPECT_EQ(span.y_start, span.y_end);
    EXPECT_EQ(span.x_start + span.y_start, 3u);
    starts.emplace(span.x_start, span.y_start);
  }
  EXPECT_EQ(starts.size(), 4u);
}

}  // namespace
}  // namespace gnat
