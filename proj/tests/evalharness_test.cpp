#include "gnat/evalharness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace gnat {
namespace {

// Direct enumeration over every positive/negative pair.
double BruteForceAuc(const std::vector<LabeledScore>& scores) {
  double wins = 0.0;
  double comparisons = 0.0;
  for (const auto& p : scores) {
    if (!p.label) continue;
    for (const auto& n : scores) {
      if (n.label) continue;
      comparisons += 1.0;
      wins += p.value > n.value ? 1.0 : (p.value == n.value ? 0.5 : 0.0);
    }
  }
  return wins / comparisons;
}

TEST(RocAuc, HandCases) {
  EXPECT_EQ(RocAuc(std::vector<LabeledScore>{{1, true}, {1, true}, {0, false}, {0, false}}), 1.0);
  EXPECT_EQ(RocAuc(std::vector<LabeledScore>{{0, true}, {1, false}}), 0.0);
  EXPECT_EQ(RocAuc(std::vector<LabeledScore>{{0.4, true}, {0.4, false}, {0.4, true}}), 0.5);
  // Positives {3, 1}, negative {2}: one win, one loss.
  const std::vector<LabeledScore> mixed = {{3, true}, {1, true}, {2, false}};
  EXPECT_EQ(BruteForceAuc(mixed), 0.5);
  EXPECT_EQ(RocAuc(mixed), 0.5);
  // Positives {3, 2}, negatives {2, 1}: wins 1 + 1 + 0.5 + 1 over 4.
  EXPECT_EQ(RocAuc(std::vector<LabeledScore>{{3, true}, {2, true}, {2, false}, {1, false}}),
            0.875);
}

TEST(RocAuc, AgreesWithEnumerationAndIgnoresMonotoneTransforms) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabeledScore> scores(2 + rng() % 30);
    for (auto& s : scores) s = {static_cast<double>(rng() % 7) * 0.5, (rng() & 1) != 0};
    scores[0].label = true;
    scores[1].label = false;
    const double auc = RocAuc(scores);
    EXPECT_NEAR(auc, BruteForceAuc(scores), 1e-12);
    for (auto& s : scores) s.value = std::exp(3.0 * s.value) - 4.0;
    EXPECT_NEAR(RocAuc(scores), auc, 1e-12);
  }
}

TEST(RocAuc, NeedsBothClasses) {
  EXPECT_THROW(RocAuc(std::vector<LabeledScore>{{1, true}, {2, true}}), Error);
  EXPECT_THROW(RocAuc(std::vector<LabeledScore>{}), Error);
}

TEST(RankingMetrics, HandCase) {
  // True candidate ranks 1, 2 and 4.
  const std::vector<RankingTrial> trials = {
      {{0.9, 0.2, 0.1}, 0},
      {{0.5, 0.7, 0.1, 0.3}, 0},
      {{0.1, 0.4, 0.3, 0.2, 0.0}, 0},
  };
  EXPECT_EQ(TrueCandidateRank(trials[0]), 1u);
  EXPECT_EQ(TrueCandidateRank(trials[1]), 2u);
  EXPECT_EQ(TrueCandidateRank(trials[2]), 4u);
  const auto m = ComputeRankingMetrics(trials);
  EXPECT_NEAR(m.mrr, (1.0 + 0.5 + 0.25) / 3.0, 1e-12);
  EXPECT_NEAR(m.mrr, 0.5833, 1e-4);
  EXPECT_NEAR(m.mean_rank, 7.0 / 3.0, 1e-12);
  EXPECT_EQ(m.worst_rank, 4u);
  EXPECT_NEAR(m.fidelity, 1.0 / 3.0, 1e-12);
}

TEST(RankingMetrics, PerfectRankingAndPessimisticTies) {
  const std::vector<RankingTrial> perfect = {{{3, 1, 2}, 0}, {{0, 5}, 1}};
  const auto m = ComputeRankingMetrics(perfect);
  EXPECT_EQ(m.mrr, 1.0);
  EXPECT_EQ(m.fidelity, 1.0);
  EXPECT_EQ(m.worst_rank, 1u);
  EXPECT_EQ(TrueCandidateRank({{0.7, 0.7, 0.1}, 1}), 2u);
  EXPECT_EQ(TrueCandidateRank({{0.7, 0.7, 0.7}, 0}), 3u);
  EXPECT_THROW(TrueCandidateRank({{0.1}, 1}), Error);
  EXPECT_THROW(ComputeRankingMetrics(std::vector<RankingTrial>{}), Error);
}

TEST(RankingMetrics, CandidateOrderDoesNotMatter) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    RankingTrial trial;
    trial.candidate_scores.resize(2 + rng() % 10);
    for (double& s : trial.candidate_scores) s = static_cast<double>(rng() % 5);
    trial.true_index = rng() % trial.candidate_scores.size();
    const double truth = trial.candidate_scores[trial.true_index];
    const std::size_t rank = TrueCandidateRank(trial);
    std::shuffle(trial.candidate_scores.begin(), trial.candidate_scores.end(), rng);
    trial.true_index = static_cast<std::size_t>(
        std::find(trial.candidate_scores.begin(), trial.candidate_scores.end(), truth) -
        trial.candidate_scores.begin());
    EXPECT_EQ(TrueCandidateRank(trial), rank);
    const auto m = ComputeRankingMetrics(std::vector<RankingTrial>{trial});
    EXPECT_LE(m.fidelity, m.mrr);
    EXPECT_LE(m.mrr, 1.0);
  }
}

SpanPair Pair(const char* src, std::size_t s0, std::size_t s1, const char* tgt, std::size_t t0,
              std::size_t t1) {
  return {{src, s0, s1}, {tgt, t0, t1}};
}

TEST(SpanPRF, HandCases) {
  const std::vector<SpanPair> gold = {Pair("s", 0, 100, "t", 50, 150)};
  const PRF same = SpanPRF(gold, gold);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);

  const PRF disjoint = SpanPRF(std::vector<SpanPair>{Pair("s", 200, 300, "t", 0, 10)}, gold);
  EXPECT_EQ(disjoint.precision, 0.0);
  EXPECT_EQ(disjoint.recall, 0.0);
  EXPECT_EQ(disjoint.f1, 0.0);

  // Half of the gold characters on each side, nothing else.
  const PRF half = SpanPRF(std::vector<SpanPair>{Pair("s", 0, 50, "t", 100, 150)}, gold);
  EXPECT_EQ(half.precision, 1.0);
  EXPECT_EQ(half.recall, 0.5);
  EXPECT_EQ(half.f1, 2.0 / 3.0);
}

TEST(SpanPRF, CountsOverlappingPredictionsOnce) {
  const std::vector<SpanPair> gold = {Pair("s", 0, 10, "t", 0, 10)};
  // Predicted chars: s [0, 15) (15 chars), t [5, 10) (5 chars). Overlap 10 + 5.
  const std::vector<SpanPair> predicted = {Pair("s", 0, 8, "t", 5, 10),
                                           Pair("s", 5, 15, "t", 5, 9)};
  const PRF prf = SpanPRF(predicted, gold);
  EXPECT_EQ(prf.precision, 15.0 / 20.0);
  EXPECT_EQ(prf.recall, 15.0 / 20.0);
  // Characters in a different document never overlap.
  const PRF other = SpanPRF(std::vector<SpanPair>{Pair("x", 0, 10, "y", 0, 10)}, gold);
  EXPECT_EQ(other.f1, 0.0);
  EXPECT_THROW(SpanPRF(std::vector<SpanPair>{Pair("s", 5, 5, "t", 0, 1)}, gold), Error);
}

TEST(SpanPRF, SpuriousPredictionsNeverRaisePrecision) {
  const std::vector<SpanPair> gold = {Pair("s", 0, 40, "t", 10, 50), Pair("s", 80, 90, "t", 0, 5)};
  std::vector<SpanPair> predicted = {Pair("s", 0, 30, "t", 10, 40)};
  double previous = SpanPRF(predicted, gold).precision;
  for (std::size_t k = 0; k < 5; ++k) {
    predicted.push_back(Pair("s", 100 + 10 * k, 105 + 10 * k, "t", 200 + k, 210 + k));
    const double precision = SpanPRF(predicted, gold).precision;
    EXPECT_LE(precision, previous);
    previous = precision;
  }
}

TEST(SentencePairPRF, HandCases) {
  const SentencePairSet gold = {{0, 0}, {2, 1}, {3, -1}};
  const PRF same = SentencePairPRF(gold, gold);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);

  const PRF empty = SentencePairPRF({}, gold);
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f1, 0.0);

  const PRF half = SentencePairPRF({{0, 0}, {1, 1}}, {{0, 0}, {2, 1}});
  EXPECT_EQ(half.precision, 0.5);
  EXPECT_EQ(half.recall, 0.5);
  EXPECT_EQ(half.f1, 0.5);

  const PairCounts counts = CountSentencePairs({{0, 0}, {3, -1}}, gold);
  EXPECT_EQ(counts.hits, 1u);
  EXPECT_EQ(counts.predicted, 1u);
  EXPECT_EQ(counts.gold, 2u);
}

AlignmentResult WithStarts(const std::vector<std::pair<std::size_t, std::size_t>>& starts) {
  AlignmentResult result;
  result.m = result.n = 20;
  double score = static_cast<double>(starts.size()) + 1.0;
  for (const auto& [x, y] : starts) {
    AlignmentSpan span;
    span.x_start = span.x_end = x;
    span.y_start = span.y_end = y;
    span.score = score--;
    span.path = {{x, y, Move::kDiag}};
    result.spans.push_back(span);
  }
  return result;
}

TEST(AlignmentOrderCorrelation, HandCases) {
  EXPECT_NEAR(AlignmentOrderCorrelation(WithStarts({{0, 0}, {5, 5}, {9, 9}})), 1.0, 1e-15);
  EXPECT_NEAR(AlignmentOrderCorrelation(WithStarts({{0, 9}, {5, 4}, {9, 0}})), -1.0, 1e-15);
  // x = (0, 3, 6), y = (2, 1, 9): Sxy = 21, Sxx = 18, Syy = 38.
  EXPECT_NEAR(AlignmentOrderCorrelation(WithStarts({{0, 2}, {3, 1}, {6, 9}})),
              21.0 / std::sqrt(18.0 * 38.0), 1e-12);
  // Ranks x = (1, 2, 3), y = (2, 1, 3).
  EXPECT_NEAR(AlignmentOrderCorrelation(WithStarts({{0, 2}, {3, 1}, {6, 9}}), 20,
                                        CorrelationMethod::kSpearman),
              0.5, 1e-12);
}

TEST(AlignmentOrderCorrelation, UsesOnlyTheTopSpans) {
  // The two best spans lie on the diagonal; the third reverses the trend.
  const auto result = WithStarts({{1, 1}, {8, 8}, {9, 0}});
  EXPECT_NEAR(AlignmentOrderCorrelation(result, 2), 1.0, 1e-15);
  EXPECT_LT(AlignmentOrderCorrelation(result, 3), 0.5);
}

TEST(AlignmentOrderCorrelation, DegenerateInputs) {
  try {
    AlignmentOrderCorrelation(WithStarts({{1, 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateCorrelation);
  }
  try {
    AlignmentOrderCorrelation(WithStarts({{1, 1}, {1, 5}, {1, 7}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateCorrelation);
  }
}

// Related pairs keep their blocks in order; shuffled pairs permute the Y
// blocks. Unequal padding between blocks makes chaining them cost a gap, so
// each block stays its own span. The mean order correlation separates the
// two ensembles.
TEST(AlignmentOrderCorrelation, SeparatesBlockDiagonalFromShuffledBlocks) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> noise(-1.0, -0.6);
  std::uniform_real_distribution<double> signal(0.6, 0.9);
  auto correlation_for = [&](bool shuffled) {
    const std::size_t blocks = 6, size = 3, x_pad = 3, y_pad = 5;
    const std::size_t m = blocks * (size + x_pad), n = blocks * (size + y_pad);
    std::vector<std::size_t> order(blocks);
    for (std::size_t k = 0; k < blocks; ++k) order[k] = k;
    if (shuffled) std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> sim(m * n);
    for (double& v : sim) v = noise(rng);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t k = 0; k < size; ++k) {
        sim[(b * (size + x_pad) + k) * n + order[b] * (size + y_pad) + k] = signal(rng);
      }
    }
    const DPState dp = SmithWaterman(m, n, sim, GapParams::Affine(-2.0, -1.0));
    AlignmentResult result;
    result.spans = ExtractAlignments(dp, 20);
    result.m = m;
    result.n = n;
    return AlignmentOrderCorrelation(result);
  };
  double related = 0.0, shuffled = 0.0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    related += correlation_for(false);
    shuffled += correlation_for(true);
  }
  EXPECT_GT(related / trials, 0.99);
  EXPECT_GT(related / trials, shuffled / trials + 0.3);
}

TEST(AlignedSentencePairs, CollectsMatchMovesOnly) {
  AlignmentResult result;
  AlignmentSpan span;
  span.path = {{0, 0, Move::kDiag}, {1, 0, Move::kUp}, {2, 1, Move::kDiag}, {2, 2, Move::kLeftMatch}};
  result.spans.push_back(span);
  EXPECT_EQ(AlignedSentencePairs(result), (SentencePairSet{{0, 0}, {2, 1}, {2, 2}}));
}

}  // namespace
}  // namespace gnat
