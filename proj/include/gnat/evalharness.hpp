#pragma once

// Evaluation metrics: relatedness ROC AUC, summary-to-book ranking,
// character-level span P/R/F1, sentence-pair P/R/F1 and the correlation of
// alignment positions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnat/align.hpp"
#include "gnat/error.hpp"

namespace gnat {

struct LabeledScore {
  double value = 0.0;
  bool label = false;  // true = related
};

// Mann-Whitney AUC: the probability that a random positive outscores a random
// negative, ties counting one half. Computed from mid-ranks.
inline double RocAuc(std::span<const LabeledScore> scores) {
  std::size_t positives = 0;
  for (const auto& s : scores) {
    if (!std::isfinite(s.value)) throw Error(ErrorCode::kInvalidArgument, "non-finite score");
    positives += s.label ? 1 : 0;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kInvalidArgument, "ROC AUC needs both positive and negative labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a].value < scores[b].value; });
  double positive_rank_sum = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]].value == scores[order[start]].value) ++end;
    const double mid_rank = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t k = start; k < end; ++k) {
      if (scores[order[k]].label) positive_rank_sum += mid_rank;
    }
    start = end;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

struct RankingTrial {
  std::vector<double> candidate_scores;
  std::size_t true_index = 0;
};

struct RankingMetrics {
  double mrr = 0.0;
  double mean_rank = 0.0;
  std::size_t worst_rank = 0;
  double fidelity = 0.0;
};

// Rank of the true candidate: 1 + number of other candidates scoring at
// least as high. Ties are resolved against the true candidate.
inline std::size_t TrueCandidateRank(const RankingTrial& trial) {
  if (trial.true_index >= trial.candidate_scores.size()) {
    throw Error(ErrorCode::kInvalidArgument, "true_index out of range");
  }
  const double truth = trial.candidate_scores[trial.true_index];
  std::size_t rank = 1;
  for (std::size_t k = 0; k < trial.candidate_scores.size(); ++k) {
    if (k == trial.true_index) continue;
    if (trial.candidate_scores[k] >= truth) ++rank;
  }
  return rank;
}

inline RankingMetrics ComputeRankingMetrics(std::span<const RankingTrial> trials) {
  if (trials.empty()) throw Error(ErrorCode::kInvalidArgument, "no ranking trials");
  RankingMetrics out;
  double reciprocal_sum = 0.0;
  double rank_sum = 0.0;
  std::size_t firsts = 0;
  for (const auto& trial : trials) {
    const std::size_t rank = TrueCandidateRank(trial);
    reciprocal_sum += 1.0 / static_cast<double>(rank);
    rank_sum += static_cast<double>(rank);
    out.worst_rank = std::max(out.worst_rank, rank);
    firsts += rank == 1 ? 1 : 0;
  }
  const double count = static_cast<double>(trials.size());
  out.mrr = reciprocal_sum / count;
  out.mean_rank = rank_sum / count;
  out.fidelity = static_cast<double>(firsts) / count;
  return out;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline PRF MakePRF(double hits, double predicted, double gold) {
  PRF out;
  out.precision = predicted > 0.0 ? hits / predicted : 0.0;
  out.recall = gold > 0.0 ? hits / gold : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

struct DocCharSpan {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
};

// A source passage and the target passage it was copied into.
struct SpanPair {
  DocCharSpan source;
  DocCharSpan target;
};

namespace detail {

using IntervalSet = std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>>;

inline IntervalSet CoveredCharacters(std::span<const SpanPair> pairs) {
  IntervalSet raw;
  for (const auto& pair : pairs) {
    for (const DocCharSpan* span : {&pair.source, &pair.target}) {
      if (span->start >= span->end) {
        throw Error(ErrorCode::kInvalidArgument, "empty or inverted character span in '" +
                                                     span->doc_id + "'");
      }
      raw[span->doc_id].emplace_back(span->start, span->end);
    }
  }
  for (auto& [doc, intervals] : raw) {
    std::sort(intervals.begin(), intervals.end());
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (const auto& iv : intervals) {
      if (!merged.empty() && iv.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, iv.second);
      } else {
        merged.push_back(iv);
      }
    }
    intervals = std::move(merged);
  }
  return raw;
}

inline double CoveredLength(const IntervalSet& set) {
  double total = 0.0;
  for (const auto& [doc, intervals] : set) {
    for (const auto& [start, end] : intervals) total += static_cast<double>(end - start);
  }
  return total;
}

inline double OverlapLength(const IntervalSet& a, const IntervalSet& b) {
  double total = 0.0;
  for (const auto& [doc, xs] : a) {
    const auto it = b.find(doc);
    if (it == b.end()) continue;
    const auto& ys = it->second;
    std::size_t i = 0, j = 0;
    while (i < xs.size() && j < ys.size()) {
      const std::size_t lo = std::max(xs[i].first, ys[j].first);
      const std::size_t hi = std::min(xs[i].second, ys[j].second);
      if (lo < hi) total += static_cast<double>(hi - lo);
      (xs[i].second < ys[j].second) ? ++i : ++j;
    }
  }
  return total;
}

}  // namespace detail

// Character-level micro P/R/F1: both the source and the target side of
// every pair contribute their characters.
inline PRF SpanPRF(std::span<const SpanPair> predicted, std::span<const SpanPair> gold) {
  const auto p = detail::CoveredCharacters(predicted);
  const auto g = detail::CoveredCharacters(gold);
  return MakePRF(detail::OverlapLength(p, g), detail::CoveredLength(p), detail::CoveredLength(g));
}

// (i, j) sentence pairs; j = -1 marks a gold sentence left unaligned.
using SentencePairSet = std::set<std::pair<long, long>>;

struct PairCounts {
  std::size_t hits = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

inline PairCounts CountSentencePairs(const SentencePairSet& predicted, const SentencePairSet& gold) {
  PairCounts counts;
  for (const auto& pair : gold) counts.gold += pair.second >= 0 ? 1 : 0;
  for (const auto& pair : predicted) {
    if (pair.second < 0) continue;
    ++counts.predicted;
    counts.hits += gold.count(pair) ? 1 : 0;
  }
  return counts;
}

inline PRF SentencePairPRF(const SentencePairSet& predicted, const SentencePairSet& gold) {
  const PairCounts c = CountSentencePairs(predicted, gold);
  return MakePRF(static_cast<double>(c.hits), static_cast<double>(c.predicted),
                 static_cast<double>(c.gold));
}

// Sentence pairs matched by the spans of an alignment (match moves only).
inline SentencePairSet AlignedSentencePairs(const AlignmentResult& result) {
  SentencePairSet pairs;
  for (const auto& span : result.spans) {
    for (const auto& step : span.path) {
      if (IsMatchMove(step.move)) {
        pairs.emplace(static_cast<long>(step.i), static_cast<long>(step.j));
      }
    }
  }
  return pairs;
}

enum class CorrelationMethod { kPearson, kSpearman };

namespace detail {

inline std::vector<double> MidRanks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    const double mid = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = mid;
    start = end;
  }
  return ranks;
}

}  // namespace detail

inline double PearsonCorrelation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "correlation needs two equal-length series of >= 2");
  }
  const double count = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / count;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / count;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::kDegenerateCorrelation, "a coordinate has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline constexpr std::size_t kDefaultOrderTopK = 20;

// Correlation between the X and Y start positions of the top_k
// highest-scoring spans. Related documents tend to align in order.
inline double AlignmentOrderCorrelation(const AlignmentResult& result,
                                        std::size_t top_k = kDefaultOrderTopK,
                                        CorrelationMethod method = CorrelationMethod::kPearson) {
  std::vector<const AlignmentSpan*> spans;
  for (const auto& span : result.spans) spans.push_back(&span);
  std::stable_sort(spans.begin(), spans.end(),
                   [](const auto* a, const auto* b) { return a->score > b->score; });
  if (spans.size() > top_k) spans.resize(top_k);
  if (spans.size() < 2) {
    throw Error(ErrorCode::kDegenerateCorrelation, "order correlation needs at least 2 spans");
  }
  std::vector<double> xs, ys;
  for (const auto* span : spans) {
    xs.push_back(static_cast<double>(span->x_start));
    ys.push_back(static_cast<double>(span->y_start));
  }
  if (method == CorrelationMethod::kSpearman) {
    const auto rx = detail::MidRanks(xs);
    const auto ry = detail::MidRanks(ys);
    return PearsonCorrelation(rx, ry);
  }
  return PearsonCorrelation(xs, ys);
}

}  // namespace gnat
