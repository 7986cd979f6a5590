#pragma once

// Segment-pair similarity scorers and the calibration that maps every
// scorer's raw output onto a common (-1, 1) scale.
//
// Calibration: with Z = (raw - mu) / sigma measured against a background of
// unrelated segment pairs, the calibrated score is 2 * logistic(Z - th_s) - 1.
// It is negative below the z-score threshold th_s and positive above it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gnat/corpus.hpp"
#include "gnat/detail/parallel.hpp"
#include "gnat/detail/random.hpp"
#include "gnat/error.hpp"
#include "gnat/vectors.hpp"

namespace gnat {

enum class ScorerKind {
  kJaccard,
  kTfidfCosine,
  kWordvecMeanCosine,
  kEmbeddingCosine,
  kHamming,
};

inline std::string_view ScorerKindName(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kJaccard: return "jaccard";
    case ScorerKind::kTfidfCosine: return "tfidf_cosine";
    case ScorerKind::kWordvecMeanCosine: return "wordvec_mean_cosine";
    case ScorerKind::kEmbeddingCosine: return "embedding_cosine";
    case ScorerKind::kHamming: return "hamming";
  }
  return "jaccard";
}

// Accepts the canonical names plus the short aliases used on the command line.
inline ScorerKind ParseScorerKind(std::string_view name) {
  if (name == "jaccard") return ScorerKind::kJaccard;
  if (name == "tfidf_cosine" || name == "tfidf") return ScorerKind::kTfidfCosine;
  if (name == "wordvec_mean_cosine" || name == "wordvec" || name == "glove") {
    return ScorerKind::kWordvecMeanCosine;
  }
  if (name == "embedding_cosine" || name == "embedding" || name == "sbert") {
    return ScorerKind::kEmbeddingCosine;
  }
  if (name == "hamming") return ScorerKind::kHamming;
  throw Error(ErrorCode::kInvalidArgument, "unknown scorer '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Raw scorers

namespace detail {

using Bag = std::vector<std::pair<std::string, std::uint32_t>>;

inline Bag MakeBag(std::span<const std::string> tokens) {
  std::map<std::string, std::uint32_t> counts;
  for (const auto& token : tokens) ++counts[token];
  return Bag(counts.begin(), counts.end());
}

inline double BagJaccard(const Bag& a, const Bag& b) {
  std::uint64_t intersection = 0;
  std::uint64_t union_size = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      union_size += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      union_size += ib->second;
      ++ib;
    } else {
      intersection += std::min(ia->second, ib->second);
      union_size += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  if (union_size == 0) return 0.0;
  return static_cast<double>(intersection) / static_cast<double>(union_size);
}

// dot / sqrt(|a|^2 |b|^2): for a == b this is exactly 1 in IEEE arithmetic.
inline double CosineFromParts(double dot, double sq_a, double sq_b) {
  const double value = dot / std::sqrt(sq_a * sq_b);
  return std::clamp(value, -1.0, 1.0);
}

struct SparseVector {
  std::vector<std::pair<std::string, double>> entries;  // sorted by token
  double squared_norm = 0.0;
};

inline double SparseCosine(const SparseVector& a, const SparseVector& b) {
  if (a.squared_norm == 0.0 || b.squared_norm == 0.0) return 0.0;
  double dot = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(CosineFromParts(dot, a.squared_norm, b.squared_norm), 0.0, 1.0);
}

struct DenseVector {
  std::vector<double> values;
  double squared_norm = 0.0;
};

inline double DenseCosine(const DenseVector& a, const DenseVector& b) {
  if (a.squared_norm == 0.0 || b.squared_norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) dot += a.values[k] * b.values[k];
  return CosineFromParts(dot, a.squared_norm, b.squared_norm);
}

}  // namespace detail

// Multiset Jaccard: per-token min counts over per-token max counts.
inline double Jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  return detail::BagJaccard(detail::MakeBag(a), detail::MakeBag(b));
}

// Document frequencies over the segments of both documents being aligned.
class DocumentFrequency {
 public:
  DocumentFrequency() = default;

  template <typename Range>
  static DocumentFrequency FromTokenLists(const Range& token_lists) {
    DocumentFrequency out;
    for (const auto& tokens : token_lists) out.Add(tokens);
    return out;
  }

  void Add(std::span<const std::string> tokens) {
    ++document_count_;
    std::vector<std::string> unique(tokens.begin(), tokens.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& token : unique) ++df_[std::move(token)];
  }

  std::size_t document_count() const { return document_count_; }

  std::size_t Df(const std::string& token) const {
    const auto it = df_.find(token);
    return it == df_.end() ? 0 : it->second;
  }

  // Smoothed idf: ln((1 + N) / (1 + df)) + 1.
  double Idf(const std::string& token) const {
    return std::log((1.0 + static_cast<double>(document_count_)) /
                    (1.0 + static_cast<double>(Df(token)))) +
           1.0;
  }

 private:
  std::size_t document_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

namespace detail {

inline SparseVector TfidfVector(std::span<const std::string> tokens,
                                const DocumentFrequency& df) {
  SparseVector out;
  for (const auto& [token, count] : MakeBag(tokens)) {
    const double weight = static_cast<double>(count) * df.Idf(token);
    out.entries.emplace_back(token, weight);
    out.squared_norm += weight * weight;
  }
  return out;
}

inline DenseVector MeanWordVector(std::span<const std::string> tokens,
                                  const WordVectorTable& table) {
  DenseVector out;
  out.values.assign(table.dim(), 0.0);
  std::size_t found = 0;
  for (const auto& token : tokens) {
    const auto* vector = table.Find(token);
    if (vector == nullptr) continue;
    ++found;
    for (std::size_t k = 0; k < table.dim(); ++k) out.values[k] += (*vector)[k];
  }
  if (found == 0) return out;
  for (double& v : out.values) {
    v /= static_cast<double>(found);
    out.squared_norm += v * v;
  }
  return out;
}

}  // namespace detail

inline double TfidfCosine(const Segment& a, const Segment& b, const DocumentFrequency& df) {
  return detail::SparseCosine(detail::TfidfVector(a.tokens, df),
                              detail::TfidfVector(b.tokens, df));
}

// Cosine of the mean in-vocabulary word vectors; 0 when either side has no
// in-vocabulary token.
inline double WordvecMeanCosine(const Segment& a, const Segment& b,
                                const WordVectorTable& table) {
  return detail::DenseCosine(detail::MeanWordVector(a.tokens, table),
                             detail::MeanWordVector(b.tokens, table));
}

inline double EmbeddingCosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dimensions differ: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
  double dot = 0.0;
  double sq_a = 0.0;
  double sq_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<double>(a[k]) * b[k];
    sq_a += static_cast<double>(a[k]) * a[k];
    sq_b += static_cast<double>(b[k]) * b[k];
  }
  if (sq_a == 0.0 || sq_b == 0.0) {
    throw Error(ErrorCode::kDegenerateEmbedding, "zero embedding vector");
  }
  return detail::CosineFromParts(dot, sq_a, sq_b);
}

// The longer token list is cut into as many chunks as the shorter list has
// tokens (chunk i = [floor(i n / m), floor((i + 1) n / m))); the score is
// the fraction of chunks that contain the matching word of the shorter list.
inline double HammingSimilarity(std::span<const std::string> a,
                                std::span<const std::string> b) {
  const auto shorter = a.size() <= b.size() ? a : b;
  const auto longer = a.size() <= b.size() ? b : a;
  const std::size_t m = shorter.size();
  const std::size_t n = longer.size();
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "hamming similarity of an empty segment");
  std::size_t misses = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto first = longer.begin() + static_cast<std::ptrdiff_t>(i * n / m);
    const auto last = longer.begin() + static_cast<std::ptrdiff_t>((i + 1) * n / m);
    if (std::find(first, last, shorter[i]) == last) ++misses;
  }
  return 1.0 - static_cast<double>(misses) / static_cast<double>(m);
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationStats {
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t sample_count = 0;
  ScorerKind scorer = ScorerKind::kJaccard;

  void Validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) {
      throw Error(ErrorCode::kInvalidArgument, "calibration sigma must be positive and finite");
    }
    if (sample_count < 2) {
      throw Error(ErrorCode::kInvalidArgument, "calibration needs at least 2 samples");
    }
  }
};

// Background fit of embedding cosine similarity over 10^8 random unrelated
// paragraph pairs (normal, mu = 0.097, sigma = 0.099).
inline CalibrationStats BuiltinEmbeddingCalibration() {
  return {0.097, 0.099, 100'000'000, ScorerKind::kEmbeddingCosine};
}

inline constexpr double kDefaultZThreshold = 3.0;

// 2 * logistic(z - th_s) - 1, written as tanh((z - th_s) / 2) and kept
// strictly inside (-1, 1).
inline double CalibrateZ(double z, double th_s) {
  const double value = std::tanh((z - th_s) / 2.0);
  constexpr double kUpper = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(value, -kUpper, kUpper);
}

inline double Calibrate(double raw, const CalibrationStats& stats, double th_s) {
  return CalibrateZ((raw - stats.mu) / stats.sigma, th_s);
}

// Mean and Bessel-corrected standard deviation of num_pairs scores of
// uniformly drawn distinct-index pairs from a pool of pool_size items.
// score(i, j) supplies the raw score of a pair.
template <typename ScoreFn>
CalibrationStats EstimateBackground(std::size_t pool_size, ScoreFn&& score,
                                    std::size_t num_pairs, std::uint64_t seed,
                                    ScorerKind scorer) {
  if (pool_size < 2) throw Error(ErrorCode::kInvalidArgument, "calibration pool needs >= 2 segments");
  if (num_pairs < 2) throw Error(ErrorCode::kInvalidArgument, "calibration needs >= 2 pairs");
  detail::Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> pairs(num_pairs);
  for (auto& pair : pairs) {
    const auto i = detail::UniformIndex(rng, pool_size);
    auto j = detail::UniformIndex(rng, pool_size - 1);
    if (j >= i) ++j;
    pair = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
  }
  std::vector<double> scores(num_pairs);
  detail::ParallelFor(num_pairs, [&](std::size_t k) {
    scores[k] = score(pairs[k].first, pairs[k].second);
  });
  double sum = 0.0;
  for (double s : scores) sum += s;
  const double mean = sum / static_cast<double>(num_pairs);
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  const double sigma = std::sqrt(sq / static_cast<double>(num_pairs - 1));
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::kDegenerateBackground,
                "all " + std::to_string(num_pairs) + " sampled background scores equal " +
                    std::to_string(mean));
  }
  return {mean, sigma, num_pairs, scorer};
}

// ---------------------------------------------------------------------------
// Scoring segments drawn from one or more documents

struct ScorerConfig {
  ScorerKind kind = ScorerKind::kJaccard;
  const WordVectorTable* word_vectors = nullptr;
  const EmbeddingTable* embeddings = nullptr;
};

struct SegmentRef {
  std::string_view doc_id;
  const Segment* segment = nullptr;
};

inline std::vector<SegmentRef> SegmentRefs(const SegmentedDocument& doc) {
  std::vector<SegmentRef> refs;
  refs.reserve(doc.segments.size());
  for (const auto& seg : doc.segments) refs.push_back({doc.doc_id, &seg});
  return refs;
}

inline std::vector<SegmentRef> SegmentRefs(std::span<const SegmentedDocument> docs) {
  std::vector<SegmentRef> refs;
  for (const auto& doc : docs) {
    for (const auto& seg : doc.segments) refs.push_back({doc.doc_id, &seg});
  }
  return refs;
}

// Precomputes per-segment features for one scorer so that scoring a pair is
// a cheap merge. Feature computation shares code with the free functions
// above, so Raw() and e.g. Jaccard() agree bit for bit.
class SegmentScorer {
 public:
  // `corpus` defines the tf-idf document frequencies and is ignored by the
  // other scorers.
  SegmentScorer(const ScorerConfig& config, std::span<const SegmentRef> corpus)
      : config_(config) {
    switch (config_.kind) {
      case ScorerKind::kTfidfCosine:
        for (const auto& ref : corpus) df_.Add(ref.segment->tokens);
        break;
      case ScorerKind::kWordvecMeanCosine:
        if (config_.word_vectors == nullptr) {
          throw Error(ErrorCode::kMissingResource, "wordvec_mean_cosine needs a word-vector table");
        }
        break;
      case ScorerKind::kEmbeddingCosine:
        if (config_.embeddings == nullptr) {
          throw Error(ErrorCode::kMissingResource, "embedding_cosine needs an embedding table");
        }
        break;
      default:
        break;
    }
  }

  ScorerKind kind() const { return config_.kind; }

  // Features for one segment; computed once per segment by callers that
  // score many pairs.
  struct Features {
    detail::Bag bag;
    detail::SparseVector tfidf;
    detail::DenseVector mean;
    const std::vector<float>* embedding = nullptr;
    const std::vector<std::string>* tokens = nullptr;
  };

  Features Extract(const SegmentRef& ref) const {
    Features f;
    f.tokens = &ref.segment->tokens;
    switch (config_.kind) {
      case ScorerKind::kJaccard:
        f.bag = detail::MakeBag(ref.segment->tokens);
        break;
      case ScorerKind::kTfidfCosine:
        f.tfidf = detail::TfidfVector(ref.segment->tokens, df_);
        break;
      case ScorerKind::kWordvecMeanCosine:
        f.mean = detail::MeanWordVector(ref.segment->tokens, *config_.word_vectors);
        break;
      case ScorerKind::kEmbeddingCosine:
        f.embedding = config_.embeddings->Find(ref.doc_id, ref.segment->index);
        if (f.embedding == nullptr) {
          throw Error(ErrorCode::kMissingResource,
                      "no embedding for segment " + std::to_string(ref.segment->index) +
                          " of '" + std::string(ref.doc_id) + "'");
        }
        break;
      case ScorerKind::kHamming:
        break;
    }
    return f;
  }

  double Score(const Features& a, const Features& b) const {
    switch (config_.kind) {
      case ScorerKind::kJaccard: return detail::BagJaccard(a.bag, b.bag);
      case ScorerKind::kTfidfCosine: return detail::SparseCosine(a.tfidf, b.tfidf);
      case ScorerKind::kWordvecMeanCosine: return detail::DenseCosine(a.mean, b.mean);
      case ScorerKind::kEmbeddingCosine: return EmbeddingCosine(*a.embedding, *b.embedding);
      case ScorerKind::kHamming: return HammingSimilarity(*a.tokens, *b.tokens);
    }
    return 0.0;
  }

  double Raw(const SegmentRef& a, const SegmentRef& b) const {
    return Score(Extract(a), Extract(b));
  }

  const DocumentFrequency& document_frequency() const { return df_; }

 private:
  ScorerConfig config_;
  DocumentFrequency df_;
};

inline CalibrationStats EstimateCalibration(const ScorerConfig& scorer,
                                            std::span<const SegmentRef> pool,
                                            std::size_t num_pairs, std::uint64_t seed) {
  if (pool.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "calibration pool needs >= 2 segments");
  }
  const SegmentScorer scoring(scorer, pool);
  std::vector<SegmentScorer::Features> features;
  features.reserve(pool.size());
  for (const auto& ref : pool) features.push_back(scoring.Extract(ref));
  return EstimateBackground(
      pool.size(),
      [&](std::size_t i, std::size_t j) { return scoring.Score(features[i], features[j]); },
      num_pairs, seed, scorer.kind);
}

// ---------------------------------------------------------------------------
// Similarity matrix

class SimilarityMatrix {
 public:
  SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> raw,
                   const CalibrationStats& stats, double th_s)
      : rows_(rows), cols_(cols), raw_(std::move(raw)), stats_(stats), th_s_(th_s) {
    if (raw_.size() != rows * cols) {
      throw Error(ErrorCode::kDimensionMismatch, "raw score count does not match matrix shape");
    }
    stats_.Validate();
    calibrated_.resize(raw_.size());
    for (std::size_t k = 0; k < raw_.size(); ++k) {
      calibrated_[k] = Calibrate(raw_[k], stats_, th_s_);
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double raw(std::size_t i, std::size_t j) const { return raw_[i * cols_ + j]; }
  double calibrated(std::size_t i, std::size_t j) const { return calibrated_[i * cols_ + j]; }
  std::span<const double> raw_values() const { return raw_; }
  std::span<const double> calibrated_values() const { return calibrated_; }
  const CalibrationStats& stats() const { return stats_; }
  double th_s() const { return th_s_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> raw_;
  std::vector<double> calibrated_;
  CalibrationStats stats_;
  double th_s_;
};

// raw(i, j) = score of (a.segments[i], b.segments[j]); tf-idf frequencies
// are taken over the segments of both documents.
inline SimilarityMatrix BuildSimilarityMatrix(const SegmentedDocument& a,
                                              const SegmentedDocument& b,
                                              const ScorerConfig& scorer,
                                              const CalibrationStats& stats, double th_s) {
  const auto refs_a = SegmentRefs(a);
  const auto refs_b = SegmentRefs(b);
  std::vector<SegmentRef> corpus(refs_a);
  corpus.insert(corpus.end(), refs_b.begin(), refs_b.end());
  const SegmentScorer scoring(scorer, corpus);

  std::vector<SegmentScorer::Features> fa;
  std::vector<SegmentScorer::Features> fb;
  for (const auto& ref : refs_a) fa.push_back(scoring.Extract(ref));
  for (const auto& ref : refs_b) fb.push_back(scoring.Extract(ref));

  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<double> raw(m * n);
  detail::ParallelFor(m, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      try {
        raw[i * n + j] = scoring.Score(fa[i], fb[j]);
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " at cell (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
      }
    }
  });
  return SimilarityMatrix(m, n, std::move(raw), stats, th_s);
}

}  // namespace gnat
