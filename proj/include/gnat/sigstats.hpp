#pragma once

// Significance of alignment scores. Maximum alignment scores between
// unrelated documents follow a Gumbel (extreme value type I) law
//
//   P(S >= x) = 1 - exp(-K m n e^{-lambda x}),
//
// equivalently a Gumbel with location mu = ln(K m n) / lambda and scale
// beta = 1 / lambda once m, n are fixed to reference lengths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gnat/align.hpp"
#include "gnat/corpus.hpp"
#include "gnat/detail/parallel.hpp"
#include "gnat/detail/random.hpp"
#include "gnat/error.hpp"
#include "gnat/simscore.hpp"

namespace gnat {

struct GumbelParams {
  double mu = 0.0;
  double beta = 1.0;
  double lambda = 1.0;
  double K = 1.0;
  double m_ref = 1.0;
  double n_ref = 1.0;
  std::size_t sample_count = 0;
  std::size_t excluded_zero_pairs = 0;

  static GumbelParams FromLocationScale(double mu, double beta, double m_ref = 1.0,
                                        double n_ref = 1.0) {
    if (!(beta > 0.0) || !(m_ref > 0.0) || !(n_ref > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "Gumbel scale and reference lengths must be positive");
    }
    GumbelParams p;
    p.mu = mu;
    p.beta = beta;
    p.lambda = 1.0 / beta;
    p.K = std::exp(p.lambda * mu) / (m_ref * n_ref);
    p.m_ref = m_ref;
    p.n_ref = n_ref;
    return p;
  }

  // ln(K m n) - lambda x, evaluated without forming K (which overflows for
  // large lambda mu).
  double LogTailIntensity(double score, double m, double n) const {
    return lambda * (mu - score) + std::log(m / m_ref) + std::log(n / n_ref);
  }
};

inline double GumbelCdf(double x, const GumbelParams& p) {
  return std::exp(-std::exp(-(x - p.mu) / p.beta));
}

// Probability that unrelated sequences of lengths m, n (default: the
// reference lengths) reach `score`. Below an intensity of 1e-300 the
// first-order value K m n e^{-lambda x} is returned.
inline double PValue(double score, const GumbelParams& params,
                     std::optional<double> m = std::nullopt,
                     std::optional<double> n = std::nullopt) {
  const double log_t =
      params.LogTailIntensity(score, m.value_or(params.m_ref), n.value_or(params.n_ref));
  const double t = std::exp(log_t);
  if (t < 1e-300) {
    return std::max(t, std::numeric_limits<double>::denorm_min());
  }
  return -std::expm1(-t);
}

// log10 of PValue without underflow, for reporting very small values.
inline double Log10PValue(double score, const GumbelParams& params,
                          std::optional<double> m = std::nullopt,
                          std::optional<double> n = std::nullopt) {
  const double log_t =
      params.LogTailIntensity(score, m.value_or(params.m_ref), n.value_or(params.n_ref));
  if (log_t < std::log(1e-300)) return log_t / std::numbers::ln10;
  return std::log(-std::expm1(-std::exp(log_t))) / std::numbers::ln10;
}

struct NullSample {
  std::vector<double> scores;  // all > 0
  double mean_m = 0.0;
  double mean_n = 0.0;
  std::size_t excluded_zero_pairs = 0;
};

// Everything needed to align one document pair.
struct AlignConfig {
  ScorerConfig scorer;
  CalibrationStats stats;
  double th_s = kDefaultZThreshold;
  GapParams gap;
};

namespace detail {

// k distinct values from [0, total), ascending (Floyd's algorithm).
inline std::vector<std::uint64_t> SampleDistinct(std::uint64_t total, std::uint64_t k, Rng& rng) {
  std::vector<std::uint64_t> out;
  if (k >= total) {
    out.resize(total);
    for (std::uint64_t v = 0; v < total; ++v) out[v] = v;
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  for (std::uint64_t j = total - k; j < total; ++j) {
    const std::uint64_t t = UniformIndex(rng, j + 1);
    chosen.insert(chosen.count(t) ? j : t);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Aligns num_pairs distinct unordered document pairs (all pairs when fewer
// exist) and records each pair's maximum DP score. Pairs scoring 0 are
// counted and left out of the sample.
inline NullSample SampleNullScores(std::span<const SegmentedDocument> corpus,
                                   const AlignConfig& config, std::size_t num_pairs,
                                   std::uint64_t seed) {
  const std::size_t d = corpus.size();
  if (d < 2) {
    throw Error(ErrorCode::kInsufficientNullSample, "null sampling needs at least 2 documents");
  }
  detail::Rng rng(seed);
  const std::uint64_t total = static_cast<std::uint64_t>(d) * (d - 1) / 2;
  const auto picks = detail::SampleDistinct(total, num_pairs, rng);

  // Map ascending pair ranks onto (a, b) with a < b in row-major order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(picks.size());
  std::size_t a = 0;
  std::uint64_t row_begin = 0;
  for (const std::uint64_t rank : picks) {
    while (rank >= row_begin + (d - 1 - a)) {
      row_begin += d - 1 - a;
      ++a;
    }
    pairs.emplace_back(a, a + 1 + static_cast<std::size_t>(rank - row_begin));
  }

  std::vector<double> maxima(pairs.size());
  detail::ParallelFor(pairs.size(), [&](std::size_t k) {
    const auto& [x, y] = pairs[k];
    const SimilarityMatrix sim =
        BuildSimilarityMatrix(corpus[x], corpus[y], config.scorer, config.stats, config.th_s);
    maxima[k] = SmithWaterman(sim, config.gap).MaxScore();
  });

  NullSample sample;
  for (double score : maxima) {
    if (score > 0.0) {
      sample.scores.push_back(score);
    } else {
      ++sample.excluded_zero_pairs;
    }
  }
  double total_segments = 0.0;
  for (const auto& doc : corpus) total_segments += static_cast<double>(doc.size());
  sample.mean_m = sample.mean_n = total_segments / static_cast<double>(d);
  if (sample.scores.size() < 2) {
    throw Error(ErrorCode::kInsufficientNullSample,
                std::to_string(sample.scores.size()) + " of " + std::to_string(pairs.size()) +
                    " pairs have a positive alignment score; need at least 2");
  }
  return sample;
}

inline constexpr std::size_t kMinRecommendedNullSample = 100;
inline constexpr int kGumbelMaxIterations = 200;
inline constexpr double kGumbelTolerance = 1e-9;

// Maximum-likelihood Gumbel fit. The scale solves
//   beta = mean(x) - sum(x e^{-x/beta}) / sum(e^{-x/beta})
// by Newton iteration from the moment estimate sd * sqrt(6) / pi; then
//   mu = -beta ln(mean(e^{-x/beta})).
inline GumbelParams FitGumbel(std::span<const double> scores, double m_ref, double n_ref) {
  const std::size_t count = scores.size();
  if (count < 2) {
    throw Error(ErrorCode::kInsufficientNullSample, "Gumbel fit needs at least 2 scores");
  }
  if (count < kMinRecommendedNullSample) {
    std::clog << "warning: fitting a Gumbel distribution to only " << count
              << " scores; estimates will be noisy\n";
  }
  double sum = 0.0;
  double min_x = scores[0];
  for (double x : scores) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "non-finite score in null sample");
    sum += x;
    min_x = std::min(min_x, x);
  }
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (double x : scores) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(count - 1));
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::kNonConvergence, "all null scores are identical; scale is zero");
  }

  // Weighted moments with weights e^{-(x - min) / beta}; the shift cancels in
  // the ratios and keeps the exponentials in range.
  auto moments = [&](double beta) {
    double w_sum = 0.0, wx = 0.0, wxx = 0.0;
    for (double x : scores) {
      const double d = x - min_x;
      const double w = std::exp(-d / beta);
      w_sum += w;
      wx += w * d;
      wxx += w * d * d;
    }
    const double a = wx / w_sum;
    return std::pair{a + min_x, std::max(wxx / w_sum - a * a, 0.0)};
  };

  double beta = sd * std::sqrt(6.0) / std::numbers::pi;
  std::ostringstream trace;
  bool converged = false;
  int iteration = 0;
  for (; iteration < kGumbelMaxIterations; ++iteration) {
    const auto [weighted_mean, weighted_var] = moments(beta);
    const double g = beta - mean + weighted_mean;
    const double slope = 1.0 + weighted_var / (beta * beta);
    double next = beta - g / slope;
    if (!(next > 0.0) || !std::isfinite(next)) next = beta / 2.0;
    const double step = std::abs(next - beta);
    if (iteration < 5 || iteration >= kGumbelMaxIterations - 3) {
      trace << " [" << iteration << "] beta=" << next << " step=" << step;
    }
    beta = next;
    if (step < kGumbelTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::kNonConvergence,
                "Gumbel scale did not converge in " + std::to_string(kGumbelMaxIterations) +
                    " iterations:" + trace.str());
  }

  double w_sum = 0.0;
  for (double x : scores) w_sum += std::exp(-(x - min_x) / beta);
  const double mu = min_x - beta * std::log(w_sum / static_cast<double>(count));

  GumbelParams params = GumbelParams::FromLocationScale(mu, beta, m_ref, n_ref);
  params.sample_count = count;
  return params;
}

inline GumbelParams FitGumbel(const NullSample& sample) {
  GumbelParams params = FitGumbel(sample.scores, sample.mean_m, sample.mean_n);
  params.excluded_zero_pairs = sample.excluded_zero_pairs;
  return params;
}

// Kolmogorov-Smirnov distance between the empirical scores and the fitted
// Gumbel CDF.
inline double KolmogorovSmirnov(std::span<const double> scores, const GumbelParams& params) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double count = static_cast<double>(sorted.size());
  double distance = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double cdf = GumbelCdf(sorted[k], params);
    distance = std::max({distance, cdf - static_cast<double>(k) / count,
                         static_cast<double>(k + 1) / count - cdf});
  }
  return distance;
}

}  // namespace gnat
