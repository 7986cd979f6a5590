#pragma once

// Smith-Waterman local alignment over a calibrated similarity matrix, with
// linear or affine (Gotoh) gap penalties, and greedy extraction of multiple
// non-overlapping local alignments from a single DP pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gnat/error.hpp"
#include "gnat/simscore.hpp"

namespace gnat {

enum class GapMode { kLinear, kAffine };

inline std::string_view GapModeName(GapMode mode) {
  return mode == GapMode::kLinear ? "linear" : "affine";
}

inline GapMode ParseGapMode(std::string_view name) {
  if (name == "linear") return GapMode::kLinear;
  if (name == "affine") return GapMode::kAffine;
  throw Error(ErrorCode::kInvalidArgument, "unknown gap mode '" + std::string(name) + "'");
}

struct GapParams {
  GapMode mode = GapMode::kAffine;
  double gap = -1.0;          // linear mode
  double gap_open = -1.0;     // affine mode, first gap step
  double gap_extend = -0.25;  // affine mode, each further step
  // Also lets a segment pair with the neighbour of an already matched
  // segment, so one segment can align to several counterparts.
  bool many_to_many = false;

  static GapParams Linear(double gap) {
    GapParams p;
    p.mode = GapMode::kLinear;
    p.gap = gap;
    return p;
  }

  static GapParams Affine(double open, double extend) {
    GapParams p;
    p.mode = GapMode::kAffine;
    p.gap_open = open;
    p.gap_extend = extend;
    return p;
  }

  double OpenPenalty() const { return mode == GapMode::kLinear ? gap : gap_open; }
  double ExtendPenalty() const { return mode == GapMode::kLinear ? gap : gap_extend; }

  void Validate() const {
    if (mode == GapMode::kLinear) {
      if (!(gap <= 0.0) || !std::isfinite(gap)) {
        throw Error(ErrorCode::kInvalidArgument, "linear gap penalty must be finite and <= 0");
      }
      return;
    }
    if (!(gap_open <= 0.0) || !(gap_extend <= 0.0) || !std::isfinite(gap_open) ||
        !std::isfinite(gap_extend)) {
      throw Error(ErrorCode::kInvalidArgument, "affine gap penalties must be finite and <= 0");
    }
    if (gap_extend < gap_open) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gap_extend must not be more negative than gap_open");
    }
  }
};

// Backtrace tags. kUpMatch / kLeftMatch only occur in many-to-many mode.
enum class Move : std::uint8_t { kStop, kDiag, kUp, kLeft, kUpMatch, kLeftMatch };

inline std::string_view MoveName(Move move) {
  switch (move) {
    case Move::kStop: return "stop";
    case Move::kDiag: return "diag";
    case Move::kUp: return "up";
    case Move::kLeft: return "left";
    case Move::kUpMatch: return "up_match";
    case Move::kLeftMatch: return "left_match";
  }
  return "stop";
}

inline bool IsMatchMove(Move move) {
  return move == Move::kDiag || move == Move::kUpMatch || move == Move::kLeftMatch;
}

// DP matrices of size (m + 1) x (n + 1), row-major. Cell (i, j) with i, j >= 1
// scores segment pair (i - 1, j - 1). E holds the best score ending in a gap
// in Y (a left move), F the best ending in a gap in X (an up move).
class DPState {
 public:
  DPState(std::size_t m, std::size_t n, std::vector<double> similarity, GapParams gap)
      : m_(m), n_(n), gap_(gap), similarity_(std::move(similarity)) {
    const std::size_t cells = (m + 1) * (n + 1);
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    h_.assign(cells, 0.0);
    e_.assign(cells, kNegInf);
    f_.assign(cells, kNegInf);
    moves_.assign(cells, Move::kStop);
    extend_flags_.assign(cells, 0);
  }

  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  const GapParams& gap() const { return gap_; }

  double H(std::size_t i, std::size_t j) const { return h_[At(i, j)]; }
  double E(std::size_t i, std::size_t j) const { return e_[At(i, j)]; }
  double F(std::size_t i, std::size_t j) const { return f_[At(i, j)]; }
  Move move(std::size_t i, std::size_t j) const { return moves_[At(i, j)]; }
  // Similarity of segment pair (x, y), 0-based.
  double S(std::size_t x, std::size_t y) const { return similarity_[x * n_ + y]; }

  // True when E(i, j) / F(i, j) continues a gap rather than opening one.
  bool EExtends(std::size_t i, std::size_t j) const { return extend_flags_[At(i, j)] & 1; }
  bool FExtends(std::size_t i, std::size_t j) const { return extend_flags_[At(i, j)] & 2; }

  double MaxScore() const { return *std::max_element(h_.begin(), h_.end()); }

 private:
  friend DPState SmithWaterman(std::size_t, std::size_t, std::span<const double>,
                               const GapParams&);

  std::size_t At(std::size_t i, std::size_t j) const { return i * (n_ + 1) + j; }

  std::size_t m_;
  std::size_t n_;
  GapParams gap_;
  std::vector<double> similarity_;
  std::vector<double> h_;
  std::vector<double> e_;
  std::vector<double> f_;
  std::vector<Move> moves_;
  std::vector<std::uint8_t> extend_flags_;
};

// Fills the DP over an m x n row-major similarity grid. Ties between
// candidates resolve diag > up_match > left_match > up > left > stop.
inline DPState SmithWaterman(std::size_t m, std::size_t n, std::span<const double> similarity,
                             const GapParams& gap) {
  gap.Validate();
  if (m == 0 || n == 0) throw Error(ErrorCode::kInvalidArgument, "empty similarity matrix");
  if (similarity.size() != m * n) {
    throw Error(ErrorCode::kDimensionMismatch, "similarity size does not match m x n");
  }
  for (std::size_t k = 0; k < similarity.size(); ++k) {
    if (!std::isfinite(similarity[k])) {
      throw Error(ErrorCode::kNonFiniteScore,
                  "similarity at cell (" + std::to_string(k / n) + ", " +
                      std::to_string(k % n) + ") is not finite");
    }
  }

  DPState dp(m, n, std::vector<double>(similarity.begin(), similarity.end()), gap);
  const bool affine = gap.mode == GapMode::kAffine;
  const double open = gap.OpenPenalty();
  const double extend = gap.ExtendPenalty();
  const std::size_t stride = n + 1;

  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t cell = i * stride + j;
      const std::size_t up = cell - stride;
      const std::size_t left = cell - 1;
      const std::size_t diag = up - 1;
      const double s = similarity[(i - 1) * n + (j - 1)];

      std::uint8_t flags = 0;
      double e = dp.h_[left] + open;
      double f = dp.h_[up] + open;
      if (affine) {
        const double e_ext = dp.e_[left] + extend;
        if (e_ext > e) {
          e = e_ext;
          flags |= 1;
        }
        const double f_ext = dp.f_[up] + extend;
        if (f_ext > f) {
          f = f_ext;
          flags |= 2;
        }
      }
      dp.e_[cell] = e;
      dp.f_[cell] = f;
      dp.extend_flags_[cell] = flags;

      double best = dp.h_[diag] + s;
      Move move = Move::kDiag;
      if (gap.many_to_many) {
        const double up_match = dp.h_[up] + s;
        if (up_match > best) {
          best = up_match;
          move = Move::kUpMatch;
        }
        const double left_match = dp.h_[left] + s;
        if (left_match > best) {
          best = left_match;
          move = Move::kLeftMatch;
        }
      }
      if (f > best) {
        best = f;
        move = Move::kUp;
      }
      if (e > best) {
        best = e;
        move = Move::kLeft;
      }
      if (0.0 > best) {
        best = 0.0;
        move = Move::kStop;
      }
      dp.h_[cell] = best;
      dp.moves_[cell] = move;
    }
  }
  return dp;
}

inline DPState SmithWaterman(const SimilarityMatrix& sim, const GapParams& gap) {
  return SmithWaterman(sim.rows(), sim.cols(), sim.calibrated_values(), gap);
}

// One step of an alignment path: the move taken into DP cell (i + 1, j + 1),
// reported with 0-based segment indices i, j.
struct PathStep {
  std::size_t i = 0;
  std::size_t j = 0;
  Move move = Move::kDiag;
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

// Inclusive 0-based segment ranges of X and Y plus the path that produced
// them.
struct AlignmentSpan {
  std::size_t x_start = 0;
  std::size_t x_end = 0;
  std::size_t y_start = 0;
  std::size_t y_end = 0;
  double score = 0.0;
  std::vector<PathStep> path;
};

// Re-scores a path: similarity for match moves, gap open for the first step
// of a gap run and gap extend for each further step in the same direction.
inline double PathScore(const DPState& dp, std::span<const PathStep> path) {
  double score = 0.0;
  Move previous = Move::kStop;
  for (const auto& step : path) {
    switch (step.move) {
      case Move::kDiag:
      case Move::kUpMatch:
      case Move::kLeftMatch:
        score += dp.S(step.i, step.j);
        break;
      case Move::kUp:
      case Move::kLeft:
        score += previous == step.move ? dp.gap().ExtendPenalty() : dp.gap().OpenPenalty();
        break;
      case Move::kStop:
        break;
    }
    previous = step.move;
  }
  return score;
}

namespace detail {

// [first, last) of the highest-scoring sub-path that starts and ends on a
// match move; {0, 0} when the path has no match move. A backtrace cut short
// by a claimed row or column can carry a losing prefix, which this drops.
inline std::pair<std::size_t, std::size_t> BestMatchBoundedRun(const DPState& dp,
                                                               std::span<const PathStep> path) {
  std::pair<std::size_t, std::size_t> best{0, 0};
  double best_score = -std::numeric_limits<double>::infinity();
  double prefix = 0.0;
  double min_prefix = std::numeric_limits<double>::infinity();
  std::size_t min_at = 0;
  Move previous = Move::kStop;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const PathStep& step = path[k];
    if (IsMatchMove(step.move) && prefix < min_prefix) {
      min_prefix = prefix;
      min_at = k;
    }
    if (IsMatchMove(step.move)) {
      prefix += dp.S(step.i, step.j);
    } else {
      prefix += previous == step.move ? dp.gap().ExtendPenalty() : dp.gap().OpenPenalty();
    }
    previous = step.move;
    if (IsMatchMove(step.move) && prefix - min_prefix >= best_score) {
      best_score = prefix - min_prefix;
      best = {min_at, k + 1};
    }
  }
  return best;
}

}  // namespace detail

// Greedy multiple local alignments. Cells are sorted once by H (descending,
// ties by row then column). From each cell whose row and column are still
// free, the backtrace runs until it reaches a zero cell or a row/column
// claimed by an earlier span. The fragment is trimmed to its best sub-path
// that starts and ends on a match move; it is kept if its re-scored value
// exceeds min_score, and then claims every X row and Y column it covers.
// The first span is the optimal Smith-Waterman alignment.
inline std::vector<AlignmentSpan> ExtractAlignments(const DPState& dp, std::size_t max_count,
                                                    double min_score = 0.0) {
  std::vector<AlignmentSpan> spans;
  if (max_count == 0) return spans;
  const std::size_t m = dp.m();
  const std::size_t n = dp.n();
  const double floor = std::max(min_score, 0.0);

  std::vector<std::pair<double, std::size_t>> cells;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const double h = dp.H(i, j);
      if (h > floor) cells.emplace_back(h, i * (n + 1) + j);
    }
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  std::vector<bool> row_claimed(m + 1, false);
  std::vector<bool> col_claimed(n + 1, false);
  std::size_t rows_left = m;
  std::size_t cols_left = n;
  const bool affine = dp.gap().mode == GapMode::kAffine;
  enum class State { kH, kE, kF };

  for (const auto& [h, index] : cells) {
    if (spans.size() == max_count || rows_left == 0 || cols_left == 0) break;
    std::size_t i = index / (n + 1);
    std::size_t j = index % (n + 1);
    if (row_claimed[i] || col_claimed[j]) continue;

    std::vector<PathStep> path;
    State state = State::kH;
    while (true) {
      std::size_t ni = i;
      std::size_t nj = j;
      State next = State::kH;
      if (state == State::kH) {
        const Move move = dp.move(i, j);
        if (move == Move::kStop) break;
        if (move == Move::kUp) {
          state = State::kF;
          continue;
        }
        if (move == Move::kLeft) {
          state = State::kE;
          continue;
        }
        path.push_back({i - 1, j - 1, move});
        if (move == Move::kDiag) {
          ni = i - 1;
          nj = j - 1;
        } else if (move == Move::kUpMatch) {
          ni = i - 1;
        } else {
          nj = j - 1;
        }
      } else if (state == State::kF) {
        path.push_back({i - 1, j - 1, Move::kUp});
        ni = i - 1;
        next = affine && dp.FExtends(i, j) ? State::kF : State::kH;
      } else {
        path.push_back({i - 1, j - 1, Move::kLeft});
        nj = j - 1;
        next = affine && dp.EExtends(i, j) ? State::kE : State::kH;
      }
      if (ni == 0 || nj == 0 || dp.H(ni, nj) == 0.0 || row_claimed[ni] || col_claimed[nj]) {
        break;
      }
      i = ni;
      j = nj;
      state = next;
    }
    std::reverse(path.begin(), path.end());

    const auto [first, last] = detail::BestMatchBoundedRun(dp, path);
    if (first == last) continue;
    std::vector<PathStep> trimmed(path.begin() + first, path.begin() + last);
    const double score = PathScore(dp, trimmed);
    if (!(score > floor)) continue;

    AlignmentSpan span;
    span.x_start = span.y_start = std::numeric_limits<std::size_t>::max();
    for (const auto& step : trimmed) {
      if (step.move != Move::kLeft) {
        span.x_start = std::min(span.x_start, step.i);
        span.x_end = std::max(span.x_end, step.i);
      }
      if (step.move != Move::kUp) {
        span.y_start = std::min(span.y_start, step.j);
        span.y_end = std::max(span.y_end, step.j);
      }
    }
    span.score = score;
    span.path = std::move(trimmed);
    for (std::size_t x = span.x_start; x <= span.x_end; ++x) {
      if (!row_claimed[x + 1]) --rows_left;
      row_claimed[x + 1] = true;
    }
    for (std::size_t y = span.y_start; y <= span.y_end; ++y) {
      if (!col_claimed[y + 1]) --cols_left;
      col_claimed[y + 1] = true;
    }
    spans.push_back(std::move(span));
  }
  std::stable_sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
    return a.score > b.score;
  });
  return spans;
}

struct AlignmentResult {
  std::vector<AlignmentSpan> spans;  // descending score
  double max_score = 0.0;
  std::size_t m = 0;
  std::size_t n = 0;
  GapParams gap;
  ScorerKind scorer = ScorerKind::kJaccard;
};

inline constexpr std::size_t kDefaultMaxAlignments = 20;

inline AlignmentResult AlignMatrix(const SimilarityMatrix& sim, ScorerKind scorer,
                                   const GapParams& gap, std::size_t max_count,
                                   double min_score = 0.0) {
  const DPState dp = SmithWaterman(sim, gap);
  AlignmentResult result;
  result.spans = ExtractAlignments(dp, max_count, min_score);
  result.max_score = dp.MaxScore();
  result.m = sim.rows();
  result.n = sim.cols();
  result.gap = gap;
  result.scorer = scorer;
  return result;
}

inline AlignmentResult AlignPair(const SegmentedDocument& a, const SegmentedDocument& b,
                                 const ScorerConfig& scorer, const CalibrationStats& stats,
                                 double th_s, const GapParams& gap,
                                 std::size_t max_count = kDefaultMaxAlignments,
                                 double min_score = 0.0) {
  const SimilarityMatrix sim = BuildSimilarityMatrix(a, b, scorer, stats, th_s);
  return AlignMatrix(sim, scorer.kind, gap, max_count, min_score);
}

}  // namespace gnat
