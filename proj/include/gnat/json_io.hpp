#pragma once

// JSON forms of the library types and a canonical writer: keys sorted, no
// whitespace, floating-point numbers with 17 significant digits. Parsing a
// canonical document and writing it again reproduces the same bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gnat/align.hpp"
#include "gnat/corpus.hpp"
#include "gnat/error.hpp"
#include "gnat/sigstats.hpp"
#include "gnat/simscore.hpp"
#include "gnat/vectors.hpp"

namespace gnat {

using Json = nlohmann::json;

namespace detail {

inline void DumpCanonical(const Json& value, std::string& out) {
  switch (value.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += Json(it.key()).dump();
        out.push_back(':');
        DumpCanonical(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      for (std::size_t k = 0; k < value.size(); ++k) {
        if (k > 0) out.push_back(',');
        DumpCanonical(value[k], out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float: {
      const double number = value.get<double>();
      if (!std::isfinite(number)) {
        throw Error(ErrorCode::kFormat, "cannot write a non-finite number as JSON");
      }
      char buffer[32];
      std::snprintf(buffer, sizeof(buffer), "%.17g", number);
      out += buffer;
      break;
    }
    default:
      out += value.dump();
      break;
  }
}

}  // namespace detail

inline std::string DumpCanonical(const Json& value) {
  std::string out;
  detail::DumpCanonical(value, out);
  return out;
}

inline Json ReadJsonFile(const std::filesystem::path& path) {
  const std::string bytes = detail::ReadFileBytes(path);
  try {
    return Json::parse(bytes);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, "'" + path.string() + "': " + e.what());
  }
}

// Writes canonical JSON followed by a newline.
inline void WriteJsonFile(const Json& value, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << DumpCanonical(value) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

template <typename T>
T JsonField(const Json& object, const char* key) {
  if (!object.is_object() || !object.contains(key)) {
    throw Error(ErrorCode::kFormat, std::string("missing JSON field '") + key + "'");
  }
  try {
    return object.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("bad JSON field '") + key + "': " + e.what());
  }
}

// --- corpus ----------------------------------------------------------------

inline Json ToJson(const SegmentationPolicy& policy) {
  Json j = {{"unit", SegmentUnitName(policy.unit)}, {"min_words", policy.min_words}};
  if (policy.unit == SegmentUnit::kFixedChunk) j["words_per_chunk"] = policy.words_per_chunk;
  if (policy.unit == SegmentUnit::kEqualChunks) j["count"] = policy.chunk_count;
  return j;
}

inline SegmentationPolicy PolicyFromJson(const Json& j) {
  SegmentationPolicy policy;
  policy.unit = ParseSegmentUnit(JsonField<std::string>(j, "unit"));
  policy.min_words = j.value("min_words", std::size_t{0});
  policy.words_per_chunk = j.value("words_per_chunk", std::size_t{0});
  policy.chunk_count = j.value("count", std::size_t{0});
  policy.Validate();
  return policy;
}

inline Json ToJson(const SegmentedDocument& doc) {
  Json segments = Json::array();
  for (const auto& seg : doc.segments) {
    segments.push_back({{"index", seg.index},
                        {"text", seg.text},
                        {"char_span", {seg.char_span.start, seg.char_span.end}}});
  }
  return {{"doc_id", doc.doc_id}, {"policy", ToJson(doc.policy)}, {"segments", segments}};
}

inline SegmentedDocument SegmentedDocumentFromJson(const Json& j) {
  SegmentedDocument doc;
  doc.doc_id = JsonField<std::string>(j, "doc_id");
  doc.policy = PolicyFromJson(JsonField<Json>(j, "policy"));
  for (const auto& s : JsonField<Json>(j, "segments")) {
    Segment seg;
    seg.index = JsonField<std::size_t>(s, "index");
    seg.text = JsonField<std::string>(s, "text");
    const auto span = JsonField<std::vector<std::size_t>>(s, "char_span");
    if (span.size() != 2 || span[0] > span[1]) {
      throw Error(ErrorCode::kFormat, "char_span must be [start, end]");
    }
    seg.char_span = {span[0], span[1]};
    seg.tokens = Tokenize(seg.text);
    if (seg.index != doc.segments.size()) {
      throw Error(ErrorCode::kFormat, "segment indices must be contiguous from 0");
    }
    doc.segments.push_back(std::move(seg));
  }
  if (doc.segments.empty()) throw Error(ErrorCode::kFormat, "document has no segments");
  return doc;
}

// --- simscore --------------------------------------------------------------

inline Json ToJson(const CalibrationStats& stats) {
  return {{"scorer", ScorerKindName(stats.scorer)},
          {"mu", stats.mu},
          {"sigma", stats.sigma},
          {"sample_count", stats.sample_count}};
}

inline CalibrationStats CalibrationFromJson(const Json& j) {
  CalibrationStats stats;
  stats.scorer = ParseScorerKind(JsonField<std::string>(j, "scorer"));
  stats.mu = JsonField<double>(j, "mu");
  stats.sigma = JsonField<double>(j, "sigma");
  stats.sample_count = JsonField<std::size_t>(j, "sample_count");
  stats.Validate();
  return stats;
}

inline Json ToJson(const SimilarityMatrix& sim) {
  Json raw = Json::array();
  Json calibrated = Json::array();
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    Json raw_row = Json::array();
    Json cal_row = Json::array();
    for (std::size_t j = 0; j < sim.cols(); ++j) {
      raw_row.push_back(sim.raw(i, j));
      cal_row.push_back(sim.calibrated(i, j));
    }
    raw.push_back(std::move(raw_row));
    calibrated.push_back(std::move(cal_row));
  }
  return {{"m", sim.rows()},     {"n", sim.cols()},          {"th_s", sim.th_s()},
          {"stats", ToJson(sim.stats())}, {"raw", std::move(raw)}, {"calibrated", std::move(calibrated)}};
}

// The calibrated values are recomputed from raw, stats and th_s.
inline SimilarityMatrix SimilarityMatrixFromJson(const Json& j) {
  const auto m = JsonField<std::size_t>(j, "m");
  const auto n = JsonField<std::size_t>(j, "n");
  const auto rows = JsonField<std::vector<std::vector<double>>>(j, "raw");
  std::vector<double> raw;
  if (rows.size() != m) throw Error(ErrorCode::kFormat, "raw matrix row count differs from m");
  for (const auto& row : rows) {
    if (row.size() != n) throw Error(ErrorCode::kFormat, "raw matrix row length differs from n");
    raw.insert(raw.end(), row.begin(), row.end());
  }
  return SimilarityMatrix(m, n, std::move(raw), CalibrationFromJson(JsonField<Json>(j, "stats")),
                          JsonField<double>(j, "th_s"));
}

// --- align -----------------------------------------------------------------

inline Json ToJson(const GapParams& gap) {
  return {{"mode", GapModeName(gap.mode)},
          {"gap", gap.gap},
          {"gap_open", gap.gap_open},
          {"gap_extend", gap.gap_extend},
          {"many_to_many", gap.many_to_many}};
}

inline GapParams GapFromJson(const Json& j) {
  GapParams gap;
  gap.mode = ParseGapMode(JsonField<std::string>(j, "mode"));
  gap.gap = j.value("gap", gap.gap);
  gap.gap_open = j.value("gap_open", gap.gap_open);
  gap.gap_extend = j.value("gap_extend", gap.gap_extend);
  gap.many_to_many = j.value("many_to_many", false);
  gap.Validate();
  return gap;
}

inline Move ParseMove(std::string_view name) {
  for (Move move : {Move::kStop, Move::kDiag, Move::kUp, Move::kLeft, Move::kUpMatch,
                    Move::kLeftMatch}) {
    if (MoveName(move) == name) return move;
  }
  throw Error(ErrorCode::kFormat, "unknown move '" + std::string(name) + "'");
}

inline Json ToJson(const AlignmentSpan& span, bool with_path) {
  Json j = {{"x_start", span.x_start}, {"x_end", span.x_end}, {"y_start", span.y_start},
            {"y_end", span.y_end},     {"score", span.score}};
  if (with_path) {
    Json path = Json::array();
    for (const auto& step : span.path) path.push_back({step.i, step.j, MoveName(step.move)});
    j["path"] = std::move(path);
  }
  return j;
}

inline Json ToJson(const AlignmentResult& result, bool with_paths = false) {
  Json spans = Json::array();
  for (const auto& span : result.spans) spans.push_back(ToJson(span, with_paths));
  return {{"max_score", result.max_score}, {"m", result.m},
          {"n", result.n},                 {"scorer", ScorerKindName(result.scorer)},
          {"gap", ToJson(result.gap)},     {"spans", std::move(spans)}};
}

inline AlignmentResult AlignmentResultFromJson(const Json& j) {
  AlignmentResult result;
  result.max_score = JsonField<double>(j, "max_score");
  result.m = JsonField<std::size_t>(j, "m");
  result.n = JsonField<std::size_t>(j, "n");
  result.scorer = ParseScorerKind(JsonField<std::string>(j, "scorer"));
  result.gap = GapFromJson(JsonField<Json>(j, "gap"));
  for (const auto& s : JsonField<Json>(j, "spans")) {
    AlignmentSpan span;
    span.x_start = JsonField<std::size_t>(s, "x_start");
    span.x_end = JsonField<std::size_t>(s, "x_end");
    span.y_start = JsonField<std::size_t>(s, "y_start");
    span.y_end = JsonField<std::size_t>(s, "y_end");
    span.score = JsonField<double>(s, "score");
    if (span.x_start > span.x_end || span.y_start > span.y_end || span.x_end >= result.m ||
        span.y_end >= result.n) {
      throw Error(ErrorCode::kFormat, "span ranges out of bounds");
    }
    if (s.contains("path")) {
      for (const auto& step : s.at("path")) {
        span.path.push_back({step.at(0).get<std::size_t>(), step.at(1).get<std::size_t>(),
                             ParseMove(step.at(2).get<std::string>())});
      }
    }
    result.spans.push_back(std::move(span));
  }
  return result;
}

// --- sigstats --------------------------------------------------------------

inline Json ToJson(const GumbelParams& p) {
  return {{"mu", p.mu},
          {"beta", p.beta},
          {"lambda", p.lambda},
          {"K", p.K},
          {"m_ref", p.m_ref},
          {"n_ref", p.n_ref},
          {"sample_count", p.sample_count},
          {"excluded_zero_pairs", p.excluded_zero_pairs}};
}

// mu, beta and the reference lengths define the distribution; lambda and K
// are re-derived from them.
inline GumbelParams GumbelFromJson(const Json& j) {
  GumbelParams p = GumbelParams::FromLocationScale(
      JsonField<double>(j, "mu"), JsonField<double>(j, "beta"), j.value("m_ref", 1.0),
      j.value("n_ref", 1.0));
  p.sample_count = j.value("sample_count", std::size_t{0});
  p.excluded_zero_pairs = j.value("excluded_zero_pairs", std::size_t{0});
  return p;
}

}  // namespace gnat
