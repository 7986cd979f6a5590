#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gnat/gnat.hpp"

namespace gnat::cli {
namespace {

namespace fs = std::filesystem;

struct SegmentOptions {
  std::string unit = "paragraph";
  int min_words = -1;  // -1: the unit's default
  std::size_t words_per_chunk = 0;
  std::size_t chunks = 0;
};

struct PipelineOptions {
  SegmentOptions segment;
  std::string scorer = "jaccard";
  double th_s = kDefaultZThreshold;
  std::string gap_mode = "affine";
  double gap = -1.0;
  double gap_open = -1.0;
  double gap_extend = -0.25;
  bool many_to_many = false;
  std::size_t max_alignments = kDefaultMaxAlignments;
  double min_score = 0.0;
  std::string calibration = "auto";
  std::size_t calibration_pairs = 10000;
  std::uint64_t seed = 0;
  std::string embeddings;
  std::string word_vectors;
};

void AddSegmentOptions(CLI::App* app, SegmentOptions& o) {
  app->add_option("--unit", o.unit, "sentence | paragraph | fixed_chunk | equal_chunks")
      ->capture_default_str();
  app->add_option("--min-words", o.min_words,
                  "merge segments shorter than this (default: 0 sentence, 5 paragraph)");
  app->add_option("--words-per-chunk", o.words_per_chunk, "chunk size for fixed_chunk");
  app->add_option("--chunks", o.chunks, "chunk count for equal_chunks");
}

void AddPipelineOptions(CLI::App* app, PipelineOptions& o) {
  AddSegmentOptions(app, o.segment);
  app->add_option("--scorer", o.scorer,
                  "jaccard | tfidf | wordvec | embedding | hamming")
      ->capture_default_str();
  app->add_option("--th-s", o.th_s, "z-score threshold of the calibration")->capture_default_str();
  app->add_option("--gap-mode", o.gap_mode, "affine | linear")->capture_default_str();
  app->add_option("--gap", o.gap, "linear gap penalty")->capture_default_str();
  app->add_option("--gap-open", o.gap_open, "affine gap-open penalty")->capture_default_str();
  app->add_option("--gap-extend", o.gap_extend, "affine gap-extend penalty")
      ->capture_default_str();
  app->add_flag("--many-to-many", o.many_to_many, "let one segment match several");
  app->add_option("--max-alignments", o.max_alignments)->capture_default_str();
  app->add_option("--min-score", o.min_score, "drop spans scoring at or below this")
      ->capture_default_str();
  app->add_option("--calibration", o.calibration, "auto | builtin | <stats.json>")
      ->capture_default_str();
  app->add_option("--calibration-pairs", o.calibration_pairs,
                  "background pairs sampled by --calibration auto")
      ->capture_default_str();
  app->add_option("--seed", o.seed)->capture_default_str();
  app->add_option("--embeddings", o.embeddings, "GNATEMB1 embedding file");
  app->add_option("--word-vectors", o.word_vectors, "text word-vector file");
}

template <typename Parse>
auto ParseOrUsage(Parse&& parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

SegmentationPolicy MakePolicy(const SegmentOptions& o) {
  const SegmentUnit unit = ParseOrUsage([&] { return ParseSegmentUnit(o.unit); });
  SegmentationPolicy policy;
  switch (unit) {
    case SegmentUnit::kSentence:
      policy = SegmentationPolicy::Sentence();
      break;
    case SegmentUnit::kParagraph:
      policy = SegmentationPolicy::Paragraph();
      break;
    case SegmentUnit::kFixedChunk:
      if (o.words_per_chunk == 0) throw UsageError("--unit fixed_chunk needs --words-per-chunk");
      policy = SegmentationPolicy::FixedChunk(o.words_per_chunk);
      break;
    case SegmentUnit::kEqualChunks:
      if (o.chunks == 0) throw UsageError("--unit equal_chunks needs --chunks");
      policy = SegmentationPolicy::EqualChunks(o.chunks);
      break;
  }
  if (o.min_words >= 0) policy.min_words = static_cast<std::size_t>(o.min_words);
  return policy;
}

GapParams MakeGap(const PipelineOptions& o) {
  GapParams gap;
  gap.mode = ParseOrUsage([&] { return ParseGapMode(o.gap_mode); });
  gap.gap = o.gap;
  gap.gap_open = o.gap_open;
  gap.gap_extend = o.gap_extend;
  gap.many_to_many = o.many_to_many;
  ParseOrUsage([&] {
    gap.Validate();
    return 0;
  });
  return gap;
}

// Scorer plus the tables it reads; the tables outlive every ScorerConfig
// handed out.
class Scoring {
 public:
  explicit Scoring(const PipelineOptions& o) {
    config_.kind = ParseOrUsage([&] { return ParseScorerKind(o.scorer); });
    if (config_.kind == ScorerKind::kEmbeddingCosine) {
      if (o.embeddings.empty()) throw UsageError("--scorer embedding needs --embeddings");
      embeddings_ = std::make_unique<EmbeddingTable>(LoadEmbeddings(o.embeddings));
      config_.embeddings = embeddings_.get();
    }
    if (config_.kind == ScorerKind::kWordvecMeanCosine) {
      if (o.word_vectors.empty()) throw UsageError("--scorer wordvec needs --word-vectors");
      word_vectors_ = std::make_unique<WordVectorTable>(LoadWordVectors(o.word_vectors));
      config_.word_vectors = word_vectors_.get();
    }
  }

  const ScorerConfig& config() const { return config_; }

 private:
  ScorerConfig config_;
  std::unique_ptr<EmbeddingTable> embeddings_;
  std::unique_ptr<WordVectorTable> word_vectors_;
};

// "builtin" is only defined for embedding_cosine; "auto" uses it there and
// estimates from `pool` otherwise.
CalibrationStats ResolveCalibration(const PipelineOptions& o, const ScorerConfig& scorer,
                                    std::span<const SegmentRef> pool) {
  const bool embedding = scorer.kind == ScorerKind::kEmbeddingCosine;
  if (o.calibration == "builtin") {
    if (!embedding) throw UsageError("--calibration builtin exists only for the embedding scorer");
    return BuiltinEmbeddingCalibration();
  }
  if (o.calibration == "auto") {
    if (embedding) return BuiltinEmbeddingCalibration();
    return EstimateCalibration(scorer, pool, o.calibration_pairs, o.seed);
  }
  CalibrationStats stats = CalibrationFromJson(ReadJsonFile(o.calibration));
  if (stats.scorer != scorer.kind) {
    throw Error(ErrorCode::kInvalidArgument,
                "calibration file '" + o.calibration + "' is for scorer " +
                    std::string(ScorerKindName(stats.scorer)) + ", not " +
                    std::string(ScorerKindName(scorer.kind)));
  }
  return stats;
}

SegmentedDocument LoadSegmented(const fs::path& path, const SegmentationPolicy& policy) {
  return SegmentDocument(LoadDocument(path, path.stem().string()), policy);
}

std::vector<fs::path> CorpusFiles(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "'" + dir.string() + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<SegmentedDocument> LoadCorpus(const fs::path& dir, const SegmentationPolicy& policy) {
  std::vector<SegmentedDocument> docs;
  for (const auto& file : CorpusFiles(dir)) docs.push_back(LoadSegmented(file, policy));
  return docs;
}

void Emit(const Json& value, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << DumpCanonical(value) << '\n';
  } else {
    WriteJsonFile(value, out_path);
  }
}

void EmitBytes(const std::string& bytes, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << bytes;
    return;
  }
  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write '" + out_path + "'");
  file << bytes;
  if (!file) throw Error(ErrorCode::kIo, "failed writing '" + out_path + "'");
}

std::string FormatNumber(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

// JSON-lines manifest; blank lines are skipped.
std::vector<Json> ReadJsonLines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<Json> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kFormat,
                  path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return lines;
}

fs::path Resolve(const fs::path& base_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

bool JsonLabel(const Json& line) {
  const Json& label = line.at("label");
  if (label.is_boolean()) return label.get<bool>();
  return label.get<double>() != 0.0;
}

// ---------------------------------------------------------------------------
// segment / similarity / align

int CmdSegment(const std::string& input, const std::string& id, const SegmentOptions& o,
               const std::string& out_path, std::ostream& out) {
  const SegmentationPolicy policy = MakePolicy(o);
  const fs::path path(input);
  const auto doc = SegmentDocument(LoadDocument(path, id.empty() ? path.stem().string() : id),
                                   policy);
  Emit(ToJson(doc), out_path, out);
  return kExitOk;
}

struct PairSetup {
  SegmentedDocument a;
  SegmentedDocument b;
  CalibrationStats stats;
  GapParams gap;
};

PairSetup SetupPair(const std::string& path_a, const std::string& path_b,
                    const PipelineOptions& o, const Scoring& scoring) {
  const SegmentationPolicy policy = MakePolicy(o.segment);
  const GapParams gap = MakeGap(o);
  PairSetup setup{LoadSegmented(path_a, policy), LoadSegmented(path_b, policy), {}, gap};
  std::vector<SegmentedDocument> both = {setup.a, setup.b};
  const auto pool = SegmentRefs(std::span<const SegmentedDocument>(both));
  setup.stats = ResolveCalibration(o, scoring.config(), pool);
  return setup;
}

int CmdSimilarity(const std::string& path_a, const std::string& path_b, const PipelineOptions& o,
                  const std::string& out_path, std::ostream& out) {
  const Scoring scoring(o);
  const PairSetup setup = SetupPair(path_a, path_b, o, scoring);
  Emit(ToJson(BuildSimilarityMatrix(setup.a, setup.b, scoring.config(), setup.stats, o.th_s)),
       out_path, out);
  return kExitOk;
}

struct AlignOutputOptions {
  std::string out;
  std::string gumbel;
  bool emit_paths = false;
  std::string emit_matrix;
};

int CmdAlign(const std::string& path_a, const std::string& path_b, const PipelineOptions& o,
             const AlignOutputOptions& output, std::ostream& out) {
  const Scoring scoring(o);
  std::optional<GumbelParams> gumbel;
  if (!output.gumbel.empty()) gumbel = GumbelFromJson(ReadJsonFile(output.gumbel));
  const PairSetup setup = SetupPair(path_a, path_b, o, scoring);
  const SimilarityMatrix sim =
      BuildSimilarityMatrix(setup.a, setup.b, scoring.config(), setup.stats, o.th_s);
  const AlignmentResult result =
      AlignMatrix(sim, scoring.config().kind, setup.gap, o.max_alignments, o.min_score);

  Json json = ToJson(result, output.emit_paths);
  if (gumbel) {
    json["max_score_p_value"] = PValue(result.max_score, *gumbel);
    for (std::size_t k = 0; k < result.spans.size(); ++k) {
      json["spans"][k]["p_value"] = PValue(result.spans[k].score, *gumbel);
    }
  }
  if (!output.emit_matrix.empty()) WriteJsonFile(ToJson(sim), output.emit_matrix);
  Emit(json, output.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate / fit-null / pvalue

int CmdCalibrate(const std::string& dir, std::size_t pairs, const PipelineOptions& o,
                 const std::string& out_path, std::ostream& out) {
  const Scoring scoring(o);
  const auto docs = LoadCorpus(dir, MakePolicy(o.segment));
  const auto pool = SegmentRefs(std::span<const SegmentedDocument>(docs));
  Emit(ToJson(EstimateCalibration(scoring.config(), pool, pairs, o.seed)), out_path, out);
  return kExitOk;
}

int CmdFitNull(const std::string& dir, std::size_t pairs, const PipelineOptions& o,
               const std::string& out_path, std::ostream& out, std::ostream& err) {
  const Scoring scoring(o);
  const GapParams gap = MakeGap(o);
  const auto docs = LoadCorpus(dir, MakePolicy(o.segment));
  if (docs.size() < 2) {
    throw Error(ErrorCode::kInsufficientNullSample,
                "'" + dir + "' holds " + std::to_string(docs.size()) +
                    " .txt documents; need at least 2");
  }
  const auto pool = SegmentRefs(std::span<const SegmentedDocument>(docs));
  const AlignConfig config{scoring.config(), ResolveCalibration(o, scoring.config(), pool),
                           o.th_s, gap};
  const NullSample sample = SampleNullScores(docs, config, pairs, o.seed);
  const GumbelParams params = FitGumbel(sample);
  err << "fitted " << sample.scores.size() << " scores (" << sample.excluded_zero_pairs
      << " zero pairs excluded); KS distance " << KolmogorovSmirnov(sample.scores, params)
      << '\n';
  Emit(ToJson(params), out_path, out);
  return kExitOk;
}

int CmdPValue(double score, const std::string& params_path, std::optional<double> m,
              std::optional<double> n, std::ostream& out) {
  if ((m && !(*m > 0.0)) || (n && !(*n > 0.0))) throw UsageError("--m and --n must be positive");
  const GumbelParams params = GumbelFromJson(ReadJsonFile(params_path));
  out << FormatNumber(PValue(score, params, m, n)) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// heatmap / report

int CmdHeatmap(const std::string& input, const std::string& format, const std::string& overlay,
               const std::string& out_path, std::ostream& out) {
  if (format != "pgm" && format != "svg") {
    throw UsageError("unknown heatmap format '" + format + "' (expected pgm or svg)");
  }
  const Json json = ReadJsonFile(input);
  std::optional<SimilarityMatrix> sim;
  std::optional<AlignmentResult> result;
  if (json.contains("raw")) {
    sim = SimilarityMatrixFromJson(json);
  } else if (json.contains("spans")) {
    result = AlignmentResultFromJson(json);
  } else {
    throw Error(ErrorCode::kFormat,
                "'" + input + "' is neither a similarity matrix nor an alignment result");
  }
  if (!overlay.empty()) {
    if (!sim) throw UsageError("--alignment overlays need a similarity-matrix input");
    result = AlignmentResultFromJson(ReadJsonFile(overlay));
    if (result->m != sim->rows() || result->n != sim->cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "alignment and matrix shapes differ");
    }
  }
  std::string bytes;
  if (format == "pgm") {
    bytes = sim ? RenderPgm(*sim) : RenderPgm(*result);
  } else if (sim) {
    bytes = RenderSvg(*sim, result ? &*result : nullptr);
  } else {
    throw UsageError("svg output needs a similarity-matrix input");
  }
  EmitBytes(bytes, out_path, out);
  return kExitOk;
}

int CmdReport(const std::string& alignment, const std::string& path_a, const std::string& path_b,
              const SegmentOptions& o, const std::string& format, const std::string& out_path,
              std::ostream& out) {
  ReportFormat kind;
  if (format == "text") {
    kind = ReportFormat::kText;
  } else if (format == "html") {
    kind = ReportFormat::kHtml;
  } else {
    throw UsageError("unknown report format '" + format + "' (expected text or html)");
  }
  const SegmentationPolicy policy = MakePolicy(o);
  const AlignmentResult result = AlignmentResultFromJson(ReadJsonFile(alignment));
  const auto a = LoadSegmented(path_a, policy);
  const auto b = LoadSegmented(path_b, policy);
  if (a.size() != result.m || b.size() != result.n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "alignment is " + std::to_string(result.m) + "x" + std::to_string(result.n) +
                    " but the documents segment to " + std::to_string(a.size()) + "x" +
                    std::to_string(b.size()) + "; pass the segmentation flags used for align");
  }
  EmitBytes(RenderReport(result, a, b, kind), out_path, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  PipelineOptions pipeline;
  std::string manifest;
  std::string gold;
  std::string out;
  std::string gumbel;
  double max_p_value = 1.0;
  bool one_to_one = false;
};

void RequireManifest(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("manifest '" + path + "' does not exist");
}

int CmdEvalRoc(const EvalOptions& o, std::ostream& out) {
  RequireManifest(o.manifest);
  const auto lines = ReadJsonLines(o.manifest);
  const fs::path base = fs::path(o.manifest).parent_path();
  std::vector<LabeledScore> scores(lines.size());
  const bool precomputed =
      std::all_of(lines.begin(), lines.end(), [](const Json& l) { return l.contains("score"); });

  if (precomputed) {
    for (std::size_t k = 0; k < lines.size(); ++k) {
      scores[k] = {lines[k].at("score").get<double>(), JsonLabel(lines[k])};
    }
  } else {
    const Scoring scoring(o.pipeline);
    const SegmentationPolicy policy = MakePolicy(o.pipeline.segment);
    const GapParams gap = MakeGap(o.pipeline);
    std::map<fs::path, std::size_t> index;
    std::vector<SegmentedDocument> docs;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    auto doc_index = [&](const std::string& name) {
      const fs::path path = Resolve(base, name);
      auto [it, inserted] = index.emplace(path, docs.size());
      if (inserted) docs.push_back(LoadSegmented(path, policy));
      return it->second;
    };
    for (const auto& line : lines) {
      const std::size_t a = doc_index(JsonField<std::string>(line, "doc_a"));
      const std::size_t b = doc_index(JsonField<std::string>(line, "doc_b"));
      pairs.emplace_back(a, b);
    }
    const auto pool = SegmentRefs(std::span<const SegmentedDocument>(docs));
    const CalibrationStats stats = ResolveCalibration(o.pipeline, scoring.config(), pool);
    detail::ParallelFor(pairs.size(), [&](std::size_t k) {
      const SimilarityMatrix sim = BuildSimilarityMatrix(
          docs[pairs[k].first], docs[pairs[k].second], scoring.config(), stats, o.pipeline.th_s);
      scores[k] = {SmithWaterman(sim, gap).MaxScore(), JsonLabel(lines[k])};
    });
  }
  Json values = Json::array();
  for (const auto& s : scores) values.push_back(s.value);
  Emit({{"auc", RocAuc(scores)}, {"pairs", scores.size()}, {"scores", values}}, o.out, out);
  return kExitOk;
}

int CmdEvalRank(const EvalOptions& o, std::ostream& out) {
  RequireManifest(o.manifest);
  const auto lines = ReadJsonLines(o.manifest);
  const fs::path base = fs::path(o.manifest).parent_path();
  std::vector<RankingTrial> trials(lines.size());
  std::unique_ptr<Scoring> scoring;
  std::optional<GapParams> gap;

  for (std::size_t t = 0; t < lines.size(); ++t) {
    const Json& line = lines[t];
    trials[t].true_index = JsonField<std::size_t>(line, "true_index");
    if (line.contains("scores")) {
      trials[t].candidate_scores = JsonField<std::vector<double>>(line, "scores");
      continue;
    }
    if (!scoring) {
      scoring = std::make_unique<Scoring>(o.pipeline);
      gap = MakeGap(o.pipeline);
    }
    // The summary is split into sentences; each candidate book into as many
    // equal chunks as the summary has sentences.
    const auto summary = LoadSegmented(Resolve(base, JsonField<std::string>(line, "summary")),
                                       SegmentationPolicy::Sentence());
    std::vector<SegmentedDocument> docs = {summary};
    for (const auto& name : JsonField<std::vector<std::string>>(line, "candidates")) {
      docs.push_back(
          LoadSegmented(Resolve(base, name), SegmentationPolicy::EqualChunks(summary.size())));
    }
    const auto pool = SegmentRefs(std::span<const SegmentedDocument>(docs));
    const CalibrationStats stats = ResolveCalibration(o.pipeline, scoring->config(), pool);
    auto& scores = trials[t].candidate_scores;
    scores.resize(docs.size() - 1);
    detail::ParallelFor(scores.size(), [&](std::size_t c) {
      const SimilarityMatrix sim =
          BuildSimilarityMatrix(summary, docs[c + 1], scoring->config(), stats, o.pipeline.th_s);
      scores[c] = SmithWaterman(sim, *gap).MaxScore();
    });
  }
  const RankingMetrics metrics = ComputeRankingMetrics(trials);
  Json ranks = Json::array();
  for (const auto& trial : trials) ranks.push_back(TrueCandidateRank(trial));
  Emit({{"mrr", metrics.mrr},
        {"mean_rank", metrics.mean_rank},
        {"worst_rank", metrics.worst_rank},
        {"fidelity", metrics.fidelity},
        {"trials", trials.size()},
        {"ranks", ranks}},
       o.out, out);
  return kExitOk;
}

std::vector<SpanPair> ReadSpanPairs(const fs::path& path) {
  std::vector<SpanPair> pairs;
  for (const auto& line : ReadJsonLines(path)) {
    pairs.push_back({{JsonField<std::string>(line, "src_doc"),
                      JsonField<std::size_t>(line, "src_start"),
                      JsonField<std::size_t>(line, "src_end")},
                     {JsonField<std::string>(line, "tgt_doc"),
                      JsonField<std::size_t>(line, "tgt_start"),
                      JsonField<std::size_t>(line, "tgt_end")}});
  }
  return pairs;
}

std::optional<GumbelParams> LoadOptionalGumbel(const EvalOptions& o) {
  if (o.gumbel.empty()) {
    if (o.max_p_value < 1.0) throw UsageError("--max-pvalue needs --gumbel");
    return std::nullopt;
  }
  return GumbelFromJson(ReadJsonFile(o.gumbel));
}

// Predicted spans come either from a "predicted" span file or from aligning
// the "src" and "tgt" documents of each manifest line.
int CmdEvalPan(const EvalOptions& o, std::ostream& out) {
  RequireManifest(o.manifest);
  if (!fs::is_regular_file(o.gold)) throw UsageError("gold file '" + o.gold + "' does not exist");
  const auto lines = ReadJsonLines(o.manifest);
  const fs::path base = fs::path(o.manifest).parent_path();
  const auto gold = ReadSpanPairs(o.gold);
  const auto gumbel = LoadOptionalGumbel(o);
  std::vector<SpanPair> predicted;
  std::unique_ptr<Scoring> scoring;

  for (const auto& line : lines) {
    if (line.contains("predicted")) {
      const auto spans = ReadSpanPairs(Resolve(base, JsonField<std::string>(line, "predicted")));
      predicted.insert(predicted.end(), spans.begin(), spans.end());
      continue;
    }
    if (!scoring) scoring = std::make_unique<Scoring>(o.pipeline);
    const PairSetup setup = SetupPair(Resolve(base, JsonField<std::string>(line, "src")),
                                      Resolve(base, JsonField<std::string>(line, "tgt")),
                                      o.pipeline, *scoring);
    const AlignmentResult result =
        AlignPair(setup.a, setup.b, scoring->config(), setup.stats, o.pipeline.th_s, setup.gap,
                  o.pipeline.max_alignments, o.pipeline.min_score);
    for (const auto& span : result.spans) {
      if (gumbel && PValue(span.score, *gumbel) > o.max_p_value) continue;
      predicted.push_back({{setup.a.doc_id, setup.a.segments[span.x_start].char_span.start,
                            setup.a.segments[span.x_end].char_span.end},
                           {setup.b.doc_id, setup.b.segments[span.y_start].char_span.start,
                            setup.b.segments[span.y_end].char_span.end}});
    }
  }
  const PRF prf = SpanPRF(predicted, gold);
  Emit({{"precision", prf.precision},
        {"recall", prf.recall},
        {"f1", prf.f1},
        {"predicted_spans", predicted.size()},
        {"gold_spans", gold.size()}},
       o.out, out);
  return kExitOk;
}

SentencePairSet ReadSentencePairs(const fs::path& path) {
  SentencePairSet pairs;
  for (const auto& pair : JsonField<Json>(ReadJsonFile(path), "pairs")) {
    const auto values = pair.get<std::vector<long>>();
    if (values.size() != 2) throw Error(ErrorCode::kFormat, "sentence pairs must be [i, j]");
    pairs.emplace(values[0], values[1]);
  }
  return pairs;
}

// Sentence-level fable alignment, many-to-many unless --one-to-one.
int CmdEvalFables(const EvalOptions& o, std::ostream& out) {
  RequireManifest(o.manifest);
  const auto lines = ReadJsonLines(o.manifest);
  const fs::path base = fs::path(o.manifest).parent_path();
  const auto gumbel = LoadOptionalGumbel(o);
  PipelineOptions pipeline = o.pipeline;
  pipeline.segment = SegmentOptions{"sentence", o.pipeline.segment.min_words, 0, 0};
  pipeline.many_to_many = !o.one_to_one;
  std::unique_ptr<Scoring> scoring;
  PairCounts total;

  for (const auto& line : lines) {
    const auto gold = ReadSentencePairs(Resolve(base, JsonField<std::string>(line, "gold")));
    SentencePairSet predicted;
    if (line.contains("predicted")) {
      predicted = ReadSentencePairs(Resolve(base, JsonField<std::string>(line, "predicted")));
    } else {
      if (!scoring) scoring = std::make_unique<Scoring>(pipeline);
      const PairSetup setup = SetupPair(Resolve(base, JsonField<std::string>(line, "fable_a")),
                                        Resolve(base, JsonField<std::string>(line, "fable_b")),
                                        pipeline, *scoring);
      AlignmentResult result =
          AlignPair(setup.a, setup.b, scoring->config(), setup.stats, pipeline.th_s, setup.gap,
                    pipeline.max_alignments, pipeline.min_score);
      if (gumbel) {
        std::erase_if(result.spans, [&](const AlignmentSpan& span) {
          return PValue(span.score, *gumbel) > o.max_p_value;
        });
      }
      predicted = AlignedSentencePairs(result);
    }
    const PairCounts counts = CountSentencePairs(predicted, gold);
    total.hits += counts.hits;
    total.predicted += counts.predicted;
    total.gold += counts.gold;
  }
  const PRF prf = MakePRF(static_cast<double>(total.hits), static_cast<double>(total.predicted),
                          static_cast<double>(total.gold));
  Emit({{"precision", prf.precision},
        {"recall", prf.recall},
        {"f1", prf.f1},
        {"fables", lines.size()},
        {"hits", total.hits},
        {"predicted_pairs", total.predicted},
        {"gold_pairs", total.gold}},
       o.out, out);
  return kExitOk;
}

std::string HtmlEscape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string JoinSegments(const SegmentedDocument& doc, std::size_t first, std::size_t last,
                         std::string_view separator) {
  std::string text;
  for (std::size_t k = first; k <= last; ++k) {
    if (k > first) text += separator;
    text += doc.segments[k].text;
  }
  return text;
}

}  // namespace

// ---------------------------------------------------------------------------
// Renderers

std::string RenderPgm(const SimilarityMatrix& sim) {
  std::string out = "P5\n" + std::to_string(sim.cols()) + " " + std::to_string(sim.rows()) +
                    "\n255\n";
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    for (std::size_t j = 0; j < sim.cols(); ++j) {
      const double level = std::round(255.0 * (sim.calibrated(i, j) + 1.0) / 2.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0.0, 255.0))));
    }
  }
  return out;
}

std::string RenderPgm(const AlignmentResult& result) {
  std::vector<unsigned char> pixels(result.m * result.n, 0);
  for (const auto& span : result.spans) {
    if (!span.path.empty()) {
      for (const auto& step : span.path) {
        if (IsMatchMove(step.move)) pixels[step.i * result.n + step.j] = 255;
      }
      continue;
    }
    for (std::size_t i = span.x_start; i <= span.x_end; ++i) {
      for (std::size_t j = span.y_start; j <= span.y_end; ++j) pixels[i * result.n + j] = 255;
    }
  }
  std::string out = "P5\n" + std::to_string(result.n) + " " + std::to_string(result.m) +
                    "\n255\n";
  out.append(pixels.begin(), pixels.end());
  return out;
}

std::string RenderSvg(const SimilarityMatrix& sim, const AlignmentResult* overlay) {
  constexpr int kCell = 8;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << sim.cols() * kCell
      << "\" height=\"" << sim.rows() * kCell << "\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    for (std::size_t j = 0; j < sim.cols(); ++j) {
      const int level =
          static_cast<int>(std::round(255.0 * (sim.calibrated(i, j) + 1.0) / 2.0));
      svg << "<rect x=\"" << j * kCell << "\" y=\"" << i * kCell << "\" width=\"" << kCell
          << "\" height=\"" << kCell << "\" fill=\"rgb(" << level << ',' << level << ','
          << level << ")\"/>\n";
    }
  }
  if (overlay != nullptr) {
    for (std::size_t k = 0; k < overlay->spans.size(); ++k) {
      const auto& span = overlay->spans[k];
      svg << "<rect class=\"span-" << k << "\" x=\"" << span.y_start * kCell << "\" y=\""
          << span.x_start * kCell << "\" width=\"" << (span.y_end - span.y_start + 1) * kCell
          << "\" height=\"" << (span.x_end - span.x_start + 1) * kCell
          << "\" fill=\"none\" stroke=\"red\" stroke-width=\"1\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string RenderReport(const AlignmentResult& result, const SegmentedDocument& a,
                         const SegmentedDocument& b, ReportFormat format) {
  std::ostringstream report;
  const std::string title = a.doc_id + " vs " + b.doc_id;
  if (format == ReportFormat::kText) {
    report << "Alignment report: " << title << "\n";
    report << "scorer " << ScorerKindName(result.scorer) << ", max score "
           << FormatNumber(result.max_score) << ", " << result.spans.size() << " span(s)\n";
    if (result.spans.empty()) report << "\nno significant alignments\n";
    for (std::size_t k = 0; k < result.spans.size(); ++k) {
      const auto& s = result.spans[k];
      report << "\n[" << k + 1 << "] score " << FormatNumber(s.score) << "  X " << s.x_start
             << ".." << s.x_end << "  Y " << s.y_start << ".." << s.y_end << "\n";
      report << "  X: " << JoinSegments(a, s.x_start, s.x_end, " | ") << "\n";
      report << "  Y: " << JoinSegments(b, s.y_start, s.y_end, " | ") << "\n";
    }
    return report.str();
  }

  report << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>"
         << HtmlEscape(title) << "</title>\n<style>\n"
         << "table{border-collapse:collapse;width:100%}td{vertical-align:top;padding:6px;"
            "border:1px solid #ccc;width:50%}\n"
         << ".span-0{background:#ffe08a}.span-1{background:#b5e3ff}.span-2{background:#c8f0c0}"
            ".span-3{background:#f6c6e8}.span-4{background:#e0d4ff}\n"
         << "</style></head><body>\n<h1>" << HtmlEscape(title) << "</h1>\n";
  report << "<p>scorer " << ScorerKindName(result.scorer) << ", max score "
         << FormatNumber(result.max_score) << "</p>\n";
  if (result.spans.empty()) {
    report << "<p>no significant alignments</p>\n";
  } else {
    report << "<table>\n<tr><th>" << HtmlEscape(a.doc_id) << "</th><th>"
           << HtmlEscape(b.doc_id) << "</th></tr>\n";
    for (std::size_t k = 0; k < result.spans.size(); ++k) {
      const auto& s = result.spans[k];
      const std::string cls = "span-" + std::to_string(k % 5);
      report << "<tr class=\"" << cls << "\" data-rank=\"" << k + 1 << "\" data-score=\""
             << FormatNumber(s.score) << "\"><td>[" << s.x_start << ".." << s.x_end << "] "
             << HtmlEscape(JoinSegments(a, s.x_start, s.x_end, " ")) << "</td><td>["
             << s.y_start << ".." << s.y_end << "] "
             << HtmlEscape(JoinSegments(b, s.y_start, s.y_end, " ")) << "</td></tr>\n";
    }
    report << "</table>\n";
  }
  report << "</body></html>\n";
  return report.str();
}

// ---------------------------------------------------------------------------

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Local alignment of narrative texts", "gnat"};
  app.require_subcommand(1);

  std::string input, second, third, out_path, id;
  SegmentOptions segment_options;
  PipelineOptions pipeline;
  AlignOutputOptions align_output;
  std::size_t pairs = 0;
  double score = 0.0;
  std::optional<double> len_m, len_n;
  std::string heatmap_format, report_format, overlay;
  EvalOptions eval;

  auto* segment = app.add_subcommand("segment", "split a text file into segments");
  segment->add_option("input", input, "UTF-8 text file")->required();
  segment->add_option("--id", id, "document id (default: file stem)");
  segment->add_option("--out", out_path, "output JSON (default: stdout)");
  AddSegmentOptions(segment, segment_options);

  auto* similarity = app.add_subcommand("similarity", "write the similarity matrix of two texts");
  similarity->add_option("a", input)->required();
  similarity->add_option("b", second)->required();
  similarity->add_option("--out", out_path);
  AddPipelineOptions(similarity, pipeline);

  auto* align = app.add_subcommand("align", "align two texts");
  align->add_option("a", input)->required();
  align->add_option("b", second)->required();
  align->add_option("--out", align_output.out, "output JSON (default: stdout)");
  align->add_option("--gumbel", align_output.gumbel, "GumbelParams JSON; adds p-values");
  align->add_flag("--emit-paths", align_output.emit_paths, "include backtrace paths");
  align->add_option("--emit-matrix", align_output.emit_matrix, "also write the matrix JSON");
  AddPipelineOptions(align, pipeline);

  auto* calibrate = app.add_subcommand("calibrate", "estimate background scorer statistics");
  calibrate->add_option("corpus", input, "directory of .txt documents")->required();
  calibrate->add_option("--pairs", pairs, "segment pairs to sample")->default_val(100000);
  calibrate->add_option("--out", out_path);
  AddPipelineOptions(calibrate, pipeline);

  auto* fit_null = app.add_subcommand("fit-null", "fit the Gumbel null over unrelated pairs");
  fit_null->add_option("corpus", input, "directory of unrelated .txt documents")->required();
  fit_null->add_option("--pairs", pairs, "document pairs to align")->default_val(1000);
  fit_null->add_option("--out", out_path);
  AddPipelineOptions(fit_null, pipeline);

  auto* pvalue = app.add_subcommand("pvalue", "p-value of an alignment score");
  pvalue->add_option("score", score)->required();
  pvalue->add_option("params", input, "GumbelParams JSON")->required();
  pvalue->add_option("--m", len_m, "X length (default: reference length)");
  pvalue->add_option("--n", len_n, "Y length (default: reference length)");

  auto* heatmap = app.add_subcommand("heatmap", "render a similarity matrix or alignment");
  heatmap->add_option("input", input, "SimilarityMatrix or AlignmentResult JSON")->required();
  heatmap->add_option("--format", heatmap_format, "pgm | svg")->default_val("pgm");
  heatmap->add_option("--alignment", overlay, "AlignmentResult to outline (svg)");
  heatmap->add_option("--out", out_path);

  auto* report = app.add_subcommand("report", "side-by-side excerpts of aligned spans");
  report->add_option("alignment", input, "AlignmentResult JSON")->required();
  report->add_option("a", second, "first text")->required();
  report->add_option("b", third, "second text")->required();
  report->add_option("--format", report_format, "text | html")->default_val("text");
  report->add_option("--out", out_path);
  AddSegmentOptions(report, segment_options);

  auto* eval_cmd = app.add_subcommand("eval", "evaluation protocols");
  eval_cmd->require_subcommand(1);
  auto add_eval = [&](const char* name, const char* help) {
    auto* sub = eval_cmd->add_subcommand(name, help);
    sub->add_option("manifest", eval.manifest, "JSON-lines manifest")->required();
    sub->add_option("--out", eval.out);
    AddPipelineOptions(sub, eval.pipeline);
    return sub;
  };
  auto* eval_roc = add_eval("roc", "ROC AUC of related vs unrelated pairs");
  auto* eval_rank = add_eval("rank", "rank candidate books for each summary");
  auto* eval_pan = add_eval("pan", "character-level span P/R/F1");
  eval_pan->add_option("--gold", eval.gold, "gold span pairs (JSON lines)")->required();
  auto* eval_fables = add_eval("fables", "sentence-pair P/R/F1 on fable pairs");
  eval_fables->add_flag("--one-to-one", eval.one_to_one, "disable many-to-many matching");
  for (auto* sub : {eval_pan, eval_fables}) {
    sub->add_option("--gumbel", eval.gumbel, "GumbelParams JSON for --max-pvalue");
    sub->add_option("--max-pvalue", eval.max_p_value, "drop spans with larger p-values");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*segment) return CmdSegment(input, id, segment_options, out_path, out);
    if (*similarity) return CmdSimilarity(input, second, pipeline, out_path, out);
    if (*align) return CmdAlign(input, second, pipeline, align_output, out);
    if (*calibrate) return CmdCalibrate(input, pairs, pipeline, out_path, out);
    if (*fit_null) return CmdFitNull(input, pairs, pipeline, out_path, out, err);
    if (*pvalue) return CmdPValue(score, input, len_m, len_n, out);
    if (*heatmap) return CmdHeatmap(input, heatmap_format, overlay, out_path, out);
    if (*report) {
      return CmdReport(input, second, third, segment_options, report_format, out_path, out);
    }
    if (*eval_roc) return CmdEvalRoc(eval, out);
    if (*eval_rank) return CmdEvalRank(eval, out);
    if (*eval_pan) return CmdEvalPan(eval, out);
    if (*eval_fables) return CmdEvalFables(eval, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace gnat::cli
