#pragma once

// Document ingestion and segmentation. A document is split into an ordered
// sequence of segments (sentences, paragraphs or word chunks); segments are
// the units that the alignment engine matches against each other.
//
// All offsets are byte offsets into the UTF-8 document text, end exclusive.
// A "word" for segmentation purposes is a maximal run of non-whitespace
// bytes; tokens (used by the scorers) come from Tokenize().

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gnat/detail/utf8.hpp"
#include "gnat/error.hpp"

namespace gnat {

struct RawDocument {
  std::string id;
  std::string text;
  std::map<std::string, std::string> metadata;
};

enum class SegmentUnit { kSentence, kParagraph, kFixedChunk, kEqualChunks };

struct SegmentationPolicy {
  SegmentUnit unit = SegmentUnit::kParagraph;
  std::size_t words_per_chunk = 0;  // kFixedChunk only
  std::size_t chunk_count = 0;      // kEqualChunks only
  // Sentence/paragraph segments with fewer words are merged forward (the
  // last one backward). Chunk modes control sizes directly and ignore it.
  std::size_t min_words = 0;

  static SegmentationPolicy Sentence(std::size_t min_words = 0) {
    return {SegmentUnit::kSentence, 0, 0, min_words};
  }
  static SegmentationPolicy Paragraph(std::size_t min_words = 5) {
    return {SegmentUnit::kParagraph, 0, 0, min_words};
  }
  static SegmentationPolicy FixedChunk(std::size_t words_per_chunk) {
    return {SegmentUnit::kFixedChunk, words_per_chunk, 0, 0};
  }
  static SegmentationPolicy EqualChunks(std::size_t count) {
    return {SegmentUnit::kEqualChunks, 0, count, 0};
  }

  void Validate() const {
    if (unit == SegmentUnit::kFixedChunk && words_per_chunk < 1) {
      throw Error(ErrorCode::kInvalidArgument, "words_per_chunk must be >= 1");
    }
    if (unit == SegmentUnit::kEqualChunks && chunk_count < 1) {
      throw Error(ErrorCode::kInvalidArgument, "chunk count must be >= 1");
    }
  }

  friend bool operator==(const SegmentationPolicy&,
                         const SegmentationPolicy&) = default;
};

inline std::string_view SegmentUnitName(SegmentUnit unit) {
  switch (unit) {
    case SegmentUnit::kSentence: return "sentence";
    case SegmentUnit::kParagraph: return "paragraph";
    case SegmentUnit::kFixedChunk: return "fixed_chunk";
    case SegmentUnit::kEqualChunks: return "equal_chunks";
  }
  return "paragraph";
}

inline SegmentUnit ParseSegmentUnit(std::string_view name) {
  if (name == "sentence") return SegmentUnit::kSentence;
  if (name == "paragraph") return SegmentUnit::kParagraph;
  if (name == "fixed_chunk") return SegmentUnit::kFixedChunk;
  if (name == "equal_chunks") return SegmentUnit::kEqualChunks;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown segmentation unit '" + std::string(name) + "'");
}

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Segment {
  std::size_t index = 0;
  std::string text;
  std::vector<std::string> tokens;
  CharSpan char_span;
};

struct SegmentedDocument {
  std::string doc_id;
  SegmentationPolicy policy;
  std::vector<Segment> segments;

  std::size_t size() const { return segments.size(); }
};

// Lowercased runs of word characters; everything else separates tokens.
inline std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::uint32_t cp = detail::DecodeUtf8(text, pos);
    if (detail::IsWordCodePoint(cp)) {
      detail::AppendUtf8(current, detail::ToLowerCodePoint(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace detail {

inline bool IsBlank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), IsAsciiSpace);
}

inline std::size_t CountWords(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = IsAsciiSpace(c);
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

inline std::vector<CharSpan> WordSpans(std::string_view text) {
  std::vector<CharSpan> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsAsciiSpace(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !IsAsciiSpace(text[i])) ++i;
    words.push_back({start, i});
  }
  return words;
}

// Shrinks [start, end) to exclude leading and trailing whitespace.
inline CharSpan TrimSpan(std::string_view text, std::size_t start,
                         std::size_t end) {
  while (start < end && IsAsciiSpace(text[start])) ++start;
  while (end > start && IsAsciiSpace(text[end - 1])) --end;
  return {start, end};
}

inline std::vector<CharSpan> ParagraphSpans(std::string_view text) {
  std::vector<CharSpan> spans;
  std::size_t para_start = std::string_view::npos;
  std::size_t para_end = 0;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const std::string_view line = text.substr(line_start, line_end - line_start);
    if (IsBlank(line)) {
      if (para_start != std::string_view::npos) {
        spans.push_back(TrimSpan(text, para_start, para_end));
        para_start = std::string_view::npos;
      }
    } else {
      if (para_start == std::string_view::npos) para_start = line_start;
      para_end = line_end;
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }
  if (para_start != std::string_view::npos) {
    spans.push_back(TrimSpan(text, para_start, para_end));
  }
  return spans;
}

// Byte length of a closing quote/bracket at pos, or 0.
inline std::size_t ClosingMarkLength(std::string_view text, std::size_t pos) {
  const char c = text[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '_') return 1;
  // U+2019 right single quote, U+201D right double quote.
  if (text.substr(pos, 3) == "\xE2\x80\x99" ||
      text.substr(pos, 3) == "\xE2\x80\x9D") {
    return 3;
  }
  return 0;
}

inline std::size_t OpeningMarkLength(std::string_view text, std::size_t pos) {
  const char c = text[pos];
  if (c == '"' || c == '\'' || c == '(' || c == '[' || c == '_') return 1;
  // U+2018 left single quote, U+201C left double quote.
  if (text.substr(pos, 3) == "\xE2\x80\x98" ||
      text.substr(pos, 3) == "\xE2\x80\x9C") {
    return 3;
  }
  return 0;
}

inline constexpr std::array<std::string_view, 8> kAbbreviations = {
    "mr", "mrs", "dr", "st", "etc", "vs", "e.g", "i.e"};

// True when the word ending right before the period at `period` is a known
// abbreviation.
inline bool EndsWithAbbreviation(std::string_view text, std::size_t period) {
  std::size_t start = period;
  while (start > 0 && !IsAsciiSpace(text[start - 1])) --start;
  std::string word(text.substr(start, period - start));
  while (!word.empty() && OpeningMarkLength(word, 0) > 0) {
    word.erase(0, OpeningMarkLength(word, 0));
  }
  for (char& c : word) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) !=
         kAbbreviations.end();
}

inline std::vector<CharSpan> SentenceSpansInParagraph(std::string_view text) {
  std::vector<CharSpan> spans;
  std::size_t sentence_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    const std::size_t first_terminator = i;
    while (i < text.size() && (text[i] == '.' || text[i] == '!' || text[i] == '?')) {
      ++i;
    }
    const bool single_period = text[first_terminator] == '.' && i == first_terminator + 1;
    std::size_t end = i;
    while (end < text.size()) {
      const std::size_t mark = ClosingMarkLength(text, end);
      if (mark == 0) break;
      end += mark;
    }
    bool boundary = false;
    if (end == text.size()) {
      boundary = true;
    } else if (IsAsciiSpace(text[end])) {
      std::size_t next = end;
      while (next < text.size() && IsAsciiSpace(text[next])) ++next;
      while (next < text.size()) {
        const std::size_t mark = OpeningMarkLength(text, next);
        if (mark == 0) break;
        next += mark;
      }
      if (next == text.size()) {
        boundary = true;
      } else {
        std::size_t probe = next;
        boundary = IsUpperCodePoint(DecodeUtf8(text, probe));
      }
    }
    if (boundary && single_period && EndsWithAbbreviation(text, first_terminator)) {
      boundary = false;
    }
    if (boundary) {
      const CharSpan span = TrimSpan(text, sentence_start, end);
      if (span.start < span.end) spans.push_back(span);
      sentence_start = end;
    }
    i = end;
  }
  const CharSpan tail = TrimSpan(text, sentence_start, text.size());
  if (tail.start < tail.end) spans.push_back(tail);
  return spans;
}

// Sentences never cross a blank line, so headings and titles without a
// final period stay separate.
inline std::vector<CharSpan> SentenceSpans(std::string_view text) {
  std::vector<CharSpan> spans;
  for (const CharSpan& para : ParagraphSpans(text)) {
    const auto inner =
        SentenceSpansInParagraph(text.substr(para.start, para.end - para.start));
    for (const CharSpan& s : inner) {
      spans.push_back({para.start + s.start, para.start + s.end});
    }
  }
  return spans;
}

// Merges spans with fewer than min_words words into the following span;
// a short final span merges into its predecessor.
inline std::vector<CharSpan> MergeShortSpans(std::string_view text,
                                             const std::vector<CharSpan>& spans,
                                             std::size_t min_words) {
  if (min_words == 0) return spans;
  std::vector<CharSpan> merged;
  bool pending = false;
  CharSpan current;
  for (const CharSpan& span : spans) {
    if (pending) {
      current.end = span.end;
    } else {
      current = span;
    }
    pending = CountWords(text.substr(current.start, current.end - current.start)) <
              min_words;
    if (!pending) merged.push_back(current);
  }
  if (pending) {
    if (merged.empty()) {
      merged.push_back(current);
    } else {
      merged.back().end = current.end;
    }
  }
  return merged;
}

inline std::vector<CharSpan> ChunkSpans(const std::vector<CharSpan>& words,
                                        const std::vector<std::size_t>& sizes) {
  std::vector<CharSpan> spans;
  std::size_t w = 0;
  for (std::size_t size : sizes) {
    spans.push_back({words[w].start, words[w + size - 1].end});
    w += size;
  }
  return spans;
}

}  // namespace detail

inline RawDocument MakeDocument(std::string id, std::string text) {
  if (detail::IsBlank(text)) {
    throw Error(ErrorCode::kEmptyDocument, "document '" + id + "' is empty");
  }
  return RawDocument{std::move(id), std::move(text), {}};
}

// Reads a UTF-8 text file. Strips a leading byte-order mark and converts
// CRLF line endings to LF.
inline RawDocument LoadDocument(const std::filesystem::path& path,
                                std::string id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error(ErrorCode::kIo, "failed reading '" + path.string() + "'");
  }
  if (const auto bad = detail::FindInvalidUtf8(bytes)) {
    throw Error(ErrorCode::kDecode, "'" + path.string() +
                                        "' is not valid UTF-8 at byte offset " +
                                        std::to_string(*bad));
  }
  std::string_view view = bytes;
  if (view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
  std::string text;
  text.reserve(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view[i] == '\r' && i + 1 < view.size() && view[i + 1] == '\n') continue;
    text.push_back(view[i]);
  }
  if (detail::IsBlank(text)) {
    throw Error(ErrorCode::kEmptyDocument, "'" + path.string() + "' is empty");
  }
  RawDocument doc{std::move(id), std::move(text), {}};
  doc.metadata["source_path"] = path.string();
  return doc;
}

inline SegmentedDocument SegmentDocument(const RawDocument& doc,
                                         const SegmentationPolicy& policy) {
  policy.Validate();
  const std::string_view text = doc.text;
  if (detail::IsBlank(text)) {
    throw Error(ErrorCode::kEmptyDocument, "document '" + doc.id + "' is empty");
  }
  std::vector<CharSpan> spans;
  switch (policy.unit) {
    case SegmentUnit::kParagraph:
      spans = detail::MergeShortSpans(text, detail::ParagraphSpans(text),
                                      policy.min_words);
      break;
    case SegmentUnit::kSentence:
      spans = detail::MergeShortSpans(text, detail::SentenceSpans(text),
                                      policy.min_words);
      break;
    case SegmentUnit::kFixedChunk: {
      const auto words = detail::WordSpans(text);
      std::vector<std::size_t> sizes;
      for (std::size_t w = 0; w < words.size(); w += policy.words_per_chunk) {
        sizes.push_back(std::min(policy.words_per_chunk, words.size() - w));
      }
      spans = detail::ChunkSpans(words, sizes);
      break;
    }
    case SegmentUnit::kEqualChunks: {
      const auto words = detail::WordSpans(text);
      const std::size_t m = policy.chunk_count;
      if (m > words.size()) {
        throw Error(ErrorCode::kInsufficientText,
                    "document '" + doc.id + "' has " +
                        std::to_string(words.size()) + " words, cannot form " +
                        std::to_string(m) + " chunks");
      }
      // The first (W mod m) chunks take one extra word.
      std::vector<std::size_t> sizes(m, words.size() / m);
      for (std::size_t k = 0; k < words.size() % m; ++k) ++sizes[k];
      spans = detail::ChunkSpans(words, sizes);
      break;
    }
  }

  SegmentedDocument out{doc.id, policy, {}};
  out.segments.reserve(spans.size());
  for (const CharSpan& span : spans) {
    Segment seg;
    seg.index = out.segments.size();
    seg.text = std::string(text.substr(span.start, span.end - span.start));
    seg.tokens = Tokenize(seg.text);
    seg.char_span = span;
    out.segments.push_back(std::move(seg));
  }
  return out;
}

}  // namespace gnat
