#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnat/align.hpp"
#include "gnat/corpus.hpp"
#include "gnat/simscore.hpp"

namespace gnat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Bad flags or flag combinations; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs one invocation. args excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Binary greymap (P5): width n, height m, row i = X segment i,
// pixel = round(255 * (calibrated + 1) / 2).
std::string RenderPgm(const SimilarityMatrix& sim);

// Pixel map of an alignment without its matrix: cells on span paths (or
// inside span rectangles when paths were not emitted) are 255, others 0.
std::string RenderPgm(const AlignmentResult& result);

std::string RenderSvg(const SimilarityMatrix& sim, const AlignmentResult* overlay);

enum class ReportFormat { kText, kHtml };

std::string RenderReport(const AlignmentResult& result, const SegmentedDocument& a,
                         const SegmentedDocument& b, ReportFormat format);

}  // namespace gnat::cli
