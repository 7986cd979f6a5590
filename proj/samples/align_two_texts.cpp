// Aligns two short passages sentence by sentence and prints the spans.
//
//   ./align_two_texts

#include <cstdio>
#include <string>

#include "gnat/gnat.hpp"

int main() {
  const std::string first =
      "A boy put his hand into a pitcher full of filberts. He grasped as many as he could "
      "possibly hold. When he tried to pull out his hand, he was prevented by the narrow neck "
      "of the pitcher. Unwilling to lose his filberts, he burst into tears.";
  const std::string second =
      "The miller sang at dawn. A child pushed his hand into a jar of nuts and grasped as many "
      "as he could hold. He tried to pull out his hand but the narrow neck of the jar held it "
      "fast. Unwilling to lose the nuts, he burst into tears. The river ran on.";

  const auto policy = gnat::SegmentationPolicy::Sentence();
  const auto a = gnat::SegmentDocument(gnat::MakeDocument("first", first), policy);
  const auto b = gnat::SegmentDocument(gnat::MakeDocument("second", second), policy);

  const gnat::ScorerConfig scorer{gnat::ScorerKind::kJaccard};
  std::vector<gnat::SegmentedDocument> both = {a, b};
  const auto pool = gnat::SegmentRefs(std::span<const gnat::SegmentedDocument>(both));
  const auto stats = gnat::EstimateCalibration(scorer, pool, 2000, /*seed=*/1);

  // Sentence pairs are short, so the threshold is lowered from the default.
  const auto result = gnat::AlignPair(a, b, scorer, stats, /*th_s=*/1.0, gnat::GapParams{});
  std::printf("background mu=%.4f sigma=%.4f, max score %.4f\n", stats.mu, stats.sigma,
              result.max_score);
  for (const auto& span : result.spans) {
    std::printf("score %.4f  X[%zu..%zu] <-> Y[%zu..%zu]\n", span.score, span.x_start,
                span.x_end, span.y_start, span.y_end);
    for (std::size_t i = span.x_start; i <= span.x_end; ++i) {
      std::printf("  X: %s\n", a.segments[i].text.c_str());
    }
    for (std::size_t j = span.y_start; j <= span.y_end; ++j) {
      std::printf("  Y: %s\n", b.segments[j].text.c_str());
    }
  }
  return 0;
}
