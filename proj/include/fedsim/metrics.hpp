#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/core.hpp"

namespace fedsim {

enum class MetricKind { anls, accuracy };

// Table-driven metric assignment: WTQ and DocVQA score with ANLS, TabFact
// with exact-match accuracy. Unknown datasets default to ANLS.
MetricKind metric_for_dataset(std::string_view dataset);

const char* to_string(MetricKind kind);

struct EvalExample {
  std::string dataset;
  std::string prediction;
  std::vector<std::string> golds;  // non-empty
  MetricKind kind = MetricKind::anls;
};

// Decodes UTF-8 into Unicode scalar values; bytes that do not form a valid
// sequence are taken as single code points so malformed input still scores.
std::vector<std::uint32_t> utf8_codepoints(std::string_view text);

// Lowercases ASCII letters and trims surrounding whitespace.
std::string normalize_answer(std::string_view text);

// Unit-cost edit distance over Unicode scalar values.
std::int64_t levenshtein(std::string_view a, std::string_view b);

// Best normalized Levenshtein similarity against any gold, thresholded at
// tau (score below tau collapses to 0). Both strings are normalized first;
// empty vs empty scores 1.
double anls_score(std::string_view prediction,
                  std::span<const std::string> golds, double tau = 0.5);

// 1.0 if the normalized prediction equals any normalized gold, else 0.0.
double accuracy_score(std::string_view prediction,
                      std::span<const std::string> golds);

/// Per-dataset mean of example scores plus their unweighted mean, which
/// gives every dataset the same weight regardless of its size. Scores are
/// kept in [0, 1]; reports multiply by 100 for readability.
struct ScoreReport {
  std::map<std::string, double> per_dataset;
  double final_score = 0.0;
};

ScoreReport two_step_average(std::span<const EvalExample> examples,
                             double tau = 0.5);

}  // namespace fedsim
