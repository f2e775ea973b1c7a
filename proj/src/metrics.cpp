#include "fedsim/metrics.hpp"

#include <algorithm>
#include <cctype>

namespace fedsim {

MetricKind metric_for_dataset(std::string_view dataset) {
  if (dataset == "TabFact") return MetricKind::accuracy;
  return MetricKind::anls;
}

const char* to_string(MetricKind kind) {
  return kind == MetricKind::anls ? "anls" : "accuracy";
}

std::vector<std::uint32_t> utf8_codepoints(std::string_view text) {
  std::vector<std::uint32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xe0) == 0xc0) {
      len = 2;
      cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
      len = 3;
      cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      unsigned char bk = static_cast<unsigned char>(text[i + k]);
      if ((bk & 0xc0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (bk & 0x3f);
      }
    }
    if (!ok) {
      out.push_back(b0);
      ++i;
    } else {
      out.push_back(cp);
      i += len;
    }
  }
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (begin < end && is_space(static_cast<unsigned char>(text[begin]))) {
    ++begin;
  }
  while (end > begin && is_space(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  std::string out(text.substr(begin, end - begin));
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::int64_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::uint32_t> ca = utf8_codepoints(a);
  std::vector<std::uint32_t> cb = utf8_codepoints(b);
  if (ca.empty()) return static_cast<std::int64_t>(cb.size());
  if (cb.empty()) return static_cast<std::int64_t>(ca.size());

  std::vector<std::int64_t> row(cb.size() + 1);
  for (std::size_t j = 0; j <= cb.size(); ++j) {
    row[j] = static_cast<std::int64_t>(j);
  }
  for (std::size_t i = 1; i <= ca.size(); ++i) {
    std::int64_t diag = row[0];
    row[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= cb.size(); ++j) {
      std::int64_t sub = diag + (ca[i - 1] == cb[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
    }
  }
  return row[cb.size()];
}

double anls_score(std::string_view prediction,
                  std::span<const std::string> golds, double tau) {
  if (golds.empty()) {
    throw DomainError("anls_score: empty gold set");
  }
  std::string pred = normalize_answer(prediction);
  std::size_t pred_len = utf8_codepoints(pred).size();
  double best = 0.0;
  for (const std::string& gold_raw : golds) {
    std::string gold = normalize_answer(gold_raw);
    std::size_t gold_len = utf8_codepoints(gold).size();
    double nls = 0.0;
    if (pred_len == 0 && gold_len == 0) {
      nls = 1.0;
    } else {
      double dist = static_cast<double>(levenshtein(pred, gold));
      double denom = static_cast<double>(std::max(pred_len, gold_len));
      nls = 1.0 - dist / denom;
    }
    best = std::max(best, nls);
  }
  return best >= tau ? best : 0.0;
}

double accuracy_score(std::string_view prediction,
                      std::span<const std::string> golds) {
  if (golds.empty()) {
    throw DomainError("accuracy_score: empty gold set");
  }
  std::string pred = normalize_answer(prediction);
  for (const std::string& gold : golds) {
    if (pred == normalize_answer(gold)) return 1.0;
  }
  return 0.0;
}

ScoreReport two_step_average(std::span<const EvalExample> examples,
                             double tau) {
  if (examples.empty()) {
    throw DomainError("two_step_average: no examples");
  }
  std::map<std::string, std::pair<double, std::int64_t>> sums;
  for (const EvalExample& ex : examples) {
    double score = ex.kind == MetricKind::anls
                       ? anls_score(ex.prediction, ex.golds, tau)
                       : accuracy_score(ex.prediction, ex.golds);
    auto& [sum, count] = sums[ex.dataset];
    sum += score;
    count += 1;
  }
  ScoreReport report;
  double total = 0.0;
  for (const auto& [dataset, sc] : sums) {
    double mean = sc.first / static_cast<double>(sc.second);
    report.per_dataset[dataset] = mean;
    total += mean;
  }
  report.final_score = total / static_cast<double>(sums.size());
  return report;
}

}  // namespace fedsim
