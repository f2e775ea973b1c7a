#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fedsim/metrics.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

std::string random_word(Rng& rng, int max_len) {
  int len = static_cast<int>(rng.next_below(max_len + 1));
  std::string s;
  for (int i = 0; i < len; ++i) {
    s.push_back(static_cast<char>('a' + rng.next_below(4)));
  }
  return s;
}

}  // namespace

TEST_CASE("levenshtein reference values") {
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("same", "same") == 0);
  CHECK(levenshtein("kitten", "sitting") == 3);
}

TEST_CASE("levenshtein counts code points, not bytes") {
  // Two-byte UTF-8 characters; one substitution.
  CHECK(levenshtein("caf\xc3\xa9", "caf\xc3\xa8") == 1);
  CHECK(levenshtein("\xc3\xa9", "") == 1);
}

TEST_CASE("levenshtein is a metric on random short strings") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    std::string a = random_word(rng, 8);
    std::string b = random_word(rng, 8);
    std::string c = random_word(rng, 8);
    auto dab = levenshtein(a, b);
    CHECK(dab == levenshtein(b, a));
    CHECK((dab == 0) == (a == b));
    CHECK(dab <= levenshtein(a, c) + levenshtein(c, b));
  }
}

TEST_CASE("anls reference values") {
  std::vector<std::string> buildings{"buildings"};
  CHECK(anls_score("building", buildings) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  std::vector<std::string> blue{"blue"};
  CHECK(anls_score("red", blue) == 0.0);
  std::vector<std::string> exact{"exact"};
  CHECK(anls_score("exact", exact) == 1.0);
  std::vector<std::string> empty_gold{""};
  CHECK(anls_score("", empty_gold) == 1.0);
}

TEST_CASE("anls normalizes case and surrounding whitespace") {
  std::vector<std::string> golds{"Paris"};
  CHECK(anls_score("  paris ", golds) == 1.0);
}

TEST_CASE("anls threshold collapses sub-tau similarities") {
  std::vector<std::string> golds{"abcd"};
  // one-of-four edit: nls = 0.75
  CHECK(anls_score("abcx", golds, 0.5) == 0.75);
  CHECK(anls_score("abcx", golds, 0.8) == 0.0);
  // tau = 0 keeps the raw similarity
  CHECK(anls_score("axyd", golds, 0.0) == 0.5);
}

TEST_CASE("anls picks the best gold and never leaves [0,1]") {
  std::vector<std::string> golds{"aaaa", "zzzz"};
  double s = anls_score("aaax", golds);
  CHECK(s == 0.75);
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::string pred = random_word(rng, 6);
    std::vector<std::string> gs{random_word(rng, 6), random_word(rng, 6)};
    double v = anls_score(pred, gs);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("anls is monotone in distance to the best gold") {
  std::vector<std::string> golds{"abcdefgh"};
  double prev = 2.0;
  for (const char* pred : {"abcdefgh", "abcdefgx", "abcdefxx", "abcdexxx"}) {
    double s = anls_score(pred, golds, 0.0);
    CHECK(s <= prev);
    prev = s;
  }
}

TEST_CASE("accuracy reference values") {
  std::vector<std::string> yes{"yes"};
  CHECK(accuracy_score("yes", yes) == 1.0);
  CHECK(accuracy_score("Yes ", yes) == 1.0);
  std::vector<std::string> no{"no"};
  CHECK(accuracy_score("yes", no) == 0.0);
}

TEST_CASE("metric assignment per dataset") {
  CHECK(metric_for_dataset("WTQ") == MetricKind::anls);
  CHECK(metric_for_dataset("DocVQA") == MetricKind::anls);
  CHECK(metric_for_dataset("TabFact") == MetricKind::accuracy);
}

TEST_CASE("two-step average reference values") {
  auto make = [](const char* ds, const char* pred, const char* gold) {
    EvalExample ex;
    ex.dataset = ds;
    ex.prediction = pred;
    ex.golds = {gold};
    ex.kind = MetricKind::accuracy;
    return ex;
  };
  {
    std::vector<EvalExample> one{make("A", "x", "x"), make("A", "x", "y")};
    ScoreReport r = two_step_average(one);
    CHECK(r.final_score == 0.5);  // single dataset: plain mean
  }
  {
    std::vector<EvalExample> examples{make("A", "x", "x"), make("A", "x", "y"),
                                      make("B", "x", "x"), make("B", "y", "y")};
    ScoreReport r = two_step_average(examples);
    CHECK(r.per_dataset.at("A") == 0.5);
    CHECK(r.per_dataset.at("B") == 1.0);
    CHECK(r.final_score == 0.75);
  }
  {
    std::vector<EvalExample> examples{make("A", "x", "x"), make("A", "x", "y"),
                                      make("B", "x", "x"), make("B", "x", "y"),
                                      make("C", "x", "x"), make("C", "x", "y")};
    CHECK(two_step_average(examples).final_score == 0.5);
  }
}

TEST_CASE("two-step average ignores dataset duplication") {
  auto make = [](const char* ds, const char* pred, const char* gold) {
    EvalExample ex;
    ex.dataset = ds;
    ex.prediction = pred;
    ex.golds = {gold};
    ex.kind = MetricKind::accuracy;
    return ex;
  };
  std::vector<EvalExample> examples{make("A", "x", "x"), make("A", "x", "y"),
                                    make("B", "x", "x")};
  double before = two_step_average(examples).final_score;
  // Duplicate all of dataset A; its mean is unchanged.
  examples.push_back(make("A", "x", "x"));
  examples.push_back(make("A", "x", "y"));
  CHECK(two_step_average(examples).final_score == before);
}

TEST_CASE("two-step average rejects empty input") {
  std::vector<EvalExample> none;
  CHECK_THROWS_AS(two_step_average(none), DomainError);
}
