#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fedsim/fsp.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

DocumentExample revenue_example() {
  DocumentExample doc;
  doc.tokens = {"Revenue"};
  doc.boxes = {Box{0.10, 0.20, 0.30, 0.25}};
  return doc;
}

MaskPlan plan_for(MaskObjective objective, std::vector<int> indices) {
  MaskPlan plan;
  plan.objective = objective;
  plan.indices = std::move(indices);
  plan.mask_prob = default_mask_prob(objective);
  return plan;
}

DocumentExample random_document(Rng& rng, int max_tokens) {
  DocumentExample doc;
  int n = 1 + static_cast<int>(rng.next_below(max_tokens));
  for (int i = 0; i < n; ++i) {
    std::string token;
    int len = 1 + static_cast<int>(rng.next_below(6));
    for (int c = 0; c < len; ++c) {
      token.push_back(static_cast<char>('a' + rng.next_below(26)));
    }
    doc.tokens.push_back(token);
    double x0 = rng.next_unit() * 0.9;
    double y0 = rng.next_unit() * 0.9;
    double x1 = x0 + rng.next_unit() * (1.0 - x0);
    double y1 = y0 + rng.next_unit() * (1.0 - y0);
    doc.boxes.push_back(Box{x0, y0, x1, y1});
  }
  return doc;
}

}  // namespace

TEST_CASE("discretize reference values") {
  Discretizer d100(100);
  CHECK(d100.bin(0.0) == 0);
  CHECK(d100.bin(1.0) == 99);  // top edge clamps into the last bin
  CHECK(d100.bin(0.25) == 25);
  CHECK_THROWS_AS(d100.bin(-0.01), DomainError);
  CHECK_THROWS_AS(d100.bin(1.01), DomainError);
}

TEST_CASE("discretize is monotone non-decreasing") {
  Discretizer d(37);
  int prev = 0;
  for (int i = 0; i <= 1000; ++i) {
    int bin = d.bin(i / 1000.0);
    CHECK(bin >= prev);
    CHECK(bin < 37);
    prev = bin;
  }
}

TEST_CASE("sample_mask degenerate probabilities") {
  Rng rng(1);
  MaskPlan none = sample_mask(MaskObjective::tm, 10, 0.0, 100, rng);
  CHECK(none.size() == 0);
  MaskPlan all = sample_mask(MaskObjective::tm, 5, 1.0, 100, rng);
  CHECK(all.indices == std::vector<int>{0, 1, 2, 3, 4});
  MaskPlan capped = sample_mask(MaskObjective::tm, 150, 1.0, 100, rng);
  CHECK(capped.size() == 100);
  CHECK(capped.indices.front() == 0);
  CHECK(capped.indices.back() == 99);  // earliest positions survive the cap
}

TEST_CASE("sample_mask is deterministic in the rng seed") {
  Rng a(77), b(77);
  MaskPlan pa = sample_mask(MaskObjective::lm, 50, 0.4, 100, a);
  MaskPlan pb = sample_mask(MaskObjective::lm, 50, 0.4, 100, b);
  CHECK(pa.indices == pb.indices);
}

TEST_CASE("mask rate matches the objective probabilities") {
  // No cap, so the raw Bernoulli rate is observable.
  for (double pm : {0.5, 0.75, 0.15}) {
    Rng rng(static_cast<std::uint64_t>(pm * 1000));
    const int samples = 2000, tokens = 200;
    std::int64_t masked = 0;
    for (int s = 0; s < samples; ++s) {
      MaskPlan plan = sample_mask(MaskObjective::tm, tokens, pm, tokens, rng);
      masked += plan.size();
    }
    double total = static_cast<double>(samples) * tokens;
    double rate = static_cast<double>(masked) / total;
    double sigma = std::sqrt(pm * (1.0 - pm) / total);
    CHECK(std::abs(rate - pm) <= 3.0 * sigma);
  }
}

TEST_CASE("tm grammar on the Revenue example") {
  Discretizer d(100);
  SequencePair pair =
      build_tm(revenue_example(), plan_for(MaskObjective::tm, {0}), d);
  CHECK(pair.input == std::vector<std::string>{"<text_0>", "<loc_10>", "<loc_20>",
                                               "<loc_30>", "<loc_25>"});
  CHECK(pair.target == std::vector<std::string>{"<text_0>", "Revenue"});
  for (const Box& b : pair.input_boxes) CHECK(is_zero_box(b));
}

TEST_CASE("lm grammar on the Revenue example") {
  Discretizer d(100);
  SequencePair pair =
      build_lm(revenue_example(), plan_for(MaskObjective::lm, {0}), d);
  CHECK(pair.input ==
        std::vector<std::string>{"<layout_0>", "Revenue", "</layout_0>"});
  CHECK(pair.target == std::vector<std::string>{"<layout_0>", "<loc_10>",
                                                "<loc_20>", "<loc_30>",
                                                "<loc_25>"});
  CHECK(is_zero_box(pair.input_boxes[0]));
  CHECK(pair.input_boxes[1] == revenue_example().boxes[0]);  // token keeps its box
  CHECK(is_zero_box(pair.input_boxes[2]));
}

TEST_CASE("tlm grammar on the Revenue example") {
  Discretizer d(100);
  SequencePair pair =
      build_tlm(revenue_example(), plan_for(MaskObjective::tlm, {0}), d);
  CHECK(pair.input == std::vector<std::string>{"<text_layout_0>"});
  CHECK(is_zero_box(pair.input_boxes[0]));
  CHECK(pair.target == std::vector<std::string>{"<text_layout_0>", "Revenue",
                                                "<loc_10>", "<loc_20>",
                                                "<loc_30>", "<loc_25>"});
}

TEST_CASE("sentinel counters run in reading order") {
  DocumentExample doc;
  doc.tokens = {"a", "b", "c"};
  doc.boxes = {Box{0, 0, 0.1, 0.1}, Box{0.2, 0.2, 0.3, 0.3},
               Box{0.4, 0.4, 0.5, 0.5}};
  Discretizer d(100);
  SequencePair pair = build_tm(doc, plan_for(MaskObjective::tm, {0, 2}), d);
  CHECK(pair.input[0] == "<text_0>");
  CHECK(pair.input[5] == "b");
  CHECK(pair.input[6] == "<text_1>");
  CHECK(pair.target ==
        std::vector<std::string>{"<text_0>", "a", "<text_1>", "c"});
}

TEST_CASE("lm masking all of a 3-token document gives 9 input, 15 target") {
  DocumentExample doc;
  doc.tokens = {"a", "b", "c"};
  doc.boxes = {Box{0, 0, 0.1, 0.1}, Box{0.2, 0.2, 0.3, 0.3},
               Box{0.4, 0.4, 0.5, 0.5}};
  Discretizer d(100);
  SequencePair pair = build_lm(doc, plan_for(MaskObjective::lm, {0, 1, 2}), d);
  CHECK(pair.input.size() == 9);
  CHECK(pair.target.size() == 15);
}

TEST_CASE("tlm full mask leaves no natural input tokens") {
  Rng rng(13);
  DocumentExample doc = random_document(rng, 10);
  MaskPlan plan;
  plan.objective = MaskObjective::tlm;
  for (int i = 0; i < static_cast<int>(doc.tokens.size()); ++i) {
    plan.indices.push_back(i);
  }
  Discretizer d(100);
  SequencePair pair = build_tlm(doc, plan, d);
  CHECK(pair.input.size() == doc.tokens.size());
  for (std::size_t i = 0; i < pair.input.size(); ++i) {
    CHECK(pair.input[i] == text_layout_sentinel(static_cast<int>(i)));
  }
}

TEST_CASE("empty mask is the identity and an empty target") {
  Discretizer d(100);
  DocumentExample doc = revenue_example();
  for (MaskObjective obj :
       {MaskObjective::tm, MaskObjective::lm, MaskObjective::tlm}) {
    SequencePair pair = build_pair(obj, doc, plan_for(obj, {}), d);
    CHECK(pair.input == doc.tokens);
    CHECK(pair.target.empty());
    DocumentExample back = reconstruct(pair, obj, d);
    CHECK(back.tokens == doc.tokens);
    CHECK(back.boxes == doc.boxes);
  }
}

TEST_CASE("builders reject mismatched plans") {
  Discretizer d(100);
  CHECK_THROWS_AS(
      build_tm(revenue_example(), plan_for(MaskObjective::lm, {0}), d),
      DimensionError);
  CHECK_THROWS_AS(
      build_tm(revenue_example(), plan_for(MaskObjective::tm, {0, 0}), d),
      DimensionError);
  CHECK_THROWS_AS(
      build_tm(revenue_example(), plan_for(MaskObjective::tm, {1}), d),
      DimensionError);
}

TEST_CASE("reconstruct recovers the tlm Revenue example at bin resolution") {
  Discretizer d(100);
  SequencePair pair =
      build_tlm(revenue_example(), plan_for(MaskObjective::tlm, {0}), d);
  DocumentExample back = reconstruct(pair, MaskObjective::tlm, d);
  CHECK(back.tokens == std::vector<std::string>{"Revenue"});
  CHECK(back.boxes[0].x0 == d.bin_center(10));
  CHECK(back.boxes[0].y0 == d.bin_center(20));
  CHECK(back.boxes[0].x1 == d.bin_center(30));
  CHECK(back.boxes[0].y1 == d.bin_center(25));
}

TEST_CASE("reconstruct rejects out-of-order sentinels") {
  Discretizer d(100);
  SequencePair pair;
  pair.input = {"<text_1>", "<loc_1>", "<loc_1>", "<loc_2>", "<loc_2>",
                "<text_0>", "<loc_1>", "<loc_1>", "<loc_2>", "<loc_2>"};
  pair.input_boxes.assign(pair.input.size(), Box{});
  pair.target = {"<text_1>", "a", "<text_0>", "b"};
  CHECK_THROWS_AS(reconstruct(pair, MaskObjective::tm, d), ParseError);
}

TEST_CASE("reconstruct rejects a missing loc quad") {
  Discretizer d(100);
  SequencePair pair;
  pair.input = {"<text_0>", "<loc_1>", "<loc_1>", "<loc_2>"};
  pair.input_boxes.assign(pair.input.size(), Box{});
  pair.target = {"<text_0>", "a"};
  CHECK_THROWS_AS(reconstruct(pair, MaskObjective::tm, d), ParseError);
}

TEST_CASE("reconstruct rejects a target that skips a masked slot") {
  Discretizer d(100);
  DocumentExample doc;
  doc.tokens = {"a", "b"};
  doc.boxes = {Box{0, 0, 0.1, 0.1}, Box{0.2, 0.2, 0.3, 0.3}};
  SequencePair pair = build_tm(doc, plan_for(MaskObjective::tm, {0, 1}), d);
  pair.target.resize(2);  // drop the second group
  CHECK_THROWS_AS(reconstruct(pair, MaskObjective::tm, d), ParseError);
}

TEST_CASE("round-trip property over random documents") {
  Rng rng(2024);
  Discretizer d(kDefaultLocBins);
  double tol = 1.0 / kDefaultLocBins;
  for (int trial = 0; trial < 1000; ++trial) {
    DocumentExample doc = random_document(rng, 40);
    for (MaskObjective obj :
         {MaskObjective::tm, MaskObjective::lm, MaskObjective::tlm}) {
      MaskPlan plan =
          sample_mask(obj, static_cast<int>(doc.tokens.size()),
                      default_mask_prob(obj), kDefaultMaskCap, rng);
      SequencePair pair = build_pair(obj, doc, plan, d);
      // Sentinel boxes are exactly zero in the input.
      for (std::size_t i = 0; i < pair.input.size(); ++i) {
        if (pair.input[i].front() == '<') CHECK(is_zero_box(pair.input_boxes[i]));
      }
      DocumentExample back = reconstruct(pair, obj, d);
      REQUIRE(back.tokens == doc.tokens);
      for (std::size_t i = 0; i < doc.boxes.size(); ++i) {
        CHECK(std::abs(back.boxes[i].x0 - doc.boxes[i].x0) <= tol);
        CHECK(std::abs(back.boxes[i].y0 - doc.boxes[i].y0) <= tol);
        CHECK(std::abs(back.boxes[i].x1 - doc.boxes[i].x1) <= tol);
        CHECK(std::abs(back.boxes[i].y1 - doc.boxes[i].y1) <= tol);
      }
    }
  }
}
