#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/core.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// The three self-supervised masking objectives: text modeling, layout
// modeling, and joint text-layout modeling.
enum class MaskObjective { tm, lm, tlm };

const char* to_string(MaskObjective objective);
std::optional<MaskObjective> mask_objective_from_string(std::string_view name);

// Masking probability each objective uses by default.
double default_mask_prob(MaskObjective objective);
inline constexpr int kDefaultMaskCap = 100;    // L_M
inline constexpr int kDefaultLocBins = 500;    // |V| of the coordinate vocab

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  bool operator==(const Box&) const = default;
};

inline bool is_zero_box(const Box& b) {
  return b.x0 == 0.0 && b.y0 == 0.0 && b.x1 == 0.0 && b.y1 == 0.0;
}

/// One OCR'd document: tokens with normalized bounding boxes. The image
/// reference is carried for completeness but never consumed here.
struct DocumentExample {
  std::vector<std::string> tokens;
  std::vector<Box> boxes;
  std::string image_ref;

  // |tokens| == |boxes|, coordinates in [0,1], x0 <= x1 and y0 <= y1.
  void validate() const;
};

/// Which token indices a pair masks. Indices are ascending and capped at
/// mask_cap, keeping the earliest positions when the cap bites.
struct MaskPlan {
  MaskObjective objective = MaskObjective::tm;
  std::vector<int> indices;
  double mask_prob = 0.0;
  int mask_cap = kDefaultMaskCap;

  int size() const { return static_cast<int>(indices.size()); }
};

/// (input, target) token sequences plus per-input-token boxes. Sentinel
/// tokens always carry the zero box.
struct SequencePair {
  std::vector<std::string> input;
  std::vector<Box> input_boxes;
  std::vector<std::string> target;
};

/// Maps a normalized coordinate to one of vocab_size integer bins:
/// min(floor(c * vocab_size), vocab_size - 1).
class Discretizer {
 public:
  explicit Discretizer(int vocab_size = kDefaultLocBins);
  int vocab_size() const { return vocab_size_; }
  int bin(double coordinate) const;
  // Center of a bin, the best reconstruction of a discretized coordinate.
  double bin_center(int bin) const;

 private:
  int vocab_size_;
};

// Sentinel surface forms. These exact strings are an interface constant:
// serialized corpora depend on them.
std::string text_sentinel(int l);         // <text_l>
std::string layout_open_sentinel(int l);  // <layout_l>
std::string layout_close_sentinel(int l); // </layout_l>
std::string text_layout_sentinel(int l);  // <text_layout_l>
std::string loc_token(int bin);           // <loc_bin>

// Bernoulli(mask_prob) over each of the token_count indices; if more than
// mask_cap are drawn, the earliest mask_cap in reading order are kept.
MaskPlan sample_mask(MaskObjective objective, int token_count,
                     double mask_prob, int mask_cap, Rng& rng);

SequencePair build_tm(const DocumentExample& example, const MaskPlan& plan,
                      const Discretizer& discretizer);
SequencePair build_lm(const DocumentExample& example, const MaskPlan& plan,
                      const Discretizer& discretizer);
SequencePair build_tlm(const DocumentExample& example, const MaskPlan& plan,
                       const Discretizer& discretizer);
SequencePair build_pair(MaskObjective objective, const DocumentExample& example,
                        const MaskPlan& plan, const Discretizer& discretizer);

// Validation inverse: recovers the token sequence exactly and each masked
// box at bin-center resolution. Grammar violations (out-of-order sentinels,
// missing loc quads, ...) raise ParseError naming the offending position.
DocumentExample reconstruct(const SequencePair& pair, MaskObjective objective,
                            const Discretizer& discretizer);

}  // namespace fedsim
