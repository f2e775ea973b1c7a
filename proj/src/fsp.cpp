#include "fedsim/fsp.hpp"

#include <algorithm>
#include <cmath>

namespace fedsim {

namespace {

constexpr const char* kTextPrefix = "<text_";
constexpr const char* kLayoutOpenPrefix = "<layout_";
constexpr const char* kLayoutClosePrefix = "</layout_";
constexpr const char* kTextLayoutPrefix = "<text_layout_";
constexpr const char* kLocPrefix = "<loc_";

enum class TokenKind { natural, text, layout_open, layout_close, text_layout, loc };

struct ParsedToken {
  TokenKind kind = TokenKind::natural;
  int index = -1;
};

// "<prefix_N>" -> N, or nullopt when the token is not of that shape.
std::optional<int> parse_indexed(const std::string& token,
                                 std::string_view prefix) {
  if (token.size() <= prefix.size() + 1 || token.compare(0, prefix.size(), prefix) != 0 ||
      token.back() != '>') {
    return std::nullopt;
  }
  int value = 0;
  for (std::size_t i = prefix.size(); i + 1 < token.size(); ++i) {
    char c = token[i];
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
    if (value > 100000000) return std::nullopt;
  }
  return value;
}

ParsedToken classify(const std::string& token) {
  // text_layout shares the "<text_" prefix, so it is matched first.
  if (auto idx = parse_indexed(token, kTextLayoutPrefix)) {
    return {TokenKind::text_layout, *idx};
  }
  if (auto idx = parse_indexed(token, kTextPrefix)) {
    return {TokenKind::text, *idx};
  }
  if (auto idx = parse_indexed(token, kLayoutClosePrefix)) {
    return {TokenKind::layout_close, *idx};
  }
  if (auto idx = parse_indexed(token, kLayoutOpenPrefix)) {
    return {TokenKind::layout_open, *idx};
  }
  if (auto idx = parse_indexed(token, kLocPrefix)) {
    return {TokenKind::loc, *idx};
  }
  return {TokenKind::natural, -1};
}

void validate_plan(const DocumentExample& example, const MaskPlan& plan,
                   MaskObjective expected) {
  if (plan.objective != expected) {
    throw DimensionError("mask plan objective does not match builder");
  }
  if (plan.mask_cap >= 0 && plan.size() > plan.mask_cap) {
    throw DimensionError("mask plan exceeds its own cap");
  }
  int prev = -1;
  for (int idx : plan.indices) {
    if (idx <= prev) {
      throw DimensionError("mask plan indices must be ascending and distinct");
    }
    if (idx < 0 || idx >= static_cast<int>(example.tokens.size())) {
      throw DimensionError("mask plan index " + std::to_string(idx) +
                           " out of range");
    }
    prev = idx;
  }
}

void append_loc_quad(std::vector<std::string>& out, const Box& box,
                     const Discretizer& d) {
  out.push_back(loc_token(d.bin(box.x0)));
  out.push_back(loc_token(d.bin(box.y0)));
  out.push_back(loc_token(d.bin(box.x1)));
  out.push_back(loc_token(d.bin(box.y1)));
}

[[noreturn]] void parse_fail(const char* where, std::size_t position,
                             const std::string& detail) {
  throw ParseError(std::string(where) + " position " +
                   std::to_string(position) + ": " + detail);
}

// Pulls a <loc_*> quad out of `tokens` starting at `pos` and returns the
// decoded box at bin-center resolution.
Box read_loc_quad(const std::vector<std::string>& tokens, std::size_t& pos,
                  const Discretizer& d, const char* where) {
  double coords[4];
  for (int c = 0; c < 4; ++c) {
    if (pos >= tokens.size()) {
      parse_fail(where, pos, "expected <loc_*> token, sequence ended");
    }
    ParsedToken p = classify(tokens[pos]);
    if (p.kind != TokenKind::loc) {
      parse_fail(where, pos, "expected <loc_*> token, got '" + tokens[pos] + "'");
    }
    if (p.index >= d.vocab_size()) {
      parse_fail(where, pos, "loc bin " + std::to_string(p.index) +
                                 " outside vocabulary of " +
                                 std::to_string(d.vocab_size()));
    }
    coords[c] = d.bin_center(p.index);
    ++pos;
  }
  return Box{coords[0], coords[1], coords[2], coords[3]};
}

}  // namespace

const char* to_string(MaskObjective objective) {
  switch (objective) {
    case MaskObjective::tm: return "tm";
    case MaskObjective::lm: return "lm";
    case MaskObjective::tlm: return "tlm";
  }
  return "tm";
}

std::optional<MaskObjective> mask_objective_from_string(std::string_view name) {
  if (name == "tm") return MaskObjective::tm;
  if (name == "lm") return MaskObjective::lm;
  if (name == "tlm") return MaskObjective::tlm;
  return std::nullopt;
}

double default_mask_prob(MaskObjective objective) {
  switch (objective) {
    case MaskObjective::tm: return 0.5;
    case MaskObjective::lm: return 0.75;
    case MaskObjective::tlm: return 0.15;
  }
  return 0.5;
}

void DocumentExample::validate() const {
  if (tokens.size() != boxes.size()) {
    throw DimensionError("document: token/box count mismatch");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    bool in_range = b.x0 >= 0.0 && b.y0 >= 0.0 && b.x1 <= 1.0 && b.y1 <= 1.0;
    if (!in_range || b.x0 > b.x1 || b.y0 > b.y1) {
      throw DomainError("document: invalid box at token " + std::to_string(i));
    }
  }
}

Discretizer::Discretizer(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 1) {
    throw DomainError("discretizer: vocabulary size must be >= 1");
  }
}

int Discretizer::bin(double coordinate) const {
  if (!(coordinate >= 0.0 && coordinate <= 1.0)) {
    throw DomainError("discretize: coordinate outside [0,1]");
  }
  int b = static_cast<int>(std::floor(coordinate * vocab_size_));
  return std::min(b, vocab_size_ - 1);
}

double Discretizer::bin_center(int bin) const {
  return (static_cast<double>(bin) + 0.5) / static_cast<double>(vocab_size_);
}

std::string text_sentinel(int l) { return "<text_" + std::to_string(l) + ">"; }
std::string layout_open_sentinel(int l) {
  return "<layout_" + std::to_string(l) + ">";
}
std::string layout_close_sentinel(int l) {
  return "</layout_" + std::to_string(l) + ">";
}
std::string text_layout_sentinel(int l) {
  return "<text_layout_" + std::to_string(l) + ">";
}
std::string loc_token(int bin) { return "<loc_" + std::to_string(bin) + ">"; }

MaskPlan sample_mask(MaskObjective objective, int token_count,
                     double mask_prob, int mask_cap, Rng& rng) {
  if (token_count < 1) {
    throw DomainError("sample_mask: token count must be >= 1");
  }
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
    throw DomainError("sample_mask: probability outside [0,1]");
  }
  if (mask_cap < 0) {
    throw DomainError("sample_mask: cap must be >= 0");
  }
  MaskPlan plan;
  plan.objective = objective;
  plan.mask_prob = mask_prob;
  plan.mask_cap = mask_cap;
  for (int i = 0; i < token_count; ++i) {
    if (rng.next_unit() < mask_prob) {
      plan.indices.push_back(i);
    }
  }
  // Over-cap draws keep the earliest positions in reading order.
  if (mask_cap >= 0 && plan.size() > mask_cap) {
    plan.indices.resize(static_cast<std::size_t>(mask_cap));
  }
  return plan;
}

SequencePair build_tm(const DocumentExample& example, const MaskPlan& plan,
                      const Discretizer& discretizer) {
  example.validate();
  validate_plan(example, plan, MaskObjective::tm);
  SequencePair pair;
  std::size_t next = 0;
  int l = 0;
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    bool masked = next < plan.indices.size() &&
                  plan.indices[next] == static_cast<int>(i);
    if (masked) {
      pair.input.push_back(text_sentinel(l));
      pair.input_boxes.push_back(Box{});
      std::vector<std::string> locs;
      append_loc_quad(locs, example.boxes[i], discretizer);
      for (std::string& t : locs) {
        pair.input.push_back(std::move(t));
        pair.input_boxes.push_back(Box{});
      }
      pair.target.push_back(text_sentinel(l));
      pair.target.push_back(example.tokens[i]);
      ++l;
      ++next;
    } else {
      pair.input.push_back(example.tokens[i]);
      pair.input_boxes.push_back(example.boxes[i]);
    }
  }
  return pair;
}

SequencePair build_lm(const DocumentExample& example, const MaskPlan& plan,
                      const Discretizer& discretizer) {
  example.validate();
  validate_plan(example, plan, MaskObjective::lm);
  SequencePair pair;
  std::size_t next = 0;
  int l = 0;
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    bool masked = next < plan.indices.size() &&
                  plan.indices[next] == static_cast<int>(i);
    if (masked) {
      pair.input.push_back(layout_open_sentinel(l));
      pair.input_boxes.push_back(Box{});
      // The wrapped token keeps its own box; only the wrappers are zeroed.
      pair.input.push_back(example.tokens[i]);
      pair.input_boxes.push_back(example.boxes[i]);
      pair.input.push_back(layout_close_sentinel(l));
      pair.input_boxes.push_back(Box{});
      pair.target.push_back(layout_open_sentinel(l));
      append_loc_quad(pair.target, example.boxes[i], discretizer);
      ++l;
      ++next;
    } else {
      pair.input.push_back(example.tokens[i]);
      pair.input_boxes.push_back(example.boxes[i]);
    }
  }
  return pair;
}

SequencePair build_tlm(const DocumentExample& example, const MaskPlan& plan,
                       const Discretizer& discretizer) {
  example.validate();
  validate_plan(example, plan, MaskObjective::tlm);
  SequencePair pair;
  std::size_t next = 0;
  int l = 0;
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    bool masked = next < plan.indices.size() &&
                  plan.indices[next] == static_cast<int>(i);
    if (masked) {
      pair.input.push_back(text_layout_sentinel(l));
      pair.input_boxes.push_back(Box{});
      pair.target.push_back(text_layout_sentinel(l));
      pair.target.push_back(example.tokens[i]);
      append_loc_quad(pair.target, example.boxes[i], discretizer);
      ++l;
      ++next;
    } else {
      pair.input.push_back(example.tokens[i]);
      pair.input_boxes.push_back(example.boxes[i]);
    }
  }
  return pair;
}

SequencePair build_pair(MaskObjective objective, const DocumentExample& example,
                        const MaskPlan& plan, const Discretizer& discretizer) {
  switch (objective) {
    case MaskObjective::tm: return build_tm(example, plan, discretizer);
    case MaskObjective::lm: return build_lm(example, plan, discretizer);
    case MaskObjective::tlm: return build_tlm(example, plan, discretizer);
  }
  throw DomainError("build_pair: unknown objective");
}

namespace {

struct MaskedSlot {
  std::size_t output_index = 0;
  bool has_token = false;
  bool has_box = false;
  std::string token;
  Box box;
};

DocumentExample finish_reconstruction(std::vector<std::string> tokens,
                                      std::vector<Box> boxes,
                                      const std::vector<MaskedSlot>& slots) {
  for (std::size_t l = 0; l < slots.size(); ++l) {
    if (!slots[l].has_token || !slots[l].has_box) {
      throw ParseError("target is missing sentinel " + std::to_string(l));
    }
    tokens[slots[l].output_index] = slots[l].token;
    boxes[slots[l].output_index] = slots[l].box;
  }
  DocumentExample doc;
  doc.tokens = std::move(tokens);
  doc.boxes = std::move(boxes);
  doc.validate();
  return doc;
}

}  // namespace

DocumentExample reconstruct(const SequencePair& pair, MaskObjective objective,
                            const Discretizer& discretizer) {
  if (pair.input.size() != pair.input_boxes.size()) {
    throw ParseError("pair input/box length mismatch");
  }
  std::vector<std::string> tokens;
  std::vector<Box> boxes;
  std::vector<MaskedSlot> slots;

  // Input pass: natural tokens flow straight through; sentinel structures
  // open one masked slot each and must appear in 0,1,2,... order.
  std::size_t pos = 0;
  while (pos < pair.input.size()) {
    const std::string& tok = pair.input[pos];
    ParsedToken p = classify(tok);
    if (p.kind == TokenKind::natural) {
      tokens.push_back(tok);
      boxes.push_back(pair.input_boxes[pos]);
      ++pos;
      continue;
    }
    int expected = static_cast<int>(slots.size());
    switch (objective) {
      case MaskObjective::tm: {
        if (p.kind != TokenKind::text || p.index != expected) {
          parse_fail("input", pos,
                     "expected <text_" + std::to_string(expected) + ">, got '" +
                         tok + "'");
        }
        ++pos;
        MaskedSlot slot;
        slot.output_index = tokens.size();
        slot.box = read_loc_quad(pair.input, pos, discretizer, "input");
        slot.has_box = true;
        slots.push_back(std::move(slot));
        tokens.emplace_back();
        boxes.emplace_back();
        break;
      }
      case MaskObjective::lm: {
        if (p.kind != TokenKind::layout_open || p.index != expected) {
          parse_fail("input", pos,
                     "expected <layout_" + std::to_string(expected) +
                         ">, got '" + tok + "'");
        }
        ++pos;
        if (pos >= pair.input.size() ||
            classify(pair.input[pos]).kind != TokenKind::natural) {
          parse_fail("input", pos, "expected wrapped natural token");
        }
        MaskedSlot slot;
        slot.output_index = tokens.size();
        slot.token = pair.input[pos];
        slot.has_token = true;
        ++pos;
        ParsedToken close =
            pos < pair.input.size() ? classify(pair.input[pos]) : ParsedToken{};
        if (pos >= pair.input.size() ||
            close.kind != TokenKind::layout_close || close.index != expected) {
          parse_fail("input", pos,
                     "expected </layout_" + std::to_string(expected) + ">");
        }
        ++pos;
        slots.push_back(std::move(slot));
        tokens.emplace_back();
        boxes.emplace_back();
        break;
      }
      case MaskObjective::tlm: {
        if (p.kind != TokenKind::text_layout || p.index != expected) {
          parse_fail("input", pos,
                     "expected <text_layout_" + std::to_string(expected) +
                         ">, got '" + tok + "'");
        }
        ++pos;
        MaskedSlot slot;
        slot.output_index = tokens.size();
        slots.push_back(std::move(slot));
        tokens.emplace_back();
        boxes.emplace_back();
        break;
      }
    }
  }

  // Target pass: fills each slot per the objective's grammar.
  pos = 0;
  std::size_t l = 0;
  while (pos < pair.target.size()) {
    if (l >= slots.size()) {
      parse_fail("target", pos, "more sentinel groups than the input declares");
    }
    const std::string& tok = pair.target[pos];
    ParsedToken p = classify(tok);
    int expected = static_cast<int>(l);
    switch (objective) {
      case MaskObjective::tm: {
        if (p.kind != TokenKind::text || p.index != expected) {
          parse_fail("target", pos,
                     "expected <text_" + std::to_string(expected) + ">, got '" +
                         tok + "'");
        }
        ++pos;
        if (pos >= pair.target.size() ||
            classify(pair.target[pos]).kind != TokenKind::natural) {
          parse_fail("target", pos, "expected masked token text");
        }
        slots[l].token = pair.target[pos];
        slots[l].has_token = true;
        ++pos;
        break;
      }
      case MaskObjective::lm: {
        if (p.kind != TokenKind::layout_open || p.index != expected) {
          parse_fail("target", pos,
                     "expected <layout_" + std::to_string(expected) +
                         ">, got '" + tok + "'");
        }
        ++pos;
        slots[l].box = read_loc_quad(pair.target, pos, discretizer, "target");
        slots[l].has_box = true;
        break;
      }
      case MaskObjective::tlm: {
        if (p.kind != TokenKind::text_layout || p.index != expected) {
          parse_fail("target", pos,
                     "expected <text_layout_" + std::to_string(expected) +
                         ">, got '" + tok + "'");
        }
        ++pos;
        if (pos >= pair.target.size() ||
            classify(pair.target[pos]).kind != TokenKind::natural) {
          parse_fail("target", pos, "expected masked token text");
        }
        slots[l].token = pair.target[pos];
        slots[l].has_token = true;
        ++pos;
        slots[l].box = read_loc_quad(pair.target, pos, discretizer, "target");
        slots[l].has_box = true;
        break;
      }
    }
    ++l;
  }
  if (l != slots.size()) {
    throw ParseError("target covers " + std::to_string(l) + " of " +
                     std::to_string(slots.size()) + " masked positions");
  }
  return finish_reconstruction(std::move(tokens), std::move(boxes), slots);
}

}  // namespace fedsim
