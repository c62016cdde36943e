#include "hilt/phraseology.hpp"

#include "hilt/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace hilt {

namespace {

constexpr DigitWord kDigitLexicon[] = {
    {"zero", '0'}, {"one", '1'},  {"two", '2'},   {"three", '3'}, {"tree", '3'},
    {"four", '4'}, {"five", '5'}, {"fife", '5'},  {"six", '6'},   {"seven", '7'},
    {"eight", '8'}, {"nine", '9'}, {"niner", '9'},
};

const std::vector<std::string_view> kConfusionSets[] = {
    {"one", "nine"},
    {"five", "nine"},
    {"two", "three"},
    {"zero", "four"},
};

const ActionPhrase kPhrases[] = {
    {Action::cancel_takeoff_clearance, {"cancel", "takeoff", "clearance"}, "cancel"},
    {Action::cleared_for_takeoff, {"cleared", "for", "takeoff"}, "takeoff"},
    {Action::cleared_to_land, {"cleared", "to", "land"}, "land"},
    {Action::hold_short, {"hold", "short"}, "short"},
    {Action::line_up_and_wait, {"line", "up", "and", "wait"}, "line"},
    {Action::climb_maintain, {"climb", "and", "maintain"}, "climb"},
    {Action::descend_maintain, {"descend", "and", "maintain"}, "descend"},
    {Action::go_around, {"go", "around"}, "around"},
    {Action::stop, {"hold", "position"}, "position"},
    {Action::stop, {"stop"}, "stop"},
    {Action::proceed, {"proceed"}, "proceed"},
};

constexpr double kMinActionQuality = 0.5;
constexpr double kUnanchoredRunwayQuality = 0.8;
constexpr double kUnanchoredAltitudeQuality = 0.8;

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool is_callsign_token(std::string_view t) {
  // letters{1,6} digits{1,4} letters{0,3}, e.g. n123ab, aal2041, ops7
  if (t.size() < 2 || t.size() > 10) return false;
  std::size_t i = 0;
  while (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) ++i;
  if (i < 1 || i > 6) return false;
  const std::size_t digits_begin = i;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  const std::size_t digits = i - digits_begin;
  if (digits < 1 || digits > 4) return false;
  const std::size_t tail_begin = i;
  while (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) ++i;
  return i == t.size() && (i - tail_begin) <= 3;
}

std::size_t lcs(std::span<const std::string_view> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::optional<char> suffix_of(std::string_view word) {
  if (word == "left") return 'L';
  if (word == "right") return 'R';
  if (word == "center" || word == "centre") return 'C';
  return std::nullopt;
}

bool is_number_token(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Reads a runway designator starting at tokens[i]: two spoken digits or a
// two-digit numeral ("19", "19r"), then an optional side word.
std::optional<std::string> read_runway(const std::vector<std::string>& tokens, std::size_t i) {
  if (i >= tokens.size()) return std::nullopt;
  std::string designator;
  std::size_t used = 0;
  const std::string& t = tokens[i];
  if (t.size() >= 2 && std::isdigit(static_cast<unsigned char>(t[0])) &&
      std::isdigit(static_cast<unsigned char>(t[1]))) {
    if (t.size() == 3 && (t[2] == 'l' || t[2] == 'c' || t[2] == 'r')) {
      designator = upper(t);
    } else if (t.size() == 2) {
      designator = t;
    } else {
      return std::nullopt;
    }
    used = 1;
  } else {
    if (i + 1 >= tokens.size()) return std::nullopt;
    const auto d1 = digit_of(t);
    const auto d2 = digit_of(tokens[i + 1]);
    if (!d1 || !d2) return std::nullopt;
    designator = {*d1, *d2};
    used = 2;
  }
  if (designator.size() == 2 && i + used < tokens.size()) {
    if (auto side = suffix_of(tokens[i + used])) designator += *side;
  }
  if (!is_canonical_runway(designator)) return std::nullopt;
  return designator;
}

std::optional<int> read_altitude(const std::vector<std::string>& tokens, std::size_t i) {
  if (i < tokens.size() && tokens[i] == "flight" && i + 1 < tokens.size() && tokens[i + 1] == "level") {
    std::string digits;
    for (std::size_t j = i + 2; j < tokens.size() && digits.size() < 3; ++j) {
      const auto d = digit_of(tokens[j]);
      if (!d) break;
      digits += *d;
    }
    if (digits.size() != 3) return std::nullopt;
    return std::stoi(digits) * 100;
  }
  int value = 0;
  std::string digits;
  bool any = false;
  for (std::size_t j = i; j < tokens.size(); ++j) {
    const std::string& t = tokens[j];
    if (auto d = digit_of(t)) {
      digits += *d;
    } else if (is_number_token(t) && t.size() <= 6) {
      digits += t;
    } else if (t == "thousand" && !digits.empty()) {
      value += std::stoi(digits) * 1000;
      digits.clear();
      any = true;
    } else if (t == "hundred" && !digits.empty()) {
      value += std::stoi(digits) * 100;
      digits.clear();
      any = true;
    } else {
      break;
    }
  }
  if (!digits.empty()) {
    if (any) return std::nullopt;  // trailing digits after a multiplier are not grammatical
    value = std::stoi(digits);
    any = true;
  }
  if (!any || value <= 0) return std::nullopt;
  return value;
}

}  // namespace

std::string_view to_string(Action action) {
  switch (action) {
    case Action::cleared_for_takeoff: return "cleared_for_takeoff";
    case Action::cleared_to_land: return "cleared_to_land";
    case Action::hold_short: return "hold_short";
    case Action::line_up_and_wait: return "line_up_and_wait";
    case Action::cancel_takeoff_clearance: return "cancel_takeoff_clearance";
    case Action::climb_maintain: return "climb_maintain";
    case Action::descend_maintain: return "descend_maintain";
    case Action::go_around: return "go_around";
    case Action::proceed: return "proceed";
    case Action::stop: return "stop";
  }
  return "unknown";
}

std::optional<Action> action_from_string(std::string_view text) {
  for (Action a : kAllActions) {
    if (to_string(a) == text) return a;
  }
  return std::nullopt;
}

bool is_runway_scoped(Action action) {
  return action == Action::cleared_for_takeoff || action == Action::cleared_to_land ||
         action == Action::hold_short || action == Action::line_up_and_wait;
}

bool is_altitude_scoped(Action action) {
  return action == Action::climb_maintain || action == Action::descend_maintain;
}

bool grants_runway_authorization(Action action) {
  return action == Action::cleared_for_takeoff || action == Action::cleared_to_land ||
         action == Action::line_up_and_wait;
}

std::string_view to_string(Acknowledgement ack) {
  switch (ack) {
    case Acknowledgement::none: return "none";
    case Acknowledgement::roger: return "roger";
    case Acknowledgement::wilco: return "wilco";
    case Acknowledgement::say_again: return "say_again";
    case Acknowledgement::unable: return "unable";
    case Acknowledgement::affirm: return "affirm";
  }
  return "none";
}

std::span<const DigitWord> digit_lexicon() { return kDigitLexicon; }

std::optional<char> digit_of(std::string_view word) {
  if (word.size() == 1 && std::isdigit(static_cast<unsigned char>(word[0]))) return word[0];
  for (const auto& entry : kDigitLexicon) {
    if (entry.word == word) return entry.digit;
  }
  return std::nullopt;
}

std::string_view digit_word(char digit) {
  static constexpr std::string_view words[] = {"zero", "one", "two",   "three", "four",
                                               "five", "six", "seven", "eight", "nine"};
  if (digit < '0' || digit > '9') throw std::invalid_argument("not a digit");
  return words[digit - '0'];
}

std::span<const std::vector<std::string_view>> digit_confusion_sets() { return kConfusionSets; }

std::vector<std::string_view> digit_confusions(std::string_view word) {
  const auto d = digit_of(word);
  if (!d || word.size() == 1) return {};
  const std::string_view canonical = digit_word(*d);
  std::vector<std::string_view> out;
  for (const auto& set : kConfusionSets) {
    if (std::find(set.begin(), set.end(), canonical) == set.end()) continue;
    for (auto member : set) {
      if (member != canonical && std::find(out.begin(), out.end(), member) == out.end()) out.push_back(member);
    }
  }
  return out;
}

std::span<const ActionPhrase> action_phrases() { return kPhrases; }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      current += static_cast<char>(std::tolower(uc));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double compute_slot_conf(const ParsedSlots& slots) {
  if (!slots.action) return 0.0;
  double sum = slots.callsign_quality + slots.action_quality;
  double expected = 2.0;
  if (is_runway_scoped(*slots.action)) {
    sum += slots.runway_quality;
    expected += 1.0;
  } else if (is_altitude_scoped(*slots.action)) {
    sum += slots.altitude_quality;
    expected += 1.0;
  }
  return std::clamp(sum / expected, 0.0, 1.0);
}

ParsedSlots parse_phraseology(std::string_view transcript) {
  ParsedSlots slots;
  const std::vector<std::string> tokens = tokenize(transcript);
  if (tokens.empty()) return slots;

  // Callsign: first callsign-shaped token; more than one distinct is ambiguous.
  for (const auto& t : tokens) {
    if (!is_callsign_token(t)) continue;
    const std::string cs = upper(t);
    if (!slots.callsign) {
      slots.callsign = cs;
      slots.callsign_quality = 1.0;
    } else if (*slots.callsign != cs) {
      slots.ambiguous_recipient = true;
    }
  }

  // Action: best in-order match of a grammar phrase around its anchor word.
  double best_quality = 0.0;
  std::size_t best_anchor_end = 0;
  for (const auto& phrase : kPhrases) {
    const auto k = static_cast<std::ptrdiff_t>(
        std::find(phrase.words.begin(), phrase.words.end(), phrase.anchor) - phrase.words.begin());
    const auto n = static_cast<std::ptrdiff_t>(phrase.words.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] != phrase.anchor) continue;
      const auto pos = static_cast<std::ptrdiff_t>(i);
      const auto lo = std::max<std::ptrdiff_t>(0, pos - k - 1);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(tokens.size()), pos + (n - k) + 1);
      std::vector<std::string> window(tokens.begin() + lo, tokens.begin() + hi);
      const double quality = static_cast<double>(lcs(phrase.words, window)) / static_cast<double>(n);
      if (quality > best_quality + 1e-12) {
        best_quality = quality;
        slots.action = phrase.action;
        best_anchor_end = i + 1;
      }
    }
  }
  if (best_quality < kMinActionQuality) {
    slots.action.reset();
    best_quality = 0.0;
  }
  slots.action_quality = slots.action ? best_quality : 0.0;

  if (!slots.action) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& t = tokens[i];
      if (t == "roger") slots.ack = Acknowledgement::roger;
      else if (t == "wilco") slots.ack = Acknowledgement::wilco;
      else if (t == "unable") slots.ack = Acknowledgement::unable;
      else if (t == "affirm" || t == "affirmative") slots.ack = Acknowledgement::affirm;
      else if (t == "say" && i + 1 < tokens.size() && tokens[i + 1] == "again") slots.ack = Acknowledgement::say_again;
      if (slots.ack != Acknowledgement::none) break;
    }
    slots.slot_conf = 0.0;
    return slots;
  }

  if (is_runway_scoped(*slots.action)) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] != "runway") continue;
      if (auto rw = read_runway(tokens, i + 1)) {
        slots.runway = *rw;
        slots.runway_quality = 1.0;
        break;
      }
    }
    if (!slots.runway) {
      for (std::size_t i = best_anchor_end; i < tokens.size(); ++i) {
        if (auto rw = read_runway(tokens, i)) {
          slots.runway = *rw;
          slots.runway_quality = kUnanchoredRunwayQuality;
          break;
        }
      }
    }
  } else if (is_altitude_scoped(*slots.action)) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] != "maintain") continue;
      if (auto alt = read_altitude(tokens, i + 1)) {
        slots.altitude_ft = *alt;
        slots.altitude_quality = 1.0;
        break;
      }
    }
    if (!slots.altitude_ft) {
      for (std::size_t i = best_anchor_end; i < tokens.size(); ++i) {
        if (auto alt = read_altitude(tokens, i)) {
          slots.altitude_ft = *alt;
          slots.altitude_quality = kUnanchoredAltitudeQuality;
          break;
        }
      }
    }
  }

  if (slots.ambiguous_recipient) slots.callsign_quality = 0.5;
  slots.slot_conf = compute_slot_conf(slots);
  return slots;
}

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

RecipientMatch match_callsign(std::string_view heard, std::span<const std::string> roster) {
  constexpr std::size_t kMaxDistance = 2;
  RecipientMatch match;
  std::size_t best = kMaxDistance + 1;
  int best_count = 0;
  const std::string heard_upper = upper(heard);
  for (const auto& cs : roster) {
    const std::size_t d = edit_distance(heard_upper, upper(cs));
    if (d < best) {
      best = d;
      best_count = 1;
      match.callsign = cs;
    } else if (d == best) {
      ++best_count;
    }
  }
  if (best > kMaxDistance) {
    match.callsign.reset();
    match.ambiguous = true;
    return match;
  }
  if (best_count > 1) {
    match.callsign.reset();
    match.ambiguous = true;
    match.quality = 0.5;
    return match;
  }
  match.quality = best == 0 ? 1.0 : 1.0 - 0.2 * static_cast<double>(best);
  return match;
}

ParsedSlots resolve_recipient(ParsedSlots slots, std::span<const std::string> roster) {
  if (!slots.callsign) {
    if (slots.action) slots.ambiguous_recipient = true;
    slots.slot_conf = compute_slot_conf(slots);
    return slots;
  }
  const RecipientMatch m = match_callsign(*slots.callsign, roster);
  if (m.callsign) {
    slots.callsign = m.callsign;
    slots.callsign_quality = slots.ambiguous_recipient ? std::min(0.5, m.quality) : m.quality;
  } else {
    slots.ambiguous_recipient = true;
    slots.callsign_quality = m.quality;
  }
  slots.slot_conf = compute_slot_conf(slots);
  return slots;
}

std::string speak_runway(std::string_view token) {
  if (!is_canonical_runway(token)) throw std::invalid_argument("not a runway token: " + std::string(token));
  std::string out;
  out += digit_word(token[0]);
  out += ' ';
  out += digit_word(token[1]);
  if (token.size() == 3) {
    out += token[2] == 'L' ? " left" : token[2] == 'R' ? " right" : " center";
  }
  return out;
}

std::string speak_altitude(int altitude_ft) {
  if (altitude_ft <= 0 || altitude_ft % 100 != 0) {
    throw std::invalid_argument("altitude must be a positive multiple of 100 ft");
  }
  auto digits_of = [](int value) {
    std::string out;
    for (char c : std::to_string(value)) {
      if (!out.empty()) out += ' ';
      out += digit_word(c);
    }
    return out;
  };
  if (altitude_ft >= 18000) {
    const int level = altitude_ft / 100;
    std::string out = "flight level";
    const std::string padded = (level < 100 ? "0" : "") + std::to_string(level);
    for (char c : padded) {
      out += ' ';
      out += digit_word(c);
    }
    return out;
  }
  const int thousands = altitude_ft / 1000;
  const int hundreds = (altitude_ft % 1000) / 100;
  std::string out;
  if (thousands > 0) out = digits_of(thousands) + " thousand";
  if (hundreds > 0) {
    if (!out.empty()) out += ' ';
    out += std::string(digit_word(static_cast<char>('0' + hundreds))) + " hundred";
  }
  return out;
}

namespace {

std::string instruction_body(const Instruction& in) {
  auto need_runway = [&]() -> std::string {
    if (!in.runway) throw std::invalid_argument(std::string(to_string(in.action)) + " requires a runway");
    return speak_runway(*in.runway);
  };
  auto need_altitude = [&]() -> std::string {
    if (!in.altitude_ft) throw std::invalid_argument(std::string(to_string(in.action)) + " requires an altitude");
    return speak_altitude(*in.altitude_ft);
  };
  switch (in.action) {
    case Action::cleared_for_takeoff: return "cleared for takeoff runway " + need_runway();
    case Action::cleared_to_land: return "cleared to land runway " + need_runway();
    case Action::hold_short: return "hold short runway " + need_runway();
    case Action::line_up_and_wait: return "line up and wait runway " + need_runway();
    case Action::cancel_takeoff_clearance: return "cancel takeoff clearance";
    case Action::climb_maintain: return "climb and maintain " + need_altitude();
    case Action::descend_maintain: return "descend and maintain " + need_altitude();
    case Action::go_around: return "go around";
    case Action::proceed: return "proceed";
    case Action::stop: return "hold position";
  }
  return {};
}

}  // namespace

std::string render_instruction(const Instruction& instruction) {
  return instruction.callsign + ", " + instruction_body(instruction);
}

std::string render_readback(const Instruction& instruction) {
  return instruction_body(instruction) + ", " + instruction.callsign;
}

}  // namespace hilt
