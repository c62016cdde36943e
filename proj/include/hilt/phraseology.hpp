#pragma once

// Slot-based phraseology parser and renderer for the closed ATC grammar used
// by the scenario suite: callsign, action, runway and altitude slots.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hilt {

enum class Action {
  cleared_for_takeoff,
  cleared_to_land,
  hold_short,
  line_up_and_wait,
  cancel_takeoff_clearance,
  climb_maintain,
  descend_maintain,
  go_around,
  proceed,
  stop,
};

inline constexpr std::array kAllActions = {
    Action::cleared_for_takeoff, Action::cleared_to_land,          Action::hold_short,
    Action::line_up_and_wait,    Action::cancel_takeoff_clearance, Action::climb_maintain,
    Action::descend_maintain,    Action::go_around,                Action::proceed,
    Action::stop,
};

std::string_view to_string(Action action);
std::optional<Action> action_from_string(std::string_view text);
bool is_runway_scoped(Action action);
bool is_altitude_scoped(Action action);
/// Clearances that authorize runway entry.
bool grants_runway_authorization(Action action);

/// Non-instruction utterances recognised by the parser.
enum class Acknowledgement { none, roger, wilco, say_again, unable, affirm };
std::string_view to_string(Acknowledgement ack);

struct ParsedSlots {
  std::optional<std::string> callsign;
  std::optional<Action> action;
  std::optional<std::string> runway;
  std::optional<int> altitude_ft;
  double slot_conf = 0.0;
  bool ambiguous_recipient = false;
  Acknowledgement ack = Acknowledgement::none;

  // Per-slot match quality in [0, 1]; 0 when the slot is absent.
  double callsign_quality = 0.0;
  double action_quality = 0.0;
  double runway_quality = 0.0;
  double altitude_quality = 0.0;

  bool operator==(const ParsedSlots&) const = default;
};

/// Any string is accepted; unparseable text yields slot_conf 0.
ParsedSlots parse_phraseology(std::string_view transcript);

/// Recomputes slot_conf from the per-slot qualities.
double compute_slot_conf(const ParsedSlots& slots);

struct RecipientMatch {
  std::optional<std::string> callsign;
  double quality = 0.0;
  bool ambiguous = false;
};

/// Matches a heard callsign against a roster by character edit distance (<= 2).
RecipientMatch match_callsign(std::string_view heard, std::span<const std::string> roster);
/// Applies roster matching to parsed slots, updating callsign, quality,
/// ambiguity and slot_conf.
ParsedSlots resolve_recipient(ParsedSlots slots, std::span<const std::string> roster);

// ---------------------------------------------------------------------------
// Lexicon and rendering

struct DigitWord {
  std::string_view word;
  char digit;
};
/// Spoken digit vocabulary including ICAO forms ("niner", "tree", "fife").
std::span<const DigitWord> digit_lexicon();
std::optional<char> digit_of(std::string_view word);
/// Canonical spoken word for a digit ('9' -> "nine").
std::string_view digit_word(char digit);

/// Substitution sets used by the channel noise model.
std::span<const std::vector<std::string_view>> digit_confusion_sets();
/// All confusable alternatives for a digit word (empty if none).
std::vector<std::string_view> digit_confusions(std::string_view word);

struct ActionPhrase {
  Action action;
  std::vector<std::string_view> words;
  std::string_view anchor;
};
/// Grammar phrases in match-priority order.
std::span<const ActionPhrase> action_phrases();

/// "19" -> "one nine", "01L" -> "zero one left".
std::string speak_runway(std::string_view token);
/// 5000 -> "five thousand", 10500 -> "one zero thousand five hundred",
/// 24000 -> "flight level two four zero".
std::string speak_altitude(int altitude_ft);

struct Instruction {
  std::string callsign;
  Action action;
  std::optional<std::string> runway;
  std::optional<int> altitude_ft;
};

/// Controller form: "N123AB, cleared for takeoff runway one nine".
std::string render_instruction(const Instruction& instruction);
/// Pilot readback form: "cleared for takeoff runway one nine, N123AB".
std::string render_readback(const Instruction& instruction);

/// Lower-cased words with punctuation stripped.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace hilt
