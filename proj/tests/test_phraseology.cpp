#include <doctest.h>

#include <set>

#include "common.hpp"
#include "hilt/geometry.hpp"
#include "hilt/phraseology.hpp"

using namespace hilt;
using nlohmann::json;

namespace {

std::vector<std::string> all_runway_tokens() {
  std::vector<std::string> out;
  for (int n = 1; n <= 36; ++n) {
    char buf[4];
    std::snprintf(buf, sizeof buf, "%02d", n);
    out.emplace_back(buf);
    for (const char* side : {"L", "C", "R"}) out.push_back(std::string(buf) + side);
  }
  return out;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("reciprocal runway is an involution over all tokens") {
  for (const auto& t : all_runway_tokens()) {
    CHECK(reciprocal_runway(reciprocal_runway(t)) == t);
    CHECK(is_canonical_runway(reciprocal_runway(t)));
  }
  CHECK(reciprocal_runway("15") == "33");
  CHECK(reciprocal_runway("36") == "18");
  CHECK(reciprocal_runway("01L") == "19R");
  CHECK(reciprocal_runway("09C") == "27C");
}

TEST_CASE("canonical runway tokens") {
  CHECK(canonical_runway("01") == "01");
  CHECK(canonical_runway("19R") == "19R");
  CHECK_FALSE(canonical_runway("1"));
  CHECK_FALSE(canonical_runway("37"));
  CHECK_FALSE(canonical_runway("00"));
  CHECK(runway_number("27C") == 27);
}

TEST_CASE("runway frame helpers") {
  Runway r{"01/19", "01", "19", {0, 0, 0}, heading_vector(10.0) * 3000.0, 45.0};
  CHECK(r.length() == doctest::Approx(3000.0));
  CHECK(r.heading("01") == doctest::Approx(10.0));
  CHECK(r.heading("19") == doctest::Approx(190.0));
  const Vec3 p = r.point_at(1200.0, 15.0);
  CHECK(r.along(p) == doctest::Approx(1200.0));
  CHECK(r.cross_track(p) == doctest::Approx(15.0));
  CHECK(r.in_protected_area(p, 0.0));
  CHECK_FALSE(r.in_protected_area(r.point_at(1200.0, 40.0), 0.0));
  CHECK(r.in_protected_area(r.point_at(1200.0, 40.0), 30.0));
  CHECK_FALSE(r.in_protected_area(r.point_at(-10.0, 0.0), 30.0));
}

TEST_CASE("heading arithmetic") {
  CHECK(wrap_heading(-10.0) == doctest::Approx(350.0));
  CHECK(wrap_heading(720.0) == doctest::Approx(0.0));
  CHECK(heading_difference(10.0, 350.0) == doctest::Approx(20.0));
  CHECK(heading_difference(350.0, 10.0) == doctest::Approx(-20.0));
  CHECK(heading_of(heading_vector(123.0)) == doctest::Approx(123.0));
}

}

TEST_SUITE("phraseology") {

TEST_CASE("shipped corpus: every slot recovered on clean text") {
  const auto corpus = test::load_corpus();
  REQUIRE(corpus.size() >= 200);
  std::set<std::string> actions, runways;
  bool niner = false;
  for (const auto& row : corpus) {
    const std::string text = row["text"];
    CAPTURE(text);
    const ParsedSlots s = parse_phraseology(text);
    REQUIRE(s.action);
    CHECK(s.callsign == row["callsign"].get<std::string>());
    CHECK(to_string(*s.action) == row["action"].get<std::string>());
    if (row["runway"].is_null()) {
      CHECK_FALSE(s.runway);
    } else {
      CHECK(s.runway == row["runway"].get<std::string>());
      runways.insert(row["runway"].get<std::string>().substr(0, 2));
    }
    if (row["altitude_ft"].is_null()) {
      CHECK_FALSE(s.altitude_ft);
    } else {
      CHECK(s.altitude_ft == row["altitude_ft"].get<int>());
    }
    CHECK(s.slot_conf == doctest::Approx(1.0));
    actions.insert(row["action"].get<std::string>());
    niner = niner || text.find("niner") != std::string::npos;
  }
  CHECK(actions.size() == kAllActions.size());
  CHECK(runways.size() == 36);
  CHECK(niner);
}

TEST_CASE("shipped lexicon file matches the compiled lexicon") {
  const json lex = json::parse(test::read_text(test::source_dir() / "data" / "digit_lexicon.json"));
  std::set<std::pair<std::string, char>> file, compiled;
  for (const auto& e : lex["digits"]) file.insert({e["word"].get<std::string>(), e["digit"].get<std::string>()[0]});
  for (const auto& e : digit_lexicon()) compiled.insert({std::string(e.word), e.digit});
  CHECK(file == compiled);
  std::set<std::set<std::string>> fs, cs;
  for (const auto& set : lex["confusion_sets"]) fs.insert(set.get<std::set<std::string>>());
  for (const auto& set : digit_confusion_sets()) cs.insert(std::set<std::string>(set.begin(), set.end()));
  CHECK(fs == cs);
}

TEST_CASE("grammar file lists every compiled action phrase") {
  const json g = json::parse(test::read_text(test::source_dir() / "data" / "grammar.json"));
  std::set<std::pair<std::string, std::vector<std::string>>> file, compiled;
  for (const auto& a : g["actions"]) file.insert({a["action"], a["words"].get<std::vector<std::string>>()});
  for (const auto& p : action_phrases()) {
    compiled.insert({std::string(to_string(p.action)), std::vector<std::string>(p.words.begin(), p.words.end())});
  }
  CHECK(file == compiled);
}

TEST_CASE("render then parse recovers the instruction") {
  const char* callsigns[] = {"N123AB", "UAL88", "DAL1907"};
  int idx = 0;
  for (Action a : kAllActions) {
    std::vector<Instruction> cases;
    if (is_runway_scoped(a)) {
      for (const auto& rw : all_runway_tokens()) cases.push_back({callsigns[idx++ % 3], a, rw, {}});
    } else if (is_altitude_scoped(a)) {
      for (int ft = 1000; ft <= 45000; ft += 500) cases.push_back({callsigns[idx++ % 3], a, {}, ft});
    } else {
      cases.push_back({callsigns[idx++ % 3], a, {}, {}});
    }
    for (const auto& in : cases) {
      for (const std::string& text : {render_instruction(in), render_readback(in)}) {
        CAPTURE(text);
        const ParsedSlots s = parse_phraseology(text);
        REQUIRE(s.action);
        CHECK(*s.action == in.action);
        CHECK(s.callsign == in.callsign);
        CHECK(s.runway == in.runway);
        CHECK(s.altitude_ft == in.altitude_ft);
        CHECK(s.slot_conf == doctest::Approx(1.0));
      }
    }
  }
}

TEST_CASE("digit canonicalization over the whole lexicon") {
  for (const auto& e : digit_lexicon()) {
    CHECK(digit_of(e.word) == e.digit);
    CHECK(digit_of(std::string(1, e.digit)) == e.digit);
    CHECK(digit_word(e.digit).size() > 0);
  }
  CHECK(digit_of("niner") == '9');
  CHECK(digit_of("tree") == '3');
  CHECK(digit_of("fife") == '5');
  CHECK_FALSE(digit_of("nineteen"));

  CHECK(parse_phraseology("N1AB, cleared to land runway one niner").runway == "19");
  CHECK(parse_phraseology("N1AB, cleared to land runway 1 9").runway == "19");
  CHECK(parse_phraseology("N1AB, cleared to land runway 19").runway == "19");
  CHECK_FALSE(parse_phraseology("N1AB, cleared to land runway nineteen").runway);
}

TEST_CASE("acknowledgements are recognised without an action") {
  CHECK(parse_phraseology("say again, N123AB").ack == Acknowledgement::say_again);
  CHECK(parse_phraseology("roger, TOWER").ack == Acknowledgement::roger);
  CHECK(parse_phraseology("wilco").ack == Acknowledgement::wilco);
  const auto s = parse_phraseology("unable, N742CA");
  CHECK(s.ack == Acknowledgement::unable);
  CHECK_FALSE(s.action);
  CHECK(s.slot_conf == 0.0);
}

TEST_CASE("two different callsigns make the recipient ambiguous") {
  const auto s = parse_phraseology("N123AB N742CA cleared for takeoff runway zero one");
  CHECK(s.ambiguous_recipient);
  CHECK(s.slot_conf < 1.0);
}

TEST_CASE("missing words lower slot confidence") {
  const auto full = parse_phraseology("N123AB, cleared for takeoff runway zero one");
  const auto partial = parse_phraseology("N123AB, cleared takeoff runway zero one");
  const auto bare = parse_phraseology("N123AB, cleared for takeoff");
  CHECK(full.slot_conf == doctest::Approx(1.0));
  CHECK(partial.action == Action::cleared_for_takeoff);
  CHECK(partial.slot_conf < full.slot_conf);
  CHECK(bare.slot_conf < full.slot_conf);
  CHECK(parse_phraseology("").slot_conf == 0.0);
  CHECK(parse_phraseology("static noise").slot_conf == 0.0);
}

TEST_CASE("roster matching tolerates up to two character edits") {
  const std::vector<std::string> roster{"N123AB", "N742CA", "N5521K"};
  auto m = match_callsign("N123AB", roster);
  CHECK(m.callsign == "N123AB");
  CHECK(m.quality == 1.0);
  m = match_callsign("N123A", roster);
  CHECK(m.callsign == "N123AB");
  CHECK(m.quality == doctest::Approx(0.8));
  m = match_callsign("Q99ZZZ", roster);
  CHECK_FALSE(m.callsign);
  CHECK(m.ambiguous);

  ParsedSlots s = parse_phraseology("N123A, hold short runway one five");
  s = resolve_recipient(s, roster);
  CHECK(s.callsign == "N123AB");
  CHECK(s.slot_conf < 1.0);
}

TEST_CASE("speaking helpers") {
  CHECK(speak_runway("19") == "one nine");
  CHECK(speak_runway("01L") == "zero one left");
  CHECK(speak_altitude(5000) == "five thousand");
  CHECK(speak_altitude(10500) == "one zero thousand five hundred");
  CHECK(speak_altitude(24000) == "flight level two four zero");
  CHECK_THROWS(speak_runway("40"));
  CHECK_THROWS(speak_altitude(150));
  CHECK(render_instruction({"N123AB", Action::cleared_for_takeoff, "19", {}}) ==
        "N123AB, cleared for takeoff runway one nine");
  CHECK(render_readback({"N123AB", Action::cleared_for_takeoff, "19", {}}) ==
        "cleared for takeoff runway one nine, N123AB");
}

TEST_CASE("action names round-trip") {
  for (Action a : kAllActions) CHECK(action_from_string(to_string(a)) == a);
  CHECK_FALSE(action_from_string("barrel_roll"));
}

}
