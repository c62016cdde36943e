#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hilt/scenario.hpp"

namespace hilt::test {

inline std::filesystem::path source_dir() { return HILT_SOURCE_DIR; }
inline std::filesystem::path scenario_root() { return source_dir() / "scenarios"; }

inline ScenarioSpec scenario(const std::string& family, const std::string& name) {
  return load_scenario(scenario_root() / family / (name + ".json"));
}

inline ScenarioSpec nominal_fixture() { return load_scenario(source_dir() / "tests" / "fixtures" / "S01A-nominal.json"); }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<nlohmann::json> load_corpus() {
  std::vector<nlohmann::json> out;
  std::ifstream in(source_dir() / "data" / "phraseology_corpus.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace hilt::test
