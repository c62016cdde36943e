#pragma once

#include <optional>
#include <string_view>

namespace hilt {

/// Advisory grades; the integer value is the severity level.
enum class Severity { INFO = 1, ADVISORY = 2, CAUTION = 3, WARNING = 4 };

inline int level(Severity s) { return static_cast<int>(s); }

inline std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::INFO: return "INFO";
    case Severity::ADVISORY: return "ADVISORY";
    case Severity::CAUTION: return "CAUTION";
    case Severity::WARNING: return "WARNING";
  }
  return "INFO";
}

inline std::optional<Severity> severity_from_string(std::string_view text) {
  if (text == "INFO") return Severity::INFO;
  if (text == "ADVISORY") return Severity::ADVISORY;
  if (text == "CAUTION") return Severity::CAUTION;
  if (text == "WARNING") return Severity::WARNING;
  return std::nullopt;
}

}  // namespace hilt
