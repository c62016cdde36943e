#pragma once

// HTTP/JSON clients for externally hosted ASR, vision, decision and NLG
// services. Every call is bounded by the plugin's timeout; a failure is
// reported to the caller, which falls back to the built-in module.

#include <map>
#include <memory>

#include "hilt/plugins.hpp"

namespace hilt {

std::unique_ptr<AsrPlugin> make_http_asr(const PluginConfig& config);          // POST {base_url}/transcribe
std::unique_ptr<VisionPlugin> make_http_vision(const PluginConfig& config);    // POST {base_url}/detect
std::unique_ptr<DecisionPlugin> make_http_decision(const PluginConfig& config);  // POST {base_url}/decide
std::unique_ptr<NlgPlugin> make_http_nlg(const PluginConfig& config);          // POST {base_url}/rewrite

/// Owns the clients for one run. Disabled roles stay null.
struct PluginClients {
  std::unique_ptr<AsrPlugin> asr;
  std::unique_ptr<VisionPlugin> vision;
  std::unique_ptr<DecisionPlugin> decision;
  std::unique_ptr<NlgPlugin> nlg;

  PluginSet set() const { return {asr.get(), vision.get(), decision.get(), nlg.get()}; }
};

PluginClients make_plugin_clients(const std::map<PluginRole, PluginConfig>& configs);

}  // namespace hilt
