#pragma once

#include <functional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace adresp::log {

/// Receives one structured record per event. The library emits nothing until
/// a sink is installed.
using Sink = std::function<void(const nlohmann::json&)>;

void set_sink(Sink sink);

/// Sink writing one JSON object per line to stderr.
Sink stderr_sink();

bool enabled() noexcept;

/// Adds {"event": name} to the fields and forwards them to the sink.
void emit(std::string_view event, nlohmann::json fields = nlohmann::json::object());

}  // namespace adresp::log
