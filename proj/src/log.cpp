#include "adresp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace adresp::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& sink_slot() {
  static Sink s;
  return s;
}

std::atomic<bool> g_enabled{false};

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  g_enabled = static_cast<bool>(sink);
  sink_slot() = std::move(sink);
}

Sink stderr_sink() {
  return [](const nlohmann::json& record) { std::cerr << record.dump() << '\n'; };
}

bool enabled() noexcept { return g_enabled.load(std::memory_order_relaxed); }

void emit(std::string_view event, nlohmann::json fields) {
  if (!enabled()) return;
  fields["event"] = event;
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) sink_slot()(fields);
}

}  // namespace adresp::log
