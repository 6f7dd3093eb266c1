#pragma once

#include <functional>
#include <string>

namespace qagent::log {

using Sink = std::function<void(const std::string&)>;

/// Routes warnings to `sink`; an empty sink restores the stderr default.
/// Returns the previous sink.
Sink set_warning_sink(Sink sink);

void warn(const std::string& message);

}  // namespace qagent::log
