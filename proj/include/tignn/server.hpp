/*
 * Copyright 2026 The tignn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "tignn/session.hpp"

#include <atomic>
#include <functional>
#include <iosfwd>
#include <string>

namespace tignn {

struct ServeOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  long max_ticks = 0;          // 0 runs until stopped
  bool handle_signals = true;  // SIGINT / SIGTERM stop the loop
  std::ostream* log = nullptr;
  // Called once the socket listens, with the bound port.
  std::function<void(unsigned short)> on_listening;
  // Set from any thread to stop the loop after the current tick.
  std::atomic<bool>* stop = nullptr;
};

// Runs the WebSocket session loop: hello on connect, one frame broadcast
// per tick, inbound messages applied between ticks. Ticks are paced at
// config().tick_hz. Throws IoError if the endpoint cannot be bound.
void serve(Session& session, const ServeOptions& options);

}  // namespace tignn
