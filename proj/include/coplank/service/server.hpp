/*
 * Copyright 2026 The coplank Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// HTTP + WebSocket front end for live sessions.
//
//   GET  /sessions            list live sessions
//   POST /sessions            {"checkpoint": "<name>"} -> {"id": ..., "ws": "/sessions/<id>/ws"}
//   GET  /sessions/<id>/ws    WebSocket upgrade, one client per session
//
// Each session runs its own control thread. The network thread and the
// control threads exchange only the latest inbound command and the latest
// outbound frame, so a slow client loses frames instead of delaying them.

#include "coplank/scenario.hpp"
#include "coplank/service/session.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace coplank::service {

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8080; ///< 0 picks a free port
    /// POST /sessions resolves checkpoint names inside this directory.
    std::filesystem::path checkpoint_dir = ".";
    Scenario scenario;
    SessionOptions session;
    /// Frame logs are written here when a session ends (empty: no logs).
    std::filesystem::path log_dir;
    /// Wall seconds per simulated second; below 1 runs faster than real time.
    double time_scale = 1.0;
    std::function<void(const std::string&)> log;
};

struct SessionInfo {
    std::string id;
    std::string checkpoint;
    Mode mode = Mode::Agent;
    std::int64_t frames = 0;
    bool connected = false;
};

class Server {
public:
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts the network thread. Throws IoError when binding fails.
    void start();
    /// Stops every session (writing frame logs) and the network thread.
    void stop();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();

    unsigned short port() const;

    /// Same as POST /sessions. Throws LoadError / ConfigError.
    std::string create_session(const std::string& checkpoint_name);
    std::vector<SessionInfo> sessions() const;

    struct Impl; ///< network state, shared with in-flight connections

private:
    std::shared_ptr<Impl> impl_;
};

/// Resolves a checkpoint name against a directory, accepting "name" or
/// "name.txt". Rejects names containing path separators. Throws LoadError.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& dir, const std::string& name);

} // namespace coplank::service
