// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "simtrace/sim/model.hpp"
#include "simtrace/sim/stream.hpp"
#include "simtrace/wire/session.hpp"

namespace simtrace::sim {

class EndpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parsed endpoint string:
//   spawn:<shell command>  child gets the socket as fd 3 (SIMTRACE_FD=3)
//   tcp:<host>:<port>      connect to a listening simulator
//   ipc:<path>             UNIX-domain socket
//   inproc:<model>         built-in model served from a thread over a socketpair
struct EndpointSpec {
    enum class Kind { Spawn, Tcp, Ipc, InProc };
    Kind kind = Kind::InProc;
    std::string target;  // command, path, model name, or host
    std::uint16_t port = 0;

    static EndpointSpec parse(const std::string& spec);
    std::string str() const;
};

// One simulator connection. Not thread-safe; one run in flight at a time.
class SimulatorEndpoint {
public:
    explicit SimulatorEndpoint(EndpointSpec spec, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    explicit SimulatorEndpoint(const std::string& spec, std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : SimulatorEndpoint(EndpointSpec::parse(spec), timeout) {}
    // In-process endpoint around an arbitrary model factory.
    SimulatorEndpoint(ModelFactory factory, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~SimulatorEndpoint();
    SimulatorEndpoint(const SimulatorEndpoint&) = delete;
    SimulatorEndpoint& operator=(const SimulatorEndpoint&) = delete;

    // Opens the connection and performs the handshake. Idempotent.
    void connect();
    void close();
    // Tears down and reconnects, e.g. after an aborted run.
    void reset();
    bool connected() const { return stream_.is_open() && handshaken_; }

    FrameStream& stream() { return stream_; }
    const wire::HandshakeResult& info() const { return info_; }
    const EndpointSpec& spec() const { return spec_; }
    std::chrono::milliseconds timeout() const { return timeout_; }
    std::uint64_t resets() const { return resets_; }

    // Session state tracked by the gateway.
    wire::SessionState state = wire::SessionState::AwaitingHandshake;

private:
    void open_transport();

    EndpointSpec spec_;
    ModelFactory factory_;
    std::chrono::milliseconds timeout_;
    FrameStream stream_;
    bool handshaken_ = false;
    wire::HandshakeResult info_;
    pid_t child_ = -1;
    std::thread server_;
    std::uint64_t resets_ = 0;
};

// Listening socket for tcp:/ipc: specs. Returns the fd; the bound TCP port is
// written to `bound_port` when non-null (port 0 picks a free one).
int listen_on(const EndpointSpec& spec, std::uint16_t* bound_port = nullptr);
// Blocks for one connection; returns the connected fd.
int accept_connection(int listen_fd);

}  // namespace simtrace::sim
