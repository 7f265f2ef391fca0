// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "simtrace/wire/codec.hpp"

namespace simtrace::sim {

class RunTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The peer closed the connection or the socket failed mid-session.
class RunAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Owns a connected stream socket and exchanges whole frames over it.
class FrameStream {
public:
    FrameStream() = default;
    explicit FrameStream(int fd) : fd_(fd) {}
    ~FrameStream();
    FrameStream(FrameStream&& o) noexcept;
    FrameStream& operator=(FrameStream&& o) noexcept;
    FrameStream(const FrameStream&) = delete;
    FrameStream& operator=(const FrameStream&) = delete;

    bool is_open() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close();
    // Shuts the socket down without releasing the descriptor.
    void shutdown();

    void send(const wire::Message& m);
    // Blocks until a full frame arrives. A negative timeout waits forever.
    // Throws RunTimeout, RunAborted (EOF or socket error) or wire::ProtocolError.
    wire::Message recv(std::chrono::milliseconds timeout = std::chrono::milliseconds(-1));
    // Like recv but returns false on a clean EOF at a frame boundary.
    bool try_recv(wire::Message& out, std::chrono::milliseconds timeout = std::chrono::milliseconds(-1));

    std::uint64_t frames_sent() const { return sent_; }
    std::uint64_t frames_received() const { return received_; }

private:
    bool fill(std::chrono::milliseconds timeout, bool eof_ok);

    int fd_ = -1;
    std::vector<std::uint8_t> in_;
    std::vector<std::uint8_t> out_;
    std::uint64_t sent_ = 0;
    std::uint64_t received_ = 0;
};

// Writes all bytes or throws RunAborted.
void write_all(int fd, const std::uint8_t* data, std::size_t n);

}  // namespace simtrace::sim
