// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtrace/wire/message.hpp"

namespace simtrace::wire {

// Shared view of a session; controller and simulator walk the same machine.
enum class SessionState : std::uint8_t {
    AwaitingHandshake,
    AwaitingHandshakeResult,
    AwaitingRun,
    InRun,
    AwaitingSampleReply,
    AwaitingObserveAck,
};

std::string to_string(SessionState s);

class SessionError : public std::runtime_error {
public:
    SessionError(SessionState state, MessageKind got, std::vector<MessageKind> expected);
    SessionState state() const { return state_; }
    MessageKind got() const { return got_; }
    const std::vector<MessageKind>& expected() const { return expected_; }

private:
    SessionState state_;
    MessageKind got_;
    std::vector<MessageKind> expected_;
};

// Kinds legal in state `s`.
std::vector<MessageKind> expected_kinds(SessionState s);

// Throws SessionError for out-of-order messages.
SessionState session_step(SessionState s, MessageKind kind);
inline SessionState session_step(SessionState s, const Message& m) { return session_step(s, kind_of(m)); }

// A complete transcript starts from AwaitingHandshake and ends between runs.
void validate_transcript(std::span<const Message> transcript);

}  // namespace simtrace::wire
