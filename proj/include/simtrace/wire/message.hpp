// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "simtrace/wire/distribution.hpp"
#include "simtrace/wire/value.hpp"

namespace simtrace::wire {

inline constexpr std::uint8_t kProtocolVersion = 1;

enum class MessageKind : std::uint8_t {
    Handshake = 1,
    HandshakeResult = 2,
    Run = 3,
    RunResult = 4,
    SampleRequest = 5,
    SampleReply = 6,
    ObserveNotify = 7,
    ObserveAck = 8,
};

std::string to_string(MessageKind kind);

struct Handshake {
    std::uint8_t version = kProtocolVersion;
    std::string system_name;
    friend bool operator==(const Handshake&, const Handshake&) = default;
};

struct HandshakeResult {
    std::uint8_t version = kProtocolVersion;
    std::string system_name;
    std::string model_name;
    friend bool operator==(const HandshakeResult&, const HandshakeResult&) = default;
};

struct Run {
    std::optional<Value> observation;
    friend bool operator==(const Run&, const Run&) = default;
};

struct RunResult {
    Value result;
    friend bool operator==(const RunResult&, const RunResult&) = default;
};

struct SampleRequest {
    std::string address;
    std::string name;
    Distribution distribution;
    bool control = true;
    bool replace = false;
    friend bool operator==(const SampleRequest&, const SampleRequest&) = default;
};

struct SampleReply {
    Value value;
    friend bool operator==(const SampleReply&, const SampleReply&) = default;
};

struct ObserveNotify {
    std::string address;
    Distribution distribution;
    Value observed_value;
    friend bool operator==(const ObserveNotify&, const ObserveNotify&) = default;
};

struct ObserveAck {
    friend bool operator==(const ObserveAck&, const ObserveAck&) = default;
};

// Alternative order matches MessageKind: kind byte = index + 1.
using Message = std::variant<Handshake, HandshakeResult, Run, RunResult, SampleRequest, SampleReply,
                             ObserveNotify, ObserveAck>;

inline MessageKind kind_of(const Message& m) { return static_cast<MessageKind>(m.index() + 1); }

}  // namespace simtrace::wire
