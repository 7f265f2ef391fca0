// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/wire/session.hpp"

namespace simtrace::wire {

namespace {

std::string describe(SessionState s, MessageKind got, const std::vector<MessageKind>& expected) {
    std::string msg = "unexpected " + to_string(got) + " in state " + to_string(s) + "; expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i) msg += " or ";
        msg += to_string(expected[i]);
    }
    return msg;
}

}  // namespace

std::string to_string(SessionState s) {
    switch (s) {
        case SessionState::AwaitingHandshake: return "AwaitingHandshake";
        case SessionState::AwaitingHandshakeResult: return "AwaitingHandshakeResult";
        case SessionState::AwaitingRun: return "AwaitingRun";
        case SessionState::InRun: return "InRun";
        case SessionState::AwaitingSampleReply: return "AwaitingSampleReply";
        case SessionState::AwaitingObserveAck: return "AwaitingObserveAck";
    }
    return "Unknown";
}

SessionError::SessionError(SessionState state, MessageKind got, std::vector<MessageKind> expected)
    : std::runtime_error(describe(state, got, expected)), state_(state), got_(got), expected_(std::move(expected)) {}

std::vector<MessageKind> expected_kinds(SessionState s) {
    using K = MessageKind;
    switch (s) {
        case SessionState::AwaitingHandshake: return {K::Handshake};
        case SessionState::AwaitingHandshakeResult: return {K::HandshakeResult};
        case SessionState::AwaitingRun: return {K::Run};
        case SessionState::InRun: return {K::SampleRequest, K::ObserveNotify, K::RunResult};
        case SessionState::AwaitingSampleReply: return {K::SampleReply};
        case SessionState::AwaitingObserveAck: return {K::ObserveAck};
    }
    return {};
}

SessionState session_step(SessionState s, MessageKind kind) {
    using K = MessageKind;
    using S = SessionState;
    switch (s) {
        case S::AwaitingHandshake:
            if (kind == K::Handshake) return S::AwaitingHandshakeResult;
            break;
        case S::AwaitingHandshakeResult:
            if (kind == K::HandshakeResult) return S::AwaitingRun;
            break;
        case S::AwaitingRun:
            if (kind == K::Run) return S::InRun;
            break;
        case S::InRun:
            if (kind == K::SampleRequest) return S::AwaitingSampleReply;
            if (kind == K::ObserveNotify) return S::AwaitingObserveAck;
            if (kind == K::RunResult) return S::AwaitingRun;
            break;
        case S::AwaitingSampleReply:
            if (kind == K::SampleReply) return S::InRun;
            break;
        case S::AwaitingObserveAck:
            if (kind == K::ObserveAck) return S::InRun;
            break;
    }
    throw SessionError(s, kind, expected_kinds(s));
}

void validate_transcript(std::span<const Message> transcript) {
    auto s = SessionState::AwaitingHandshake;
    for (const auto& m : transcript) s = session_step(s, m);
    if (s != SessionState::AwaitingRun) {
        throw std::runtime_error("transcript ends in state " + to_string(s) + "; expected AwaitingRun");
    }
}

}  // namespace simtrace::wire
