// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/sim/model.hpp"

#include "simtrace/wire/session.hpp"

namespace simtrace::sim {

ModelContext::ModelContext(FrameStream& stream, std::optional<Value> observation, AddressCache& cache)
    : stream_(stream), observation_(std::move(observation)), cache_(cache) {}

std::string ModelContext::current_address(DistTag tag) {
    if (frames_.empty()) {
        const std::vector<std::string> root{"<root>"};
        return cache_.resolve(root, tag);
    }
    return cache_.resolve(frames_, tag);
}

Value ModelContext::sample(const Distribution& dist, const std::string& name, bool control, bool replace) {
    stream_.send(wire::SampleRequest{current_address(dist.tag), name, dist, control, replace});
    auto reply = stream_.recv();
    auto* r = std::get_if<wire::SampleReply>(&reply);
    if (!r) throw wire::SessionError(wire::SessionState::AwaitingSampleReply, wire::kind_of(reply), {wire::MessageKind::SampleReply});
    return std::move(r->value);
}

void ModelContext::observe(const Distribution& dist, const Value& generated) {
    stream_.send(wire::ObserveNotify{current_address(dist.tag), dist, observation_ ? *observation_ : generated});
    auto reply = stream_.recv();
    if (!std::holds_alternative<wire::ObserveAck>(reply)) {
        throw wire::SessionError(wire::SessionState::AwaitingObserveAck, wire::kind_of(reply), {wire::MessageKind::ObserveAck});
    }
}

void serve(FrameStream& stream, Model& model) {
    AddressCache cache;
    auto state = wire::SessionState::AwaitingHandshake;
    try {
        wire::Message m;
        while (stream.try_recv(m)) {
            state = wire::session_step(state, m);
            if (std::holds_alternative<wire::Handshake>(m)) {
                wire::Message reply = wire::HandshakeResult{wire::kProtocolVersion, "simtrace-sim", model.name()};
                state = wire::session_step(state, reply);
                stream.send(reply);
            } else if (auto* run = std::get_if<wire::Run>(&m)) {
                ModelContext ctx(stream, run->observation, cache);
                Value result = model.run(ctx);
                state = wire::session_step(wire::SessionState::InRun, wire::MessageKind::RunResult);
                stream.send(wire::RunResult{std::move(result)});
            }
        }
    } catch (const std::exception&) {
        stream.close();
        throw;
    }
}

}  // namespace simtrace::sim
