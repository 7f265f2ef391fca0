// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/sim/gateway.hpp"

#include "simtrace/wire/session.hpp"

namespace simtrace::sim {

Trace Gateway::execute(const std::optional<Value>& observation, SamplingPolicy& policy, std::uint64_t seed,
                       std::uint64_t run_index) {
    if (!endpoint_.connected()) endpoint_.connect();
    try {
        return run_once(observation, policy, seed, run_index);
    } catch (...) {
        endpoint_.close();
        throw;
    }
}

Trace Gateway::run_once(const std::optional<Value>& observation, SamplingPolicy& policy, std::uint64_t seed,
                        std::uint64_t run_index) {
    auto& stream = endpoint_.stream();
    auto& state = endpoint_.state;
    const auto timeout = endpoint_.timeout();
    auto send = [&](wire::Message m) {
        state = wire::session_step(state, m);
        stream.send(m);
    };

    policy.begin_run(observation);
    send(wire::Run{observation});
    TraceBuilder builder;
    std::uint64_t draw_index = 0;
    for (;;) {
        auto m = stream.recv(timeout);
        state = wire::session_step(state, m);
        if (auto* req = std::get_if<wire::SampleRequest>(&m)) {
            const Address addr{req->address, builder.peek_instance(req->address, req->replace)};
            const SiteInfo site{addr, req->name, req->distribution, req->control, req->replace};
            CounterRng rng(seed, run_index, draw_index++);
            Draw d = policy.draw(site, rng);
            send(wire::SampleReply{d.value});
            builder.add_sample(req->address, std::move(req->name), std::move(req->distribution), std::move(d.value),
                               req->control, req->replace);
            auto& e = builder.last();
            e.proposed = d.proposed;
            e.log_q = d.log_q;
            e.reused = d.reused;
        } else if (auto* obs = std::get_if<wire::ObserveNotify>(&m)) {
            CounterRng rng(seed, run_index, draw_index++);
            Value y = obs->observed_value;
            if (!observation && options_.observe_noise) {
                y = obs->distribution.sample(rng);
                // Keep the simulator's tensor shape for the noisy draw.
                if (y.is_tensor() && obs->observed_value.is_tensor() &&
                    obs->observed_value.as_tensor().element_count() == y.as_tensor().data.size()) {
                    y = TensorValue{obs->observed_value.as_tensor().shape, y.as_tensor().data};
                }
            }
            builder.add_observe(obs->address, std::move(obs->distribution), std::move(y));
            send(wire::ObserveAck{});
        } else if (auto* res = std::get_if<wire::RunResult>(&m)) {
            return builder.finish(std::move(res->result), observation);
        }
    }
}

std::vector<Trace> sample_prior(SimulatorEndpoint& endpoint, std::size_t n, std::uint64_t seed, GatewayOptions options) {
    Gateway gw(endpoint, options);
    PriorPolicy prior;
    std::vector<Trace> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(gw.execute(std::nullopt, prior, seed, i));
    return out;
}

}  // namespace simtrace::sim
