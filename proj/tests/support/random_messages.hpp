// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <random>

#include "simtrace/wire/message.hpp"

namespace simtrace::testing {

inline double random_double(std::mt19937_64& g) {
    switch (g() % 4) {
        case 0: return std::bit_cast<double>(g() & 0x7FEFFFFFFFFFFFFFull);  // any finite bit pattern
        case 1: return -0.0;
        default: return std::normal_distribution<double>(0, 100)(g);
    }
}

inline std::string random_string(std::mt19937_64& g) {
    std::string s(g() % 24, ' ');
    for (auto& c : s) c = static_cast<char>(g() % 256);
    return s;
}

inline Value random_value(std::mt19937_64& g) {
    switch (g() % 5) {
        case 0: return random_double(g);
        case 1: return static_cast<std::int64_t>(g());
        case 2: return g() % 2 == 0;
        case 3: return random_string(g);
        default: {
            TensorValue t;
            t.shape.resize(g() % 4);
            for (auto& d : t.shape) d = static_cast<std::uint32_t>(g() % 4);
            t.data.resize(t.element_count());
            for (auto& x : t.data) x = random_double(g);
            return t;
        }
    }
}

inline Distribution random_distribution(std::mt19937_64& g) {
    std::uniform_real_distribution<double> u(-5, 5);
    std::uniform_real_distribution<double> pos(0.01, 5);
    switch (g() % 6) {
        case 0: {
            const double lo = u(g);
            return Distribution::uniform(lo, lo + pos(g));
        }
        case 1: return Distribution::normal(u(g), pos(g));
        case 2: {
            const double lo = u(g);
            return Distribution::truncated_normal(u(g), pos(g), lo, lo + pos(g));
        }
        case 3: {
            std::vector<double> p(1 + g() % 6);
            double sum = 0;
            for (auto& x : p) sum += (x = pos(g));
            for (auto& x : p) x /= sum;
            return Distribution::categorical(p);
        }
        case 4: return Distribution::poisson(pos(g));
        default: {
            std::vector<double> m(1 + g() % 5), s(m.size());
            for (auto& x : m) x = u(g);
            for (auto& x : s) x = pos(g);
            return Distribution::mvn_diag(m, s);
        }
    }
}

inline wire::Message random_message(std::mt19937_64& g) {
    using namespace wire;
    switch (g() % 8) {
        case 0: return Handshake{static_cast<std::uint8_t>(g()), random_string(g)};
        case 1: return HandshakeResult{static_cast<std::uint8_t>(g()), random_string(g), random_string(g)};
        case 2: {
            Run r;
            if (g() % 2) r.observation = random_value(g);
            return r;
        }
        case 3: return RunResult{random_value(g)};
        case 4:
            return SampleRequest{"a/" + random_string(g), random_string(g), random_distribution(g), g() % 2 == 0,
                                 g() % 2 == 0};
        case 5: return SampleReply{random_value(g)};
        case 6: return ObserveNotify{"o/" + random_string(g), random_distribution(g), random_value(g)};
        default: return ObserveAck{};
    }
}

}  // namespace simtrace::testing
