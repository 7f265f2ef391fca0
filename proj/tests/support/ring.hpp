// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "simtrace/comm/collective.hpp"

namespace simtrace::testing {

// A loopback address with a port that was free a moment ago.
inline std::string free_rendezvous() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
    socklen_t len = sizeof a;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
    ::close(fd);
    return "127.0.0.1:" + std::to_string(ntohs(a.sin_port));
}

// Runs body(group) on `world` threads joined into one ring and rethrows the
// first failure after all threads finish.
inline void run_ring(std::uint32_t world, const std::function<void(simtrace::comm::Collective&)>& body) {
    const auto rv = free_rendezvous();
    std::vector<std::exception_ptr> errors(world);
    std::vector<std::thread> threads;
    for (std::uint32_t r = 0; r < world; ++r) {
        threads.emplace_back([&, r] {
            try {
                auto group = simtrace::comm::make_group(r, world, rv);
                body(*group);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace simtrace::testing
