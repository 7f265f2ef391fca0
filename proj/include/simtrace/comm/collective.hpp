// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simtrace::comm {

// A peer disconnected or a socket failed inside a collective call.
class CollectiveAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Ranks disagree on the parameter layout.
class LayoutMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Blocking collectives over a fixed group of workers. Every rank must make the
// same sequence of calls with the same buffer sizes.
class Collective {
public:
    virtual ~Collective() = default;

    virtual std::uint32_t rank() const = 0;
    virtual std::uint32_t world_size() const = 0;

    // In place; every rank ends with the bit-identical elementwise mean.
    virtual void allreduce_mean(std::span<double> buffer) = 0;
    // In place bitwise OR.
    virtual void allreduce_or(std::span<std::uint8_t> bits) = 0;
    // Copies root's bytes to every rank.
    virtual void broadcast(std::span<std::uint8_t> bytes, std::uint32_t root) = 0;

    // Frames this rank has sent so far.
    virtual std::uint64_t messages_sent() const = 0;

    double allreduce_scalar(double x);
    void broadcast(std::span<double> values, std::uint32_t root);
    // Throws LayoutMismatch on every rank unless all hashes agree.
    void verify_layout(std::uint64_t layout_hash);
    void barrier();
};

class SingleProcess final : public Collective {
public:
    std::uint32_t rank() const override { return 0; }
    std::uint32_t world_size() const override { return 1; }
    void allreduce_mean(std::span<double>) override {}
    void allreduce_or(std::span<std::uint8_t>) override {}
    void broadcast(std::span<std::uint8_t>, std::uint32_t) override {}
    std::uint64_t messages_sent() const override { return 0; }
};

// Ring of TCP connections. Rank r sends to r+1 and receives from r-1.
class TcpRing final : public Collective {
public:
    // Rank 0 listens on rendezvous ("host:port"); the others connect to it,
    // exchange their own listening ports and then wire up the ring.
    static std::unique_ptr<TcpRing> join(std::uint32_t rank, std::uint32_t world_size, const std::string& rendezvous,
                                         std::chrono::milliseconds timeout = std::chrono::seconds(60));
    ~TcpRing() override;

    std::uint32_t rank() const override { return rank_; }
    std::uint32_t world_size() const override { return world_; }
    void allreduce_mean(std::span<double> buffer) override;
    void allreduce_or(std::span<std::uint8_t> bits) override;
    void broadcast(std::span<std::uint8_t> bytes, std::uint32_t root) override;
    std::uint64_t messages_sent() const override { return sent_; }

    // Closes both ring sockets; later calls on any rank throw CollectiveAborted.
    void close();

private:
    TcpRing(std::uint32_t rank, std::uint32_t world, int next_fd, int prev_fd)
        : rank_(rank), world_(world), next_(next_fd), prev_(prev_fd) {}
    // Sends to next and receives from prev concurrently.
    void exchange(std::span<const std::uint8_t> out, std::span<std::uint8_t> in, bool do_send, bool do_recv);

    std::uint32_t rank_, world_;
    int next_, prev_;
    std::uint64_t sent_ = 0;
};

// SingleProcess for world_size 1, otherwise TcpRing::join.
std::unique_ptr<Collective> make_group(std::uint32_t rank, std::uint32_t world_size, const std::string& rendezvous);

// Bitwise OR of per-rank presence flags.
std::vector<bool> allreduce_presence(Collective& group, const std::vector<bool>& present);

struct ExchangeStats {
    std::size_t present_tensors = 0;  // union over ranks
    std::size_t buffer_values = 0;
};

// Averages optional per-tensor gradients over ranks. Tensors missing locally
// but present elsewhere are zero-filled; tensors missing everywhere come back
// as zeros. sizes[i] is the element count of tensor i. One buffer per call.
std::vector<std::vector<double>> average_gradients(Collective& group,
                                                   const std::vector<std::optional<std::vector<double>>>& grads,
                                                   const std::vector<std::size_t>& sizes, ExchangeStats* stats = nullptr);

}  // namespace simtrace::comm
