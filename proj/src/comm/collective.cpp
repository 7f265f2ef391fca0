// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/comm/collective.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <functional>
#include <thread>

namespace simtrace::comm {

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void aborted(const std::string& what) {
    throw CollectiveAborted(what + (errno ? std::string(": ") + std::strerror(errno) : std::string()));
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
    return v;
}

void send_all(int fd, const void* data, std::size_t n) {
    auto p = static_cast<const std::uint8_t*>(data);
    while (n > 0) {
        const auto k = ::send(fd, p, n, MSG_NOSIGNAL);
        if (k < 0 && errno == EINTR) continue;
        if (k <= 0) aborted("collective send");
        p += k;
        n -= static_cast<std::size_t>(k);
    }
}

void recv_all(int fd, void* data, std::size_t n) {
    auto p = static_cast<std::uint8_t*>(data);
    while (n > 0) {
        const auto k = ::recv(fd, p, n, 0);
        if (k < 0 && errno == EINTR) continue;
        if (k == 0) {
            errno = 0;
            aborted("collective peer closed the connection");
        }
        if (k < 0) aborted("collective recv");
        p += k;
        n -= static_cast<std::size_t>(k);
    }
}

void tune(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos || colon + 1 == s.size()) throw std::invalid_argument("rendezvous must be host:port, got '" + s + "'");
    const auto port = std::stoul(s.substr(colon + 1));
    if (port > 65535) throw std::invalid_argument("rendezvous port out of range: " + s);
    return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
}

int listen_on(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
        throw CollectiveAborted("cannot resolve " + host);
    }
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const bool ok = ::bind(fd, res->ai_addr, res->ai_addrlen) == 0 && ::listen(fd, 64) == 0;
    ::freeaddrinfo(res);
    if (!ok) {
        const int e = errno;
        ::close(fd);
        errno = e;
        aborted("cannot listen on " + host + ":" + std::to_string(port));
    }
    return fd;
}

std::uint16_t bound_port(int fd) {
    sockaddr_in a{};
    socklen_t len = sizeof a;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
    return ntohs(a.sin_port);
}

// Retries until the listener is up or the deadline passes.
int connect_to(const std::string& host, std::uint16_t port, Clock::time_point deadline) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    for (;;) {
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) == 0) {
            const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
            const bool ok = ::connect(fd, res->ai_addr, res->ai_addrlen) == 0;
            ::freeaddrinfo(res);
            if (ok) {
                tune(fd);
                return fd;
            }
            ::close(fd);
        }
        if (Clock::now() > deadline) {
            errno = 0;
            aborted("cannot reach " + host + ":" + std::to_string(port));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

int accept_until(int listen_fd, Clock::time_point deadline, std::string* peer_ip = nullptr) {
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) {
            errno = 0;
            aborted("rendezvous timed out waiting for peers");
        }
        pollfd p{listen_fd, POLLIN, 0};
        if (::poll(&p, 1, static_cast<int>(left)) <= 0) continue;
        sockaddr_in a{};
        socklen_t len = sizeof a;
        const int fd = ::accept4(listen_fd, reinterpret_cast<sockaddr*>(&a), &len, SOCK_CLOEXEC);
        if (fd < 0) continue;
        tune(fd);
        if (peer_ip) {
            char buf[INET_ADDRSTRLEN] = {};
            ::inet_ntop(AF_INET, &a.sin_addr, buf, sizeof buf);
            *peer_ip = buf;
        }
        return fd;
    }
}

void send_string(int fd, const std::string& s) {
    std::uint8_t len[4];
    put_u32(len, static_cast<std::uint32_t>(s.size()));
    send_all(fd, len, 4);
    send_all(fd, s.data(), s.size());
}

std::string recv_string(int fd) {
    std::uint8_t len[4];
    recv_all(fd, len, 4);
    std::string s(get_u32(len), '\0');
    recv_all(fd, s.data(), s.size());
    return s;
}

// Chunk c of an n-element buffer split over w ranks.
std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::uint32_t w, std::uint32_t c) {
    return {n * c / w, n * (c + 1) / w};
}

}  // namespace

double Collective::allreduce_scalar(double x) {
    double v = x;
    allreduce_mean(std::span<double>(&v, 1));
    return v;
}

void Collective::broadcast(std::span<double> values, std::uint32_t root) {
    broadcast(std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(values.data()), values.size_bytes()), root);
}

void Collective::verify_layout(std::uint64_t layout_hash) {
    std::uint64_t root_hash = layout_hash;
    broadcast(std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(&root_hash), sizeof root_hash), 0);
    std::uint8_t mismatch = root_hash != layout_hash;
    allreduce_or(std::span<std::uint8_t>(&mismatch, 1));
    if (mismatch) throw LayoutMismatch("parameter layout differs between ranks");
}

void Collective::barrier() {
    std::uint8_t b = 0;
    allreduce_or(std::span<std::uint8_t>(&b, 1));
}

std::unique_ptr<TcpRing> TcpRing::join(std::uint32_t rank, std::uint32_t world, const std::string& rendezvous,
                                       std::chrono::milliseconds timeout) {
    if (world < 2) throw std::invalid_argument("TcpRing needs at least two ranks");
    if (rank >= world) throw std::invalid_argument("rank must be below world size");
    const auto [host, port] = split_host_port(rendezvous);
    const auto deadline = Clock::now() + timeout;

    std::vector<std::string> hosts(world);
    std::vector<std::uint16_t> ports(world);
    int ring_listen = -1;
    if (rank == 0) {
        ring_listen = listen_on(host, port);
        hosts[0] = host;
        ports[0] = port;
        std::vector<int> peers(world, -1);
        try {
            for (std::uint32_t k = 1; k < world; ++k) {
                std::string ip;
                const int fd = accept_until(ring_listen, deadline, &ip);
                std::uint8_t hello[8];
                recv_all(fd, hello, 8);
                const auto r = get_u32(hello);
                if (r == 0 || r >= world || peers[r] >= 0) {
                    ::close(fd);
                    errno = 0;
                    aborted("bad or duplicate rank " + std::to_string(r) + " at rendezvous");
                }
                peers[r] = fd;
                hosts[r] = ip;
                ports[r] = static_cast<std::uint16_t>(get_u32(hello + 4));
            }
            for (std::uint32_t r = 1; r < world; ++r) {
                for (std::uint32_t q = 0; q < world; ++q) {
                    send_string(peers[r], hosts[q]);
                    std::uint8_t p[4];
                    put_u32(p, ports[q]);
                    send_all(peers[r], p, 4);
                }
            }
        } catch (...) {
            for (int fd : peers) {
                if (fd >= 0) ::close(fd);
            }
            ::close(ring_listen);
            throw;
        }
        // Rendezvous connections close once every peer has its table; the
        // ring connections below go through the same listener.
        for (std::uint32_t r = 1; r < world; ++r) ::close(peers[r]);
    } else {
        ring_listen = listen_on("", 0);
        try {
            const int fd = connect_to(host, port, deadline);
            std::uint8_t hello[8];
            put_u32(hello, rank);
            put_u32(hello + 4, bound_port(ring_listen));
            send_all(fd, hello, 8);
            for (std::uint32_t q = 0; q < world; ++q) {
                hosts[q] = recv_string(fd);
                std::uint8_t p[4];
                recv_all(fd, p, 4);
                ports[q] = static_cast<std::uint16_t>(get_u32(p));
            }
            ::close(fd);
        } catch (...) {
            ::close(ring_listen);
            throw;
        }
    }

    const std::uint32_t next = (rank + 1) % world, prev = (rank + world - 1) % world;
    int next_fd = -1, prev_fd = -1;
    try {
        next_fd = connect_to(hosts[next], ports[next], deadline);
        std::uint8_t me[4];
        put_u32(me, rank);
        send_all(next_fd, me, 4);
        prev_fd = accept_until(ring_listen, deadline);
        std::uint8_t them[4];
        recv_all(prev_fd, them, 4);
        if (get_u32(them) != prev) {
            errno = 0;
            aborted("ring wiring error: expected rank " + std::to_string(prev));
        }
    } catch (...) {
        if (next_fd >= 0) ::close(next_fd);
        if (prev_fd >= 0) ::close(prev_fd);
        ::close(ring_listen);
        throw;
    }
    ::close(ring_listen);
    return std::unique_ptr<TcpRing>(new TcpRing(rank, world, next_fd, prev_fd));
}

TcpRing::~TcpRing() { close(); }

void TcpRing::close() {
    if (next_ >= 0) ::close(next_);
    if (prev_ >= 0) ::close(prev_);
    next_ = prev_ = -1;
}

void TcpRing::exchange(std::span<const std::uint8_t> out, std::span<std::uint8_t> in, bool do_send, bool do_recv) {
    if (next_ < 0 || prev_ < 0) {
        errno = 0;
        aborted("collective group is closed");
    }
    // Both directions carry a u32 length prefix so a desynchronised peer is
    // caught instead of silently misreading the stream.
    std::vector<std::uint8_t> head_out(4), head_in(4);
    put_u32(head_out.data(), static_cast<std::uint32_t>(out.size()));
    std::size_t sent = 0, got = 0;
    const std::size_t send_total = do_send ? out.size() + 4 : 0, recv_total = do_recv ? in.size() + 4 : 0;
    while (sent < send_total || got < recv_total) {
        pollfd fds[2];
        int n = 0;
        if (sent < send_total) fds[n++] = {next_, POLLOUT, 0};
        if (got < recv_total) fds[n++] = {prev_, POLLIN, 0};
        if (::poll(fds, static_cast<nfds_t>(n), -1) < 0) {
            if (errno == EINTR) continue;
            aborted("collective poll");
        }
        for (int i = 0; i < n; ++i) {
            if (fds[i].revents == 0) continue;
            if (fds[i].fd == next_ && sent < send_total) {
                const std::uint8_t* p = sent < 4 ? head_out.data() + sent : out.data() + (sent - 4);
                const std::size_t len = sent < 4 ? 4 - sent : send_total - sent;
                const auto k = ::send(next_, p, len, MSG_NOSIGNAL | MSG_DONTWAIT);
                if (k < 0 && (errno == EAGAIN || errno == EINTR)) continue;
                if (k <= 0) aborted("collective send");
                sent += static_cast<std::size_t>(k);
            } else if (fds[i].fd == prev_ && got < recv_total) {
                std::uint8_t* p = got < 4 ? head_in.data() + got : in.data() + (got - 4);
                const std::size_t len = got < 4 ? 4 - got : recv_total - got;
                const auto k = ::recv(prev_, p, len, MSG_DONTWAIT);
                if (k < 0 && (errno == EAGAIN || errno == EINTR)) continue;
                if (k == 0) {
                    errno = 0;
                    aborted("collective peer closed the connection");
                }
                if (k < 0) aborted("collective recv");
                got += static_cast<std::size_t>(k);
                if (got >= 4 && got - static_cast<std::size_t>(k) < 4 && get_u32(head_in.data()) != in.size()) {
                    errno = 0;
                    aborted("collective size mismatch: peer sent " + std::to_string(get_u32(head_in.data())) +
                            " bytes, expected " + std::to_string(in.size()));
                }
            }
        }
    }
    if (do_send) ++sent_;
}

namespace {

// Ring reduce-scatter followed by allgather. Chunk c is accumulated in ring
// order starting at rank c, then finished on its owner and passed around, so
// every rank ends with the same bits.
template <class T, class Op, class Finish>
void ring_allreduce(TcpRing& ring, std::span<T> buf, Op op, Finish finish,
                    const std::function<void(std::span<const std::uint8_t>, std::span<std::uint8_t>)>& exchange) {
    const auto w = ring.world_size(), r = ring.rank();
    const auto n = buf.size();
    std::vector<T> incoming;
    auto bytes = [](std::span<T> s) {
        return std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(s.data()), s.size_bytes());
    };
    auto part = [&](std::uint32_t c) {
        const auto [b, e] = chunk(n, w, c);
        return buf.subspan(b, e - b);
    };
    for (std::uint32_t s = 0; s + 1 < w; ++s) {
        auto out = part((r + w - s) % w);
        auto in = part((r + w - s - 1) % w);
        incoming.resize(in.size());
        exchange(bytes(out), bytes(std::span<T>(incoming)));
        for (std::size_t i = 0; i < in.size(); ++i) in[i] = op(incoming[i], in[i]);
    }
    auto own = part((r + 1) % w);
    for (auto& x : own) x = finish(x);
    for (std::uint32_t s = 0; s + 1 < w; ++s) {
        auto out = part((r + 1 + w - s) % w);
        auto in = part((r + w - s) % w);
        exchange(bytes(out), bytes(in));
    }
}

}  // namespace

void TcpRing::allreduce_mean(std::span<double> buffer) {
    const double w = static_cast<double>(world_);
    ring_allreduce<double>(
        *this, buffer, [](double acc, double mine) { return acc + mine; }, [w](double x) { return x / w; },
        [this](auto out, auto in) { exchange(out, in, true, true); });
}

void TcpRing::allreduce_or(std::span<std::uint8_t> bits) {
    ring_allreduce<std::uint8_t>(
        *this, bits, [](std::uint8_t a, std::uint8_t b) { return static_cast<std::uint8_t>(a | b); },
        [](std::uint8_t x) { return x; }, [this](auto out, auto in) { exchange(out, in, true, true); });
}

void TcpRing::broadcast(std::span<std::uint8_t> bytes, std::uint32_t root) {
    if (root >= world_) throw std::invalid_argument("broadcast root out of range");
    const auto hop = (rank_ + world_ - root) % world_;
    if (hop > 0) exchange({}, bytes, false, true);
    if (hop + 1 < world_) exchange(bytes, {}, true, false);
}

std::unique_ptr<Collective> make_group(std::uint32_t rank, std::uint32_t world_size, const std::string& rendezvous) {
    if (world_size == 0 || rank >= world_size) throw std::invalid_argument("need 0 <= rank < world_size");
    if (world_size == 1) return std::make_unique<SingleProcess>();
    return TcpRing::join(rank, world_size, rendezvous);
}

std::vector<bool> allreduce_presence(Collective& group, const std::vector<bool>& present) {
    std::vector<std::uint8_t> bits((present.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < present.size(); ++i) {
        if (present[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    group.allreduce_or(bits);
    std::vector<bool> out(present.size());
    for (std::size_t i = 0; i < present.size(); ++i) out[i] = (bits[i / 8] >> (i % 8)) & 1u;
    return out;
}

std::vector<std::vector<double>> average_gradients(Collective& group,
                                                   const std::vector<std::optional<std::vector<double>>>& grads,
                                                   const std::vector<std::size_t>& sizes, ExchangeStats* stats) {
    if (grads.size() != sizes.size()) throw std::invalid_argument("average_gradients: one size per tensor");
    std::vector<bool> local(grads.size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        local[i] = grads[i].has_value();
        if (local[i] && grads[i]->size() != sizes[i]) throw std::invalid_argument("average_gradients: size mismatch");
    }
    const auto present = allreduce_presence(group, local);
    std::vector<double> buffer;
    std::size_t count = 0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!present[i]) continue;
        ++count;
        if (grads[i]) {
            buffer.insert(buffer.end(), grads[i]->begin(), grads[i]->end());
        } else {
            buffer.insert(buffer.end(), sizes[i], 0.0);
        }
    }
    group.allreduce_mean(buffer);
    std::vector<std::vector<double>> out(grads.size());
    std::size_t at = 0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (present[i]) {
            out[i].assign(buffer.begin() + static_cast<std::ptrdiff_t>(at), buffer.begin() + static_cast<std::ptrdiff_t>(at + sizes[i]));
            at += sizes[i];
        } else {
            out[i].assign(sizes[i], 0.0);
        }
    }
    if (stats) {
        stats->present_tensors = count;
        stats->buffer_values = buffer.size();
    }
    return out;
}

}  // namespace simtrace::comm
