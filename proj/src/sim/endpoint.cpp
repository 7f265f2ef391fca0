// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/sim/endpoint.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>

#include "simtrace/models/registry.hpp"

namespace simtrace::sim {

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void fail(const std::string& what) { throw EndpointError(what + ": " + std::strerror(errno)); }

sockaddr_un unix_address(const std::string& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) throw EndpointError("ipc path too long: " + path);
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    return addr;
}

int connect_ipc(const std::string& path) {
    const auto addr = unix_address(path);
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) fail("socket");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return -1;
    }
    return fd;
}

int connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
        throw EndpointError("cannot resolve host " + host);
    }
    int fd = -1;
    for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd >= 0) {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    return fd;
}

// Retries until the peer is listening or the deadline passes.
template <class F>
int connect_with_retry(F attempt, std::chrono::milliseconds timeout, const std::string& what) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        const int fd = attempt();
        if (fd >= 0) return fd;
        if (Clock::now() >= deadline) throw EndpointError("cannot connect to " + what);
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

}  // namespace

EndpointSpec EndpointSpec::parse(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw EndpointError("endpoint spec needs a scheme: " + spec);
    const auto scheme = spec.substr(0, colon);
    const auto rest = spec.substr(colon + 1);
    if (rest.empty()) throw EndpointError("empty endpoint target: " + spec);
    EndpointSpec out;
    if (scheme == "spawn") {
        out.kind = Kind::Spawn;
        out.target = rest;
    } else if (scheme == "ipc") {
        out.kind = Kind::Ipc;
        out.target = rest;
    } else if (scheme == "inproc") {
        out.kind = Kind::InProc;
        out.target = rest;
    } else if (scheme == "tcp") {
        out.kind = Kind::Tcp;
        const auto c = rest.rfind(':');
        if (c == std::string::npos) throw EndpointError("tcp endpoint needs host:port: " + spec);
        out.target = rest.substr(0, c);
        std::size_t used = 0;
        unsigned long port = 0;
        try {
            port = std::stoul(rest.substr(c + 1), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != rest.size() - c - 1 || port > 65535) throw EndpointError("bad tcp port: " + spec);
        out.port = static_cast<std::uint16_t>(port);
    } else {
        throw EndpointError("unknown endpoint scheme: " + scheme);
    }
    return out;
}

std::string EndpointSpec::str() const {
    switch (kind) {
        case Kind::Spawn: return "spawn:" + target;
        case Kind::Tcp: return "tcp:" + target + ":" + std::to_string(port);
        case Kind::Ipc: return "ipc:" + target;
        case Kind::InProc: return "inproc:" + target;
    }
    return {};
}

SimulatorEndpoint::SimulatorEndpoint(EndpointSpec spec, std::chrono::milliseconds timeout)
    : spec_(std::move(spec)), timeout_(timeout) {
    if (spec_.kind == EndpointSpec::Kind::InProc) {
        const auto name = spec_.target;
        models::make_model(name);  // fail fast on unknown names
        factory_ = [name] { return models::make_model(name); };
    }
}

SimulatorEndpoint::SimulatorEndpoint(ModelFactory factory, std::chrono::milliseconds timeout)
    : factory_(std::move(factory)), timeout_(timeout) {
    spec_.kind = EndpointSpec::Kind::InProc;
    spec_.target = "<custom>";
}

SimulatorEndpoint::~SimulatorEndpoint() { close(); }

void SimulatorEndpoint::open_transport() {
    switch (spec_.kind) {
        case EndpointSpec::Kind::Spawn: {
            int sv[2];
            if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) fail("socketpair");
            const std::string script = "SIMTRACE_FD=3 exec " + spec_.target;
            const pid_t pid = ::fork();
            if (pid < 0) fail("fork");
            if (pid == 0) {
                // Child: only async-signal-safe calls until exec.
                if (::dup2(sv[1], 3) < 0) ::_exit(127);
                ::execl("/bin/sh", "sh", "-c", script.c_str(), static_cast<char*>(nullptr));
                ::_exit(127);
            }
            ::close(sv[1]);
            child_ = pid;
            stream_ = FrameStream(sv[0]);
            return;
        }
        case EndpointSpec::Kind::Tcp: {
            const auto host = spec_.target;
            const auto port = spec_.port;
            stream_ = FrameStream(connect_with_retry([&] { return connect_tcp(host, port); }, timeout_, spec_.str()));
            return;
        }
        case EndpointSpec::Kind::Ipc: {
            const auto path = spec_.target;
            stream_ = FrameStream(connect_with_retry([&] { return connect_ipc(path); }, timeout_, spec_.str()));
            return;
        }
        case EndpointSpec::Kind::InProc: {
            int sv[2];
            if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) fail("socketpair");
            auto model = std::shared_ptr<Model>(factory_());
            server_ = std::thread([fd = sv[1], model] {
                FrameStream s(fd);
                try {
                    serve(s, *model);
                } catch (const std::exception&) {
                    // The controller observes the closed socket as an aborted run.
                }
            });
            stream_ = FrameStream(sv[0]);
            return;
        }
    }
}

void SimulatorEndpoint::connect() {
    if (connected()) return;
    if (!stream_.is_open()) open_transport();
    state = wire::SessionState::AwaitingHandshake;
    wire::Message hs = wire::Handshake{wire::kProtocolVersion, "simtrace"};
    state = wire::session_step(state, hs);
    stream_.send(hs);
    auto reply = stream_.recv(timeout_);
    state = wire::session_step(state, reply);
    info_ = std::get<wire::HandshakeResult>(reply);
    if (info_.version != wire::kProtocolVersion) {
        close();
        throw EndpointError("simulator speaks protocol version " + std::to_string(info_.version));
    }
    handshaken_ = true;
}

void SimulatorEndpoint::close() {
    stream_.shutdown();
    stream_.close();
    handshaken_ = false;
    state = wire::SessionState::AwaitingHandshake;
    if (server_.joinable()) server_.join();
    if (child_ > 0) {
        int status = 0;
        const auto deadline = Clock::now() + std::chrono::seconds(2);
        while (::waitpid(child_, &status, WNOHANG) == 0) {
            if (Clock::now() >= deadline) {
                ::kill(child_, SIGKILL);
                ::waitpid(child_, &status, 0);
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        child_ = -1;
    }
}

void SimulatorEndpoint::reset() {
    close();
    ++resets_;
    connect();
}

int listen_on(const EndpointSpec& spec, std::uint16_t* bound_port) {
    if (spec.kind == EndpointSpec::Kind::Ipc) {
        ::unlink(spec.target.c_str());
        const auto addr = unix_address(spec.target);
        const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
        if (fd < 0) fail("socket");
        if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) fail("bind " + spec.target);
        if (::listen(fd, 16) != 0) fail("listen");
        return fd;
    }
    if (spec.kind != EndpointSpec::Kind::Tcp) throw EndpointError("can only listen on tcp: or ipc: endpoints");
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(spec.target.c_str(), std::to_string(spec.port).c_str(), &hints, &res) != 0) {
        throw EndpointError("cannot resolve host " + spec.target);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        fail("socket");
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0) {
        ::freeaddrinfo(res);
        ::close(fd);
        fail("bind " + spec.str());
    }
    ::freeaddrinfo(res);
    if (::listen(fd, 16) != 0) fail("listen");
    if (bound_port) {
        sockaddr_in sa{};
        socklen_t len = sizeof sa;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
        *bound_port = ntohs(sa.sin_port);
    }
    return fd;
}

int accept_connection(int listen_fd) {
    for (;;) {
        const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return fd;
        }
        if (errno != EINTR) fail("accept");
    }
}

}  // namespace simtrace::sim
