// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/sim/stream.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace simtrace::sim {

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const auto w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw RunAborted(std::string("send failed: ") + std::strerror(errno));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

FrameStream::~FrameStream() { close(); }

FrameStream::FrameStream(FrameStream&& o) noexcept
    : fd_(std::exchange(o.fd_, -1)), in_(std::move(o.in_)), sent_(o.sent_), received_(o.received_) {}

FrameStream& FrameStream::operator=(FrameStream&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = std::exchange(o.fd_, -1);
        in_ = std::move(o.in_);
        sent_ = o.sent_;
        received_ = o.received_;
    }
    return *this;
}

void FrameStream::close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    in_.clear();
}

void FrameStream::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void FrameStream::send(const wire::Message& m) {
    if (fd_ < 0) throw RunAborted("stream is closed");
    out_.clear();
    wire::encode_into(m, out_);
    write_all(fd_, out_.data(), out_.size());
    ++sent_;
}

bool FrameStream::fill(std::chrono::milliseconds timeout, bool eof_ok) {
    if (fd_ < 0) throw RunAborted("stream is closed");
    pollfd p{fd_, POLLIN, 0};
    for (;;) {
        const int r = ::poll(&p, 1, timeout.count() < 0 ? -1 : static_cast<int>(timeout.count()));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw RunAborted(std::string("poll failed: ") + std::strerror(errno));
        }
        if (r == 0) throw RunTimeout("no message within " + std::to_string(timeout.count()) + " ms");
        break;
    }
    std::uint8_t buf[65536];
    ssize_t n;
    do {
        n = ::recv(fd_, buf, sizeof buf, 0);
    } while (n < 0 && errno == EINTR);
    if (n < 0) throw RunAborted(std::string("recv failed: ") + std::strerror(errno));
    if (n == 0) {
        if (eof_ok && in_.empty()) return false;
        throw RunAborted("peer closed the connection");
    }
    in_.insert(in_.end(), buf, buf + n);
    return true;
}

bool FrameStream::try_recv(wire::Message& out, std::chrono::milliseconds timeout) {
    for (;;) {
        auto r = wire::decode(in_);
        if (auto* d = std::get_if<wire::Decoded>(&r)) {
            out = std::move(d->message);
            in_.erase(in_.begin(), in_.begin() + static_cast<long>(d->consumed));
            ++received_;
            return true;
        }
        if (!fill(timeout, true)) return false;
    }
}

wire::Message FrameStream::recv(std::chrono::milliseconds timeout) {
    wire::Message m;
    if (!try_recv(m, timeout)) throw RunAborted("peer closed the connection");
    return m;
}

}  // namespace simtrace::sim
