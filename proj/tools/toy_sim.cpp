// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

// Standalone toy simulator speaking the wire protocol.
//   toy-sim --model cascade --listen tcp:127.0.0.1:5555
//   toy-sim --model conjugate            (serves fd $SIMTRACE_FD, as under spawn:)

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "simtrace/models/registry.hpp"
#include "simtrace/sim/endpoint.hpp"

using namespace simtrace;

int main(int argc, char** argv) {
    CLI::App app{"toy simulator"};
    std::string model_name = "conjugate";
    std::string listen;
    bool once = false;
    app.add_option("--model", model_name, "conjugate | discrete | cascade")->required();
    app.add_option("--listen", listen, "tcp:<host>:<port> or ipc:<path>; default serves $SIMTRACE_FD");
    app.add_flag("--once", once, "exit after the first session");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        auto model = models::make_model(model_name);
        if (listen.empty()) {
            const char* fd_env = std::getenv("SIMTRACE_FD");
            if (!fd_env) {
                std::cerr << "toy-sim: no --listen and no SIMTRACE_FD\n";
                return 2;
            }
            sim::FrameStream stream(std::atoi(fd_env));
            sim::serve(stream, *model);
            return 0;
        }
        const auto spec = sim::EndpointSpec::parse(listen);
        std::uint16_t port = 0;
        const int lfd = sim::listen_on(spec, &port);
        if (spec.kind == sim::EndpointSpec::Kind::Tcp) std::cout << "listening port=" << port << std::endl;
        else std::cout << "listening path=" << spec.target << std::endl;
        do {
            sim::FrameStream stream(sim::accept_connection(lfd));
            try {
                sim::serve(stream, *model);
            } catch (const std::exception& e) {
                std::cerr << "toy-sim: session ended: " << e.what() << "\n";
            }
        } while (!once);
        ::close(lfd);
    } catch (const std::exception& e) {
        std::cerr << "toy-sim: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
