// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>
#include <unistd.h>

#include "simtrace/models/toy.hpp"
#include "simtrace/sim/gateway.hpp"

using namespace simtrace;
using namespace simtrace::sim;

namespace {

double ks_normal(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = math::std_normal_cdf(xs[i]);
        d = std::max({d, f - i / n, (i + 1) / n - f});
    }
    return d;
}

class SleepyModel : public Model {
public:
    std::string name() const override { return "sleepy"; }
    Value run(ModelContext& ctx) override {
        ctx.sample(Distribution::normal(0, 1));
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        return 0.0;
    }
};

}  // namespace

TEST_SUITE("sim_gateway") {
    TEST_CASE("endpoint spec parsing") {
        CHECK(EndpointSpec::parse("tcp:127.0.0.1:5555").port == 5555);
        CHECK(EndpointSpec::parse("ipc:/tmp/x.sock").kind == EndpointSpec::Kind::Ipc);
        CHECK(EndpointSpec::parse("spawn:toy-sim --model conjugate").target == "toy-sim --model conjugate");
        CHECK(EndpointSpec::parse("tcp:h:1").str() == "tcp:h:1");
        CHECK_THROWS_AS(EndpointSpec::parse("tcp:host"), EndpointError);
        CHECK_THROWS_AS(EndpointSpec::parse("udp:x"), EndpointError);
        CHECK_THROWS_AS(EndpointSpec::parse("tcp:h:99999"), EndpointError);
    }

    TEST_CASE("conjugate prior run is reproducible") {
        SimulatorEndpoint ep("inproc:conjugate");
        Gateway gw(ep);
        PriorPolicy prior;
        const auto a = gw.execute(std::nullopt, prior, 7, 0);
        const auto b = gw.execute(std::nullopt, prior, 7, 0);
        CHECK(ep.info().model_name == "conjugate");
        CHECK(a.latent_count() == 1);
        CHECK(a.observed_values().size() == 1);
        CHECK(a.latent_addresses() == b.latent_addresses());
        CHECK(a.entries[0].value == b.entries[0].value);
        CHECK(a.entries[1].value == b.entries[1].value);
        CHECK(a.log_weight == doctest::Approx(a.log_likelihood).epsilon(1e-15));
    }

    TEST_CASE("replay reproduces values and log joint") {
        SimulatorEndpoint ep("inproc:cascade");
        Gateway gw(ep);
        PriorPolicy prior;
        for (int r = 0; r < 20; ++r) {
            const auto t = gw.execute(std::nullopt, prior, 3, r);
            auto replay = ReplayPolicy::from_trace(t, true);
            const auto u = gw.execute(t.observation, replay, 99, r);
            CHECK(u.latent_addresses() == t.latent_addresses());
            for (const auto& a : t.latent_addresses()) CHECK(u.find_latent(a)->value == t.find_latent(a)->value);
            CHECK(u.log_joint() == t.log_joint());
        }
    }

    TEST_CASE("guided with prior proposal cancels") {
        SimulatorEndpoint ep("inproc:conjugate");
        Gateway gw(ep);
        FixedProposalSource src({{models::ConjugateModel::latent_address(), Distribution::normal(0, 1)}});
        GuidedPolicy guided(src);
        for (int r = 0; r < 10; ++r) {
            const auto t = gw.execute(Value(1.0), guided, 5, r);
            CHECK(t.entries[0].proposed);
            CHECK(t.log_weight == doctest::Approx(t.log_likelihood).epsilon(1e-12));
        }
    }

    TEST_CASE("guided weight equals post-hoc recomputation") {
        SimulatorEndpoint ep("inproc:conjugate");
        Gateway gw(ep);
        const auto q = Distribution::normal(0.3, 0.6);
        FixedProposalSource src({{models::ConjugateModel::latent_address(), q}});
        GuidedPolicy guided(src);
        for (int r = 0; r < 50; ++r) {
            const auto t = gw.execute(Value(1.0), guided, 5, r);
            const double log_q = q.log_density(t.entries[0].value);
            CHECK(std::abs(t.log_weight - (t.log_joint() - log_q)) < 1e-10);
        }
    }

    TEST_CASE("sample_prior reproducibility and marginals") {
        SimulatorEndpoint ep("inproc:conjugate");
        CHECK(sample_prior(ep, 0, 1).empty());
        const auto a = sample_prior(ep, 10000, 11);
        const auto b = sample_prior(ep, 50, 11);
        std::vector<double> xs;
        for (const auto& t : a) xs.push_back(t.entries[0].value.as_f64());
        for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i].entries[0].value == a[i].entries[0].value);
        CHECK(ks_normal(xs) < 1.628 / std::sqrt(10000.0));
    }

    TEST_CASE("crash mid-run aborts and endpoint recovers") {
        SimulatorEndpoint ep([] { return std::make_unique<models::CrashingModel>(2); });
        Gateway gw(ep);
        PriorPolicy prior;
        CHECK_NOTHROW(gw.execute(std::nullopt, prior, 1, 0));
        CHECK_THROWS_AS(gw.execute(std::nullopt, prior, 1, 1), RunAborted);
        CHECK_NOTHROW(gw.execute(std::nullopt, prior, 1, 2));
    }

    TEST_CASE("slow simulator times out") {
        SimulatorEndpoint ep([] { return std::make_unique<SleepyModel>(); }, std::chrono::milliseconds(50));
        Gateway gw(ep);
        PriorPolicy prior;
        CHECK_THROWS_AS(gw.execute(std::nullopt, prior, 1, 0), RunTimeout);
    }

    TEST_CASE("spawned simulator process") {
        SimulatorEndpoint ep(std::string("spawn:") + TOY_SIM_PATH + " --model discrete");
        const auto ts = sample_prior(ep, 20, 4);
        CHECK(ts.size() == 20);
        CHECK(ep.info().model_name == "discrete");
        ep.reset();
        CHECK(sample_prior(ep, 20, 4)[7].log_joint() == ts[7].log_joint());
    }

    TEST_CASE("tcp and ipc transports") {
        for (const std::string spec : {"tcp:127.0.0.1:0", "ipc:/tmp/simtrace-test.sock"}) {
            auto ls = EndpointSpec::parse(spec);
            std::uint16_t port = 0;
            const int lfd = listen_on(ls, &port);
            std::thread server([lfd] {
                FrameStream s(accept_connection(lfd));
                models::ConjugateModel m;
                serve(s, m);
            });
            ls.port = port;
            {
                SimulatorEndpoint ep(ls);
                CHECK(sample_prior(ep, 5, 1).size() == 5);
            }
            server.join();
            ::close(lfd);
        }
    }
}
