// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "simtrace/nn/trainer.hpp"
#include "support/ring.hpp"

using namespace simtrace;
using namespace simtrace::nn;
namespace fs = std::filesystem;

namespace {

NetworkConfig cascade_config() {
    auto c = NetworkConfig::desk();
    c.obs_shape = {4, 8, 8};
    return c;
}

std::vector<Trace> prior_traces(const std::string& model, std::size_t n, std::uint64_t seed) {
    sim::SimulatorEndpoint ep("inproc:" + model);
    return sim::sample_prior(ep, n, seed);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("simtrace_" + name)) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<std::vector<double>> snapshot(const ProposalNetwork& net) {
    std::vector<std::vector<double>> out;
    for (const auto& [name, p] : net.parameters()) out.emplace_back(p.data().begin(), p.data().end());
    return out;
}

double max_abs_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
    }
    return m;
}

double moving_average(const std::vector<IterationLog>& log, std::size_t end, std::size_t window) {
    double s = 0;
    for (std::size_t i = end - window; i < end; ++i) s += log[i].loss;
    return s / static_cast<double>(window);
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("untouched layers have no gradient") {
        ProposalNetwork net(NetworkConfig::desk());
        const auto conj = prior_traces("conjugate", 4, 1);
        const auto disc = prior_traces("discrete", 4, 1);
        for (const auto& t : conj) net.register_trace(t);
        for (const auto& t : disc) net.register_trace(t);
        const auto g = compute_gradients(net, conj);
        const auto params = net.parameters();
        std::size_t absent = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& name = params[i].first;
            // The last draw's sample embedding feeds no later step.
            const bool unused = name.find("discrete::") != std::string::npos || name.ends_with("Normal#1/sample_w") ||
                                name.ends_with("Normal#1/sample_b");
            CHECK(g.grads[i].has_value() == !unused);
            absent += !g.grads[i].has_value();
        }
        CHECK(absent == 16);  // two discrete addresses with seven tensors each, plus two
        CHECK(g.stats.used == 4);
        CHECK(std::isfinite(g.loss));
    }

    TEST_CASE("ring gradient average equals the union minibatch gradient") {
        const auto traces = prior_traces("cascade", 32, 2);
        ProposalNetwork reference(cascade_config());
        for (const auto& t : traces) reference.register_trace(t);
        reference.freeze();
        const auto want = compute_gradients(reference, traces);

        std::vector<std::vector<std::vector<double>>> got(4);
        testing::run_ring(4, [&](comm::Collective& g) {
            ProposalNetwork net(cascade_config());
            for (const auto& t : traces) net.register_trace(t);
            net.freeze();
            const std::span<const Trace> mine(traces.data() + 8 * g.rank(), 8);
            const auto local = compute_gradients(net, mine);
            std::vector<std::size_t> sizes;
            for (const auto& [name, p] : net.parameters()) sizes.push_back(p.numel());
            got[g.rank()] = comm::average_gradients(g, local.grads, sizes);
        });
        double worst = 0;
        for (std::size_t i = 0; i < want.grads.size(); ++i) {
            for (std::size_t j = 0; j < got[0][i].size(); ++j) {
                const double w = want.grads[i] ? (*want.grads[i])[j] : 0.0;
                worst = std::max(worst, std::abs(got[0][i][j] - w));
            }
        }
        MESSAGE("max gradient difference " << worst);
        CHECK(worst < 1e-12);
        for (int r = 1; r < 4; ++r) CHECK(got[r] == got[0]);
    }

    TEST_CASE("four workers follow the single-worker trajectory") {
        TempDir dir("trainer_equiv");
        const auto traces = prior_traces("cascade", 600, 3);
        store::write_shards(traces, dir.path, 1000);
        TrainConfig tc;
        tc.minibatch = 32;
        tc.iterations = 10;
        tc.schedule.lr0 = 1e-3;

        auto fresh = [&] {
            ProposalNetwork net(cascade_config());
            pregenerate_layers(net, store::TraceDataset::open(dir.path));
            return net;
        };
        auto single = fresh();
        {
            comm::SingleProcess g;
            DatasetSource src(store::TraceDataset::open(dir.path), 5);
            Trainer(single, tc, g).run(src);
        }
        std::vector<std::vector<std::vector<double>>> ranks(4);
        testing::run_ring(4, [&](comm::Collective& g) {
            auto net = fresh();
            DatasetSource src(store::TraceDataset::open(dir.path), 5);
            Trainer(net, tc, g).run(src);
            ranks[g.rank()] = snapshot(net);
        });
        const double diff = max_abs_diff(snapshot(single), ranks[0]);
        MESSAGE("max parameter difference after 10 steps " << diff);
        CHECK(diff < 1e-8);
        CHECK(max_abs_diff(snapshot(fresh()), ranks[0]) > 1e-4);  // the steps did move the weights
        for (int r = 1; r < 4; ++r) CHECK(ranks[r] == ranks[0]);
    }

    TEST_CASE("training loss falls") {
        ProposalNetwork net(cascade_config());
        for (const auto& t : prior_traces("cascade", 2000, 99)) net.register_trace(t);
        comm::SingleProcess g;
        TrainConfig tc;
        tc.minibatch = 16;
        tc.iterations = 2000;
        OnlineSource src("inproc:cascade", 1);
        const auto r = Trainer(net, tc, g).run(src);
        const double early = moving_average(r.log, 10, 10), late = moving_average(r.log, r.log.size(), 10);
        MESSAGE("loss moving average " << early << " -> " << late);
        CHECK(late <= early - 0.3 * std::abs(early));
    }

    TEST_CASE("frozen registry skips unseen addresses") {
        ProposalNetwork net(NetworkConfig::desk());
        const auto conj = prior_traces("conjugate", 6, 1);
        for (const auto& t : conj) net.register_trace(t);
        net.freeze();
        auto batch = conj;
        const auto disc = prior_traces("discrete", 2, 1);
        batch.insert(batch.end(), disc.begin(), disc.end());
        comm::SingleProcess g;
        Optimizer opt;
        const auto log = train_step(net, opt, g, batch, 1e-3);
        CHECK(log.used == 6);
        CHECK(log.skipped == 2);
        CHECK(net.step == 1);
        const auto none = train_step(net, opt, g, disc, 1e-3);
        CHECK(none.used == 0);
        CHECK(std::isnan(none.loss));
        CHECK(net.step == 1);
    }

    TEST_CASE("divergence aborts with a checkpoint") {
        TempDir dir("trainer_nan");
        fs::create_directories(dir.path);
        ProposalNetwork net(NetworkConfig::desk());
        for (const auto& t : prior_traces("conjugate", 4, 1)) net.register_trace(t);
        auto params = net.parameters();
        Tensor w = params.back().second;
        w.data()[0] = std::nan("");
        comm::SingleProcess g;
        TrainConfig tc;
        tc.minibatch = 8;
        tc.iterations = 5;
        tc.checkpoint = dir.path / "net.stna";
        OnlineSource src("inproc:conjugate", 1);
        Trainer trainer(net, tc, g);
        CHECK_THROWS_AS(trainer.run(src), TrainingDiverged);
        CHECK(fs::exists(tc.checkpoint));
    }

    TEST_CASE("resuming from a checkpoint continues the same run") {
        TempDir dir("trainer_resume");
        fs::create_directories(dir.path);
        auto make = [] {
            ProposalNetwork net(NetworkConfig::desk());
            for (const auto& t : prior_traces("conjugate", 4, 1)) net.register_trace(t);
            return net;
        };
        comm::SingleProcess g;
        TrainConfig tc;
        tc.minibatch = 8;
        tc.iterations = 20;
        tc.schedule.kind = ScheduleKind::Poly;
        tc.schedule.total = 20;
        auto straight = make();
        {
            OnlineSource src("inproc:conjugate", 4);
            Trainer(straight, tc, g).run(src);
        }
        auto first = make();
        auto half = tc;
        half.iterations = 10;
        half.checkpoint = dir.path / "half.stna";
        {
            OnlineSource src("inproc:conjugate", 4);
            Trainer(first, half, g).run(src);
        }
        ProposalNetwork resumed(NetworkConfig::desk());
        Trainer t2(resumed, tc, g);
        Trainer::load_checkpoint(half.checkpoint, resumed, t2.optimizer());
        CHECK(resumed.step == 10);
        OnlineSource src("inproc:conjugate", 4);
        t2.run(src);
        CHECK(snapshot(resumed) == snapshot(straight));
    }

    TEST_CASE("log lines and validation split") {
        TempDir dir("trainer_log");
        const auto traces = prior_traces("conjugate", 200, 7);
        store::write_shards(traces, dir.path, 1000);
        DatasetSource src(store::TraceDataset::open(dir.path), 1);
        CHECK(src.training_size() == 196);
        const auto held = src.validation(100);
        REQUIRE(held.size() == 4);
        CHECK(held[0].log_joint() == traces[49].log_joint());

        ProposalNetwork net(NetworkConfig::desk());
        pregenerate_layers(net, store::TraceDataset::open(dir.path));
        comm::SingleProcess g;
        TrainConfig tc;
        tc.minibatch = 16;
        tc.iterations = 6;
        tc.validate_every = 3;
        std::ostringstream out;
        Trainer trainer(net, tc, g);
        trainer.set_log_stream(&out);
        const auto r = trainer.run(src);
        std::istringstream in(out.str());
        std::string line;
        std::size_t lines = 0, validated = 0;
        while (std::getline(in, line)) {
            const auto j = nlohmann::json::parse(line);
            ++lines;
            CHECK(j.at("iteration").get<int>() == static_cast<int>(lines));
            CHECK(j.contains("loss"));
            CHECK(j.contains("lr"));
            CHECK(j.contains("traces_per_s"));
            validated += j.contains("validation_loss");
        }
        CHECK(lines == 6);
        CHECK(validated == 2);
        CHECK(r.log[2].validation_loss.has_value());
        CHECK(r.log.size() == 6);
    }

    TEST_CASE("online training is independent of worker count") {
        auto make = [] {
            ProposalNetwork net(NetworkConfig::desk());
            for (const auto& t : prior_traces("conjugate", 4, 1)) net.register_trace(t);
            return net;
        };
        TrainConfig tc;
        tc.minibatch = 12;
        tc.iterations = 10;
        auto one = make();
        {
            comm::SingleProcess g;
            OnlineSource src("inproc:conjugate", 8);
            Trainer(one, tc, g).run(src);
        }
        std::vector<std::vector<std::vector<double>>> two(2);
        testing::run_ring(2, [&](comm::Collective& g) {
            auto net = make();
            OnlineSource src("inproc:conjugate", 8);
            Trainer(net, tc, g).run(src);
            two[g.rank()] = snapshot(net);
        });
        CHECK(max_abs_diff(snapshot(one), two[0]) < 1e-8);
        CHECK(two[0] == two[1]);
    }
}
