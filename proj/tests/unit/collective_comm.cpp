// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <random>

#include "support/ring.hpp"

using namespace simtrace::comm;
using simtrace::testing::run_ring;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> d(0, 10);
    std::vector<double> v(n);
    for (auto& x : v) x = d(g);
    return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("collective_comm") {
    TEST_CASE("single process is the identity") {
        SingleProcess g;
        std::vector<double> v{1.5, -2.0};
        g.allreduce_mean(v);
        CHECK(v == std::vector<double>{1.5, -2.0});
        CHECK(g.allreduce_scalar(3.25) == 3.25);
        CHECK(allreduce_presence(g, {true, false, true}) == std::vector<bool>{true, false, true});
        g.verify_layout(42);
        auto out = average_gradients(g, {std::vector<double>{1, 2}, std::nullopt}, {2, 3});
        CHECK(out[0] == std::vector<double>{1, 2});
        CHECK(out[1] == std::vector<double>{0, 0, 0});
        CHECK(dynamic_cast<SingleProcess*>(make_group(0, 1, "").get()) != nullptr);
    }

    TEST_CASE("scalar means") {
        std::vector<double> got(4);
        run_ring(4, [&](Collective& g) { got[g.rank()] = g.allreduce_scalar(g.rank() + 1.0); });
        CHECK(got == std::vector<double>(4, 2.5));
        std::vector<double> two(2);
        run_ring(2, [&](Collective& g) { two[g.rank()] = g.allreduce_scalar(g.rank()); });
        CHECK(two == std::vector<double>(2, 0.5));
    }

    TEST_CASE("vector mean matches oracle and is bit-identical across ranks") {
        for (std::size_t n : {0u, 1u, 3u, 4u, 1001u, 100000u}) {
            CAPTURE(n);
            std::vector<std::vector<double>> inputs, outputs(4);
            for (std::uint64_t r = 0; r < 4; ++r) inputs.push_back(random_vector(n, 100 + r));
            run_ring(4, [&](Collective& g) {
                auto v = inputs[g.rank()];
                g.allreduce_mean(v);
                outputs[g.rank()] = v;
            });
            for (std::size_t i = 0; i < n; ++i) {
                const double want = (inputs[0][i] + inputs[1][i] + inputs[2][i] + inputs[3][i]) / 4.0;
                REQUIRE(std::abs(outputs[0][i] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
            }
            for (int r = 1; r < 4; ++r) CHECK(same_bits(outputs[0], outputs[r]));
        }
    }

    TEST_CASE("repeated runs give the same bits") {
        std::vector<std::vector<double>> a(3), b(3);
        for (auto* out : {&a, &b}) {
            run_ring(3, [&](Collective& g) {
                auto v = random_vector(777, g.rank());
                g.allreduce_mean(v);
                (*out)[g.rank()] = v;
            });
        }
        for (int r = 0; r < 3; ++r) CHECK(same_bits(a[r], b[r]));
    }

    TEST_CASE("presence bitmaps") {
        std::vector<std::vector<bool>> got(2);
        run_ring(2, [&](Collective& g) {
            got[g.rank()] = allreduce_presence(g, g.rank() == 0 ? std::vector<bool>{true, false} : std::vector<bool>{false, true});
        });
        CHECK(got[0] == std::vector<bool>{true, true});
        CHECK(got[1] == got[0]);

        run_ring(3, [&](Collective& g) { CHECK(allreduce_presence(g, std::vector<bool>(5, false)) == std::vector<bool>(5, false)); });

        std::mt19937_64 rng(3);
        std::vector<std::vector<bool>> local(4, std::vector<bool>(37));
        std::vector<bool> oracle(37, false);
        for (auto& l : local) {
            for (std::size_t i = 0; i < l.size(); ++i) {
                l[i] = rng() % 5 == 0;
                oracle[i] = oracle[i] || l[i];
            }
        }
        std::vector<std::vector<bool>> out(4);
        run_ring(4, [&](Collective& g) { out[g.rank()] = allreduce_presence(g, local[g.rank()]); });
        for (const auto& o : out) CHECK(o == oracle);
    }

    TEST_CASE("broadcast from any root") {
        for (std::uint32_t root = 0; root < 3; ++root) {
            std::vector<std::vector<double>> got(3);
            run_ring(3, [&](Collective& g) {
                auto v = g.rank() == root ? std::vector<double>{1, 2, 3} : std::vector<double>(3, 0.0);
                g.broadcast(std::span<double>(v), root);
                got[g.rank()] = v;
            });
            for (const auto& v : got) CHECK(v == std::vector<double>{1, 2, 3});
        }
    }

    TEST_CASE("gradient exchange zero-fills and keeps message count flat") {
        const std::vector<std::size_t> sizes{2, 3, 1};
        std::vector<std::vector<std::vector<double>>> out(2);
        std::vector<ExchangeStats> stats(2);
        run_ring(2, [&](Collective& g) {
            std::vector<std::optional<std::vector<double>>> grads(3);
            if (g.rank() == 0) grads[0] = std::vector<double>{2, 4};
            if (g.rank() == 1) grads[1] = std::vector<double>{6, 8, 10};
            out[g.rank()] = average_gradients(g, grads, sizes, &stats[g.rank()]);
        });
        for (int r = 0; r < 2; ++r) {
            CHECK(out[r][0] == std::vector<double>{1, 2});
            CHECK(out[r][1] == std::vector<double>{3, 4, 5});
            CHECK(out[r][2] == std::vector<double>{0});
            CHECK(stats[r].present_tensors == 2);
            CHECK(stats[r].buffer_values == 5);
        }

        // Messages per exchange depend on the ring size only.
        std::vector<std::uint64_t> few(4), many(4), separate(4);
        for (std::size_t tensors : {3u, 300u}) {
            run_ring(4, [&](Collective& g) {
                std::vector<std::optional<std::vector<double>>> grads(tensors, std::vector<double>(10, g.rank()));
                const auto before = g.messages_sent();
                average_gradients(g, grads, std::vector<std::size_t>(tensors, 10));
                (tensors == 3 ? few : many)[g.rank()] = g.messages_sent() - before;
                if (tensors == 300) {
                    const auto start = g.messages_sent();
                    for (auto& t : grads) g.allreduce_mean(*t);
                    separate[g.rank()] = g.messages_sent() - start;
                }
            });
        }
        for (int r = 0; r < 4; ++r) {
            CHECK(few[r] == 12);  // presence and values: 2 * 2 * (N - 1)
            CHECK(many[r] == few[r]);
            CHECK(separate[r] == 300 * 6);
        }
    }

    TEST_CASE("layout hashes must agree") {
        std::atomic<int> mismatches{0};
        run_ring(3, [&](Collective& g) {
            g.verify_layout(77);
            try {
                g.verify_layout(g.rank() == 2 ? 78 : 77);
            } catch (const LayoutMismatch&) {
                ++mismatches;
            }
        });
        CHECK(mismatches == 3);
    }

    TEST_CASE("a departing peer aborts the collective on every rank") {
        std::atomic<int> aborted{0};
        run_ring(4, [&](Collective& g) {
            g.barrier();
            if (g.rank() == 1) {
                dynamic_cast<TcpRing&>(g).close();
                return;
            }
            std::vector<double> v(1000, 1.0);
            try {
                g.allreduce_mean(v);
            } catch (const CollectiveAborted&) {
                ++aborted;
            }
        });
        CHECK(aborted == 3);
    }

    TEST_CASE("bad rendezvous arguments") {
        CHECK_THROWS_AS(make_group(2, 2, "127.0.0.1:1"), std::invalid_argument);
        CHECK_THROWS_AS(make_group(0, 0, "127.0.0.1:1"), std::invalid_argument);
        CHECK_THROWS_AS(TcpRing::join(1, 2, "nohostport"), std::invalid_argument);
        CHECK_THROWS_AS(TcpRing::join(1, 2, simtrace::testing::free_rendezvous(), std::chrono::milliseconds(200)), CollectiveAborted);
    }
}
