// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <filesystem>
#include <random>

#include "simtrace/tensor/archive.hpp"
#include "simtrace/tensor/ops.hpp"
#include "support/gradcheck.hpp"

using namespace simtrace;
using namespace simtrace::nn;
using testing::gradient_check;
using testing::project;
using testing::random_tensor;

namespace {

constexpr double kPrimitiveTol = 1e-6;

// Direct six-loop cross-correlation, single batch and channel.
std::vector<double> naive_conv(const std::vector<double>& in, std::size_t n, const std::vector<double>& k,
                               std::size_t m) {
    const std::size_t o = n - m + 1;
    std::vector<double> out(o * o * o, 0.0);
    for (std::size_t z = 0; z < o; ++z)
        for (std::size_t y = 0; y < o; ++y)
            for (std::size_t x = 0; x < o; ++x)
                for (std::size_t a = 0; a < m; ++a)
                    for (std::size_t b = 0; b < m; ++b)
                        for (std::size_t c = 0; c < m; ++c)
                            out[(z * o + y) * o + x] += in[((z + a) * n + y + b) * n + x + c] * k[(a * m + b) * m + c];
    return out;
}

double tn_log_pdf_oracle(double x, double mu, double sigma, double lo, double hi) {
    boost::math::normal_distribution<double> n(mu, sigma);
    const double z = boost::math::cdf(n, hi) - boost::math::cdf(n, lo);
    return std::log(boost::math::pdf(n, x)) - std::log(z);
}

}  // namespace

TEST_SUITE("tensor_autodiff") {
    TEST_CASE("elementwise and reduction primitives match finite differences") {
        std::mt19937_64 rng(1);
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({3, 4}, rng, 0.5, 1.5);
        auto check = [&](const char* name, std::function<Tensor()> f, std::vector<Tensor> ps) {
            CAPTURE(name);
            const auto r = gradient_check(f, ps);
            CHECK(r.checked > 0);
            CHECK(r.max_rel_error < kPrimitiveTol);
        };
        check("add", [&] { return project(add(a, b)); }, {a, b});
        check("sub", [&] { return project(sub(a, b)); }, {a, b});
        check("mul", [&] { return project(mul(a, b)); }, {a, b});
        check("scale", [&] { return project(scale(a, -2.5)); }, {a});
        check("add_scalar", [&] { return project(add_scalar(a, 3.0)); }, {a});
        check("tanh", [&] { return project(tanh(a)); }, {a});
        check("sigmoid", [&] { return project(sigmoid(a)); }, {a});
        check("relu", [&] { return project(relu(a)); }, {a});
        check("softplus", [&] { return project(softplus(a)); }, {a});
        check("exp", [&] { return project(exp(a)); }, {a});
        check("softmax", [&] { return project(softmax(a)); }, {a});
        check("log_softmax", [&] { return project(log_softmax(a)); }, {a});
        check("logsumexp", [&] { return project(logsumexp(a)); }, {a});
        check("mean", [&] { return mean(mul(a, b)); }, {a, b});
        check("reshape", [&] { return project(reshape(a, {2, 6})); }, {a});
    }

    TEST_CASE("linear algebra and indexing primitives match finite differences") {
        std::mt19937_64 rng(2);
        auto x = random_tensor({3, 5}, rng);
        auto w = random_tensor({4, 5}, rng);
        auto bias = random_tensor({4}, rng);
        auto m = random_tensor({5, 2}, rng);
        auto table = random_tensor({6, 3}, rng);
        auto y = random_tensor({3, 2}, rng);
        auto check = [&](const char* name, std::function<Tensor()> f, std::vector<Tensor> ps) {
            CAPTURE(name);
            CHECK(gradient_check(f, ps).max_rel_error < kPrimitiveTol);
        };
        check("matmul", [&] { return project(matmul(x, m)); }, {x, m});
        check("linear", [&] { return project(linear(x, w, bias)); }, {x, w, bias});
        check("linear no bias", [&] { return project(linear(x, w, Tensor())); }, {x, w});
        auto bias5 = random_tensor({5}, rng);
        check("add_bias", [&] { return project(add_bias(x, bias5)); }, {x, bias5});
        check("concat", [&] { return project(concat({x, y, x})); }, {x, y});
        check("slice_cols", [&] { return project(slice_cols(x, 1, 3)); }, {x});
        check("embedding", [&] { return project(embedding(table, {0, 5, 0, 2})); }, {table});
        check("gather_cols", [&] { return project(gather_cols(x, {4, 0, 2})); }, {x});
    }

    TEST_CASE("conv3d and maxpool3d match finite differences") {
        std::mt19937_64 rng(3);
        auto in = random_tensor({2, 2, 4, 4, 4}, rng);
        auto k = random_tensor({3, 2, 3, 3, 3}, rng);
        auto b = random_tensor({3}, rng);
        // conv3d is bilinear, so a wide step has no truncation error and less round-off
        const double h = 1e-3;
        CHECK(gradient_check([&] { return project(conv3d(in, k, b)); }, {in, k, b}, h).max_rel_error <
              kPrimitiveTol);
        CHECK(gradient_check([&] { return project(conv3d(in, k, b, 2, 1)); }, {in, k, b}, h).max_rel_error <
              kPrimitiveTol);
        auto p = random_tensor({1, 2, 4, 4, 5}, rng);
        CHECK(gradient_check([&] { return project(maxpool3d(p, 2)); }, {p}).max_rel_error < kPrimitiveTol);
    }

    TEST_CASE("conv3d matches a direct six-loop reference") {
        std::mt19937_64 rng(4);
        auto in = random_tensor({1, 1, 4, 4, 4}, rng, -1, 1, false);
        auto k = random_tensor({1, 1, 3, 3, 3}, rng, -1, 1, false);
        const auto got = conv3d(in, k, Tensor());
        const auto want = naive_conv(in.vec(), 4, k.vec(), 3);
        REQUIRE(got.shape() == Shape{1, 1, 2, 2, 2});
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }

    TEST_CASE("conv3d trivial kernels") {
        const Tensor one({1, 1, 1, 1, 1}, {2.5});
        const Tensor k({1, 1, 1, 1, 1}, {-3.0});
        CHECK(conv3d(one, k, Tensor()).item() == doctest::Approx(-7.5));

        std::mt19937_64 rng(5);
        auto in = random_tensor({1, 1, 3, 4, 5}, rng, -1, 1, false);
        Tensor ident({1, 1, 3, 3, 3});
        ident.vec()[13] = 1.0;
        const auto out = conv3d(in, ident, Tensor(), 1, 1);
        REQUIRE(out.shape() == in.shape());
        for (std::size_t i = 0; i < in.numel(); ++i) CHECK(out[i] == in[i]);
    }

    TEST_CASE("lstm cell limits and gradients") {
        const std::size_t H = 8, X = 5, B = 2;
        SUBCASE("zero weights and inputs give zero state") {
            auto s = lstm_cell(Tensor({B, X}), Tensor({B, H}), Tensor({B, H}), Tensor({4 * H, X}), Tensor({4 * H, H}),
                               Tensor({4 * H}));
            for (double v : s.h.vec()) CHECK(v == 0.0);
            for (double v : s.c.vec()) CHECK(v == 0.0);
        }
        SUBCASE("saturated forget gate carries the cell state") {
            std::mt19937_64 rng(6);
            auto c = random_tensor({B, H}, rng, -1, 1, false);
            Tensor b({4 * H});
            for (std::size_t j = H; j < 2 * H; ++j) b.vec()[j] = 60.0;
            auto s = lstm_cell(Tensor({B, X}), Tensor({B, H}), c, Tensor({4 * H, X}), Tensor({4 * H, H}), b);
            for (std::size_t i = 0; i < c.numel(); ++i) CHECK(s.c[i] == doctest::Approx(c[i]).epsilon(1e-12));
        }
        SUBCASE("random cell gradients") {
            std::mt19937_64 rng(7);
            auto x = random_tensor({B, X}, rng);
            auto h = random_tensor({B, H}, rng);
            auto c = random_tensor({B, H}, rng);
            auto w = random_tensor({4 * H, X}, rng, -0.5, 0.5);
            auto u = random_tensor({4 * H, H}, rng, -0.5, 0.5);
            auto b = random_tensor({4 * H}, rng, -0.5, 0.5);
            auto f = [&] {
                auto s = lstm_cell(x, h, c, w, u, b);
                return add(project(s.h, 1), project(s.c, 2));
            };
            CHECK(gradient_check(f, {x, h, c, w, u, b}).max_rel_error < kPrimitiveTol);
        }
    }

    TEST_CASE("truncated normal mixture log density") {
        SUBCASE("single component equals the truncated normal density") {
            const Tensor logits({2, 1}, {0.0, 0.0});
            const Tensor means({2, 1}, {1.0, 0.3});
            const Tensor stds({2, 1}, {0.7, 2.0});
            const auto lp = truncated_normal_mixture_log_prob(logits, means, stds, {1.4, -0.5}, {0.0, -1.0}, {3.0, 4.0});
            CHECK(lp[0] == doctest::Approx(tn_log_pdf_oracle(1.4, 1.0, 0.7, 0.0, 3.0)).epsilon(1e-12));
            CHECK(lp[1] == doctest::Approx(tn_log_pdf_oracle(-0.5, 0.3, 2.0, -1.0, 4.0)).epsilon(1e-12));
        }
        SUBCASE("mixture weights combine in probability space") {
            const Tensor logits({1, 2}, {std::log(0.25), std::log(0.75)});
            const Tensor means({1, 2}, {-1.0, 2.0});
            const Tensor stds({1, 2}, {0.5, 1.5});
            const double inf = std::numeric_limits<double>::infinity();
            const auto lp = truncated_normal_mixture_log_prob(logits, means, stds, {0.4}, {-inf}, {inf});
            boost::math::normal_distribution<double> n1(-1.0, 0.5), n2(2.0, 1.5);
            CHECK(lp[0] == doctest::Approx(std::log(0.25 * boost::math::pdf(n1, 0.4) + 0.75 * boost::math::pdf(n2, 0.4)))
                               .epsilon(1e-12));
        }
        SUBCASE("value outside the bounds has zero density") {
            const auto lp = truncated_normal_mixture_log_prob(Tensor({1, 1}, {0.0}), Tensor({1, 1}, {0.5}),
                                                              Tensor({1, 1}, {1.0}), {2.0}, {0.0}, {1.0});
            CHECK(std::isinf(lp[0]));
            CHECK(lp[0] < 0);
        }
        SUBCASE("gradients with finite, infinite and one-sided bounds") {
            std::mt19937_64 rng(8);
            const double inf = std::numeric_limits<double>::infinity();
            auto logits = random_tensor({4, 3}, rng);
            auto means = random_tensor({4, 3}, rng, 0.0, 2.0);
            auto stds = random_tensor({4, 3}, rng, 0.3, 1.2);
            const std::vector<double> v{0.7, 1.9, -0.4, 3.0}, lo{0.0, 0.5, -inf, 1.0}, hi{2.0, 3.0, inf, inf};
            auto f = [&] { return project(truncated_normal_mixture_log_prob(logits, means, stds, v, lo, hi)); };
            CHECK(gradient_check(f, {logits, means, stds}).max_rel_error < kPrimitiveTol);
        }
    }

    TEST_CASE("backward semantics") {
        SUBCASE("sum of W x gives x broadcast to each row") {
            Tensor w({3, 2}, {1, 2, 3, 4, 5, 6}, true);
            const Tensor x({1, 2}, {0.5, -2.0});
            Tape tape;
            {
                TapeScope scope(tape);
                backward(tape, sum(linear(x, w, Tensor())));
            }
            for (std::size_t r = 0; r < 3; ++r) {
                CHECK(w.grad()[r * 2] == 0.5);
                CHECK(w.grad()[r * 2 + 1] == -2.0);
            }
        }
        SUBCASE("detached subgraph receives zero gradient") {
            Tensor a({2}, {1.0, 2.0}, true);
            Tensor b({2}, {3.0, 4.0}, true);
            Tape tape;
            {
                TapeScope scope(tape);
                auto cut = detach(mul(b, b));
                backward(tape, sum(mul(a, cut)));
            }
            CHECK(a.grad()[0] == 9.0);
            CHECK(b.grad()[0] == 0.0);
            CHECK(b.grad()[1] == 0.0);
        }
        SUBCASE("non-scalar loss is rejected") {
            Tensor a({2}, {1.0, 2.0}, true);
            Tape tape;
            TapeScope scope(tape);
            auto y = tanh(a);
            CHECK_THROWS_AS(backward(tape, y), ShapeError);
        }
        SUBCASE("no tape records nothing") {
            Tensor a({2}, {1.0, 2.0}, true);
            Tape tape;
            auto y = tanh(a);
            CHECK(tape.size() == 0);
        }
        SUBCASE("gradients are bit-identical across runs") {
            std::mt19937_64 rng(9);
            auto x = random_tensor({4, 6}, rng);
            auto w = random_tensor({24, 6}, rng);
            auto u = random_tensor({24, 6}, rng);
            auto b = random_tensor({24}, rng);
            auto run = [&] {
                for (auto* t : {&x, &w, &u, &b}) t->zero_grad();
                Tape tape;
                TapeScope scope(tape);
                auto s = lstm_cell(x, tanh(x), x, w, u, b);
                backward(tape, project(s.h));
                return std::vector<double>(w.grad().begin(), w.grad().end());
            };
            const auto g1 = run();
            const auto g2 = run();
            CHECK(g1 == g2);
        }
        SUBCASE("shape mismatch") {
            CHECK_THROWS_AS(add(Tensor({2}), Tensor({3})), ShapeError);
            CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
            CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), ShapeError);
        }
    }

    TEST_CASE("named tensor archive") {
        Archive a;
        a.metadata["kind"] = "test";
        a.tensors.emplace_back("w", Tensor({2, 3}, {1, 2, 3, 4, 5, -0.0}));
        a.tensors.emplace_back("empty", Tensor({0}));
        a.tensors.emplace_back("s", Tensor::scalar(std::nan("")));
        const auto bytes = serialize_archive(a);
        CHECK(bytes[0] == 'S');
        CHECK(bytes[4] == kArchiveVersion);
        const auto b = deserialize_archive(bytes);
        CHECK(b.metadata.at("kind") == "test");
        REQUIRE(b.tensors.size() == 3);
        CHECK(b.tensors[0].first == "w");
        CHECK(b.at("w").shape() == Shape{2, 3});
        CHECK(b.at("w").vec() == a.at("w").vec());
        CHECK(std::signbit(b.at("w")[5]));
        CHECK(std::isnan(b.at("s").item()));

        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(deserialize_archive(bad), ArchiveError);
        bad = bytes;
        bad[4] = 9;
        CHECK_THROWS_AS(deserialize_archive(bad), ArchiveError);
        bad = bytes;
        bad.pop_back();
        CHECK_THROWS_AS(deserialize_archive(bad), ArchiveError);

        const auto path = std::filesystem::temp_directory_path() / "simtrace_archive_test.stna";
        save_archive(a, path);
        CHECK(load_archive(path).at("w").vec() == a.at("w").vec());
        std::filesystem::remove(path);
    }
}
