#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nops/binary.hpp"
#include "nops/graph.hpp"
#include "nops/parameters.hpp"
#include "oracles.hpp"

using namespace nops::ad;

namespace {

Var scalar_probe(Graph& g, Var out, std::mt19937_64& rng) {
    // sum(out * c) with a random constant c keeps every output coordinate in play.
    Tensor c = oracle::random_matrix(out.value().rows(), out.value().cols(), rng);
    c = Tensor(out.shape(), c.values());
    return sum(mul(out, g.input(c)));
}

/// Checks reverse-mode gradients of `build` against central differences for
/// every entry of every named parameter.
double max_gradient_error(ParameterStore& store, const std::function<Var(Graph&)>& build) {
    store.zero_grad();
    {
        Graph g(&store);
        g.backward(build(g));
    }
    double worst = 0.0;
    for (auto& [name, entry] : store.entries()) {
        for (std::size_t i = 0; i < entry.value.size(); ++i) {
            auto f = [&] {
                Graph g(&std::as_const(store));
                return build(g).value()[0];
            };
            const double fd = oracle::central_difference(f, entry.value[i]);
            worst = std::max(worst, oracle::relative_error(entry.grad[i], fd));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("identity linear layer passes the input through") {
    ParameterStore ps;
    ps.add("w", Tensor::from_rows({{1, 0}, {0, 1}}));
    ps.add("b", Tensor::from_rows({{0, 0}}));
    Graph g(&ps);
    Var y = add(matmul(g.input(Tensor::from_rows({{3, 4}})), g.parameter("w")), g.parameter("b"));
    CHECK(y.value() == Tensor::from_rows({{3, 4}}));
}

TEST_CASE("softmax of equal logits is uniform") {
    Graph g;
    Var p = softmax_rows(g.input(Tensor::from_rows({{0, 0, 0}})));
    for (double v : p.value().values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("two-layer network matches a straight-line forward") {
    std::mt19937_64 rng(0);
    const Tensor w1 = oracle::random_matrix(3, 4, rng), b1 = oracle::random_matrix(1, 4, rng);
    const Tensor w2 = oracle::random_matrix(4, 2, rng), b2 = oracle::random_matrix(1, 2, rng);
    ParameterStore ps;
    ps.add("w1", w1);
    ps.add("b1", b1);
    ps.add("w2", w2);
    ps.add("b2", b2);
    Graph g(&ps);
    Var h = relu(add(matmul(g.input(Tensor::from_rows({{1, 2, 3}})), g.parameter("w1")), g.parameter("b1")));
    Var y = add(matmul(h, g.parameter("w2")), g.parameter("b2"));

    const double x[3] = {1, 2, 3};
    double hidden[4];
    for (int j = 0; j < 4; ++j) {
        double s = b1(0, j);
        for (int i = 0; i < 3; ++i) s += x[i] * w1(i, j);
        hidden[j] = s > 0 ? s : 0;
    }
    for (int k = 0; k < 2; ++k) {
        double s = b2(0, k);
        for (int j = 0; j < 4; ++j) s += hidden[j] * w2(j, k);
        CHECK(y.value()(0, k) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("gradient of a summed linear map is all ones") {
    ParameterStore ps;
    ps.add("w", Tensor::from_rows({{0.3, -2}, {5, 1}}));
    Graph g(&ps);
    g.backward(sum(matmul(g.input(Tensor::from_rows({{1, 1}})), g.parameter("w"))));
    CHECK(ps.grad("w") == Tensor::from_rows({{1, 1}, {1, 1}}));
}

TEST_CASE("softmax cross-entropy gradient is prediction minus target") {
    ParameterStore ps;
    ps.add("logits", Tensor::from_rows({{0, 0}}));
    Graph g(&ps);
    Var ce = sum(mul(log_clamped(softmax_rows(g.parameter("logits"))), g.input(Tensor::from_rows({{-1, 0}}))));
    g.backward(ce);
    CHECK(ps.grad("logits")(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(ps.grad("logits")(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("random three-layer network agrees with finite differences") {
    std::mt19937_64 rng(11);
    ParameterStore ps;
    ps.add("w1", oracle::random_matrix(3, 5, rng));
    ps.add("w2", oracle::random_matrix(5, 4, rng));
    ps.add("w3", oracle::random_matrix(4, 2, rng));
    const Tensor x = oracle::random_matrix(6, 3, rng);
    const Tensor probe = oracle::random_matrix(6, 2, rng);
    auto build = [&](Graph& g) {
        Var h = relu(matmul(g.input(x), g.parameter("w1")));
        h = relu(matmul(h, g.parameter("w2")));
        return sum(mul(softmax_rows(matmul(h, g.parameter("w3"))), g.input(probe)));
    };
    CHECK(max_gradient_error(ps, build) < 1e-3);
}

TEST_CASE("every op passes a finite-difference check on randomized inputs") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 1 + rng() % 4, c = 1 + rng() % 4;
        ParameterStore ps;
        ps.add("a", oracle::random_matrix(r, c, rng, 0.2, 1.5));
        ps.add("b", oracle::random_matrix(r, c, rng, 0.2, 1.5));
        ps.add("row", oracle::random_matrix(1, c, rng));
        ps.add("w", oracle::random_matrix(c, 3, rng));
        const std::uint64_t probe_seed = rng();
        auto build = [&](Graph& g) {
            std::mt19937_64 prng(probe_seed);
            Var a = g.parameter("a"), b = g.parameter("b");
            Var acc = scalar_probe(g, matmul(a, g.parameter("w")), prng);
            acc = add(acc, scalar_probe(g, add(a, g.parameter("row")), prng));
            acc = add(acc, scalar_probe(g, relu(add(a, g.input(Tensor(a.shape(), -0.7)))), prng));
            acc = add(acc, scalar_probe(g, l2_normalize_rows(a), prng));
            acc = add(acc, scalar_probe(g, softmax_rows(b), prng));
            acc = add(acc, scalar_probe(g, log_clamped(b), prng));
            acc = add(acc, scalar_probe(g, mul(a, b), prng));
            acc = add(acc, mean(mul(a, a)));
            const Var rows[] = {a, b};
            acc = add(acc, scalar_probe(g, concat(rows, 0), prng));
            acc = add(acc, scalar_probe(g, concat(rows, 1), prng));
            return acc;
        };
        // Stay away from the ReLU kink.
        bool near_kink = false;
        for (double v : ps.value("a").values()) near_kink |= std::abs(v - 0.7) < 1e-3;
        if (near_kink) continue;
        CHECK(max_gradient_error(ps, build) < 1e-3);
    }
}

TEST_CASE("unused parameters receive zero gradient") {
    ParameterStore ps;
    ps.add("used", Tensor::from_rows({{1, 2}}));
    ps.add("unused", Tensor::from_rows({{3, 4}}));
    ps.grad("unused").fill(7.0);
    ps.zero_grad();
    Graph g(&ps);
    g.backward(sum(g.parameter("used")));
    CHECK(ps.grad("unused") == Tensor::from_rows({{0, 0}}));
}

TEST_CASE("errors") {
    ParameterStore ps;
    ps.add("w", Tensor::from_rows({{1, 2}, {3, 4}}));
    Graph g(&ps);
    SUBCASE("shape mismatch names the node") {
        try {
            matmul(g.input(Tensor::matrix(1, 3)), g.parameter("w"));
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("matmul") != std::string::npos);
            CHECK(std::string(e.what()).find("node") != std::string::npos);
        }
    }
    SUBCASE("backward needs a scalar") { CHECK_THROWS_AS(g.backward(g.parameter("w")), ShapeError); }
    SUBCASE("read-only graphs cannot back-propagate into parameters") {
        Graph ro(&std::as_const(ps));
        Var s = sum(ro.parameter("w"));
        CHECK(s.value()[0] == 10.0);
        CHECK_THROWS(ro.backward(s));
    }
    SUBCASE("mul needs equal shapes") { CHECK_THROWS_AS(mul(g.parameter("w"), g.input(Tensor::matrix(1, 2))), ShapeError); }
}

TEST_CASE("forward is bitwise repeatable") {
    std::mt19937_64 rng(5);
    ParameterStore ps;
    ps.add("w", oracle::random_matrix(4, 4, rng));
    const Tensor x = oracle::random_matrix(8, 4, rng);
    auto run = [&] {
        Graph g(&std::as_const(ps));
        return softmax_rows(l2_normalize_rows(matmul(g.input(x), g.parameter("w")))).value();
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint format") {
    ParameterStore ps;
    ps.add("b.bias", Tensor::from_rows({{0.1, -0.2, 1e300}}));
    ps.add("a.weight", Tensor::from_rows({{1, 2}, {3, 4}}));
    const auto bytes = serialize(ps);

    SUBCASE("header and layout") {
        REQUIRE(bytes.size() > 12);
        CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NOPS");
        CHECK(nops::binary::get_le<std::uint32_t>(bytes.data() + 4) == kCheckpointFormat);
        CHECK(nops::binary::get_le<std::uint32_t>(bytes.data() + 8) == 2);
        // First entry is the lexicographically smallest name.
        CHECK(nops::binary::get_le<std::uint32_t>(bytes.data() + 12) == 8);
        CHECK(std::string(bytes.begin() + 16, bytes.begin() + 24) == "a.weight");
    }
    SUBCASE("round trip is exact") {
        const ParameterStore back = deserialize(bytes);
        CHECK(serialize(back) == bytes);
        CHECK(back.value("b.bias") == ps.value("b.bias"));
    }
    SUBCASE("corruption is rejected") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(deserialize(bad), CheckpointError);
        auto version = bytes;
        version[4] = 99;
        CHECK_THROWS_AS(deserialize(version), CheckpointError);
        auto truncated = bytes;
        truncated.resize(truncated.size() - 3);
        CHECK_THROWS_AS(deserialize(truncated), CheckpointError);
    }
    SUBCASE("file round trip") {
        const auto path = std::filesystem::temp_directory_path() / "nops_test_ckpt" / "model.ckpt";
        save_checkpoint(ps, path);
        CHECK(serialize(load_checkpoint(path)) == bytes);
        std::filesystem::remove_all(path.parent_path());
    }
}
