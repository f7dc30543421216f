#include "monet/metrics.hpp"

#include "monet/nn.hpp"
#include "monet/tape.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace monet;
using oracles::random_cloud;

TEST_CASE("chamfer hand-evaluated cases") {
    PointCloud a(1, 3), b(1, 3);
    a << 0, 0, 0;
    b << 3, 4, 0;
    CHECK(metrics::chamfer(a, a) == 0.0);
    CHECK(metrics::chamfer(a, b) == doctest::Approx(10.0));

    PointCloud p(2, 3), q(2, 3);
    p << 0, 0, 0, 1, 0, 0;
    q << 0, 0, 0, 0, 0, 0;
    CHECK(metrics::chamfer(p, q) == doctest::Approx(0.5));
}

TEST_CASE("chamfer symmetry, zero, nonnegativity") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const auto p = random_cloud(24, seed);
        const auto q = random_cloud(24, seed + 100);
        const double pq = metrics::chamfer(p, q);
        CHECK(pq == metrics::chamfer(q, p));
        CHECK(pq >= 0.0);
        CHECK(metrics::chamfer(p, p) == 0.0);
    }
}

TEST_CASE("emd matches hand-enumerated cases") {
    PointCloud p(2, 3), q(2, 3);
    p << 0, 0, 0, 0, 0, 0;
    q << 1, 0, 0, 3, 0, 0;
    const auto [d, assign] = metrics::emd_exact(p, q);
    CHECK(d == doctest::Approx(2.0));
    CHECK(assign.mapping.size() == 2);

    PointCloud line(3, 3), shifted(3, 3);
    line << 0, 0, 0, 1, 0, 0, 2, 0, 0;
    shifted << 0.5, 0, 0, 1.5, 0, 0, 2.5, 0, 0;
    CHECK(metrics::emd_exact(line, shifted).first == doctest::Approx(0.5));
    CHECK(metrics::emd_bruteforce(line, shifted) == doctest::Approx(0.5));
}

TEST_CASE("emd of identical clouds is zero with a valid bijection") {
    const auto p = random_cloud(12, 9);
    PointCloud q = p;
    // reversed order still assigns duplicates at zero cost
    for (int i = 0; i < p.rows(); ++i) q.row(i) = p.row(p.rows() - 1 - i);
    const auto [d, assign] = metrics::emd_exact(p, q);
    CHECK(d == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<bool> seen(12, false);
    for (int target : assign.mapping) {
        CHECK(!seen[static_cast<std::size_t>(target)]);
        seen[static_cast<std::size_t>(target)] = true;
    }
}

TEST_CASE("emd_exact equals the factorial oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const int n = 2 + static_cast<int>(seed % 5);
        const auto p = random_cloud(n, 300 + seed);
        const auto q = random_cloud(n, 600 + seed);
        const double exact = metrics::emd_exact(p, q).first;
        const double brute = metrics::emd_bruteforce(p, q);
        CHECK(std::abs(exact - brute) <= 1e-9);
    }
}

TEST_CASE("emd errors") {
    const auto p = random_cloud(9, 1);
    CHECK_THROWS_AS(metrics::emd_bruteforce(p, p), CapacityError);
    const auto big = random_cloud(20, 2);
    CHECK_THROWS_AS(metrics::emd_exact(big, big, 10), CapacityError);
    const auto q = random_cloud(8, 3);
    CHECK_THROWS_AS(metrics::emd_exact(p, q), InputError);
}

TEST_CASE("chamfer is bounded by twice the EMD") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = random_cloud(16, 900 + seed);
        const auto q = random_cloud(16, 1900 + seed);
        CHECK(metrics::chamfer(p, q) <= 2.0 * metrics::emd_exact(p, q).first + 1e-9);
    }
}

TEST_CASE("both metrics are translation invariant") {
    const auto p = random_cloud(14, 71);
    const auto q = random_cloud(14, 72);
    Eigen::RowVector3d shift(3.0, -2.0, 11.0);
    PointCloud ps = p.rowwise() + shift;
    PointCloud qs = q.rowwise() + shift;
    CHECK(std::abs(metrics::chamfer(p, q) - metrics::chamfer(ps, qs)) <= 1e-9);
    CHECK(std::abs(metrics::emd_exact(p, q).first - metrics::emd_exact(ps, qs).first) <= 1e-9);
}

TEST_CASE("chamfer loss gradient passes finite differences") {
    const auto target = random_cloud(10, 55);
    const auto start = random_cloud(10, 56);

    nn::ParamStore params;
    params.create("pred", 10, 3) = start;
    auto loss_fn = [&](nn::ParamStore& store, bool want_grads) {
        nn::Tape tape;
        nn::Var pred = tape.param(store, "pred");
        nn::Var loss = tape.chamfer(pred, target);
        if (want_grads) {
            tape.backward(loss);
            tape.accumulate_param_grads();
        }
        return tape.val(loss)(0, 0);
    };
    const auto result = nn::grad_check(loss_fn, params, 1e-5);
    CHECK(result.max_rel_error < 1e-4);
}
