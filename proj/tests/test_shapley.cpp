#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "posce/error.hpp"
#include "posce/rng.hpp"
#include "posce/shapley.hpp"

using namespace posce;

namespace {

CoalitionGame two_player() { return CoalitionGame::from_table({0.0, 0.2, 0.5, 0.9}); }

CoalitionGame additive(std::vector<double> c) {
    const auto n = c.size();
    return CoalitionGame(n, [c](const Coalition& s) {
        double v = 0.0;
        for (auto i : s.members()) v += c[i];
        return v;
    });
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

}  // namespace

TEST_SUITE("shapley") {

TEST_CASE("coalition bitset operations") {
    Coalition c(70);
    CHECK(c.empty());
    c.insert(3);
    c.insert(65);
    CHECK(c.contains(3));
    CHECK(c.contains(65));
    CHECK_FALSE(c.contains(4));
    CHECK(c.size() == 2);
    CHECK(c.members() == std::vector<std::size_t>{3, 65});
    c.erase(3);
    CHECK(c.size() == 1);
    CHECK_THROWS_AS(c.insert(70), Error);
    CHECK(Coalition::from_mask(4, 0b1010).members() == std::vector<std::size_t>{1, 3});
    CHECK(Coalition::full(5).size() == 5);
    CHECK(Coalition::from_mask(3, 0b101).mask() == 0b101);
}

TEST_CASE("coalition weights are exact rationals") {
    CHECK(coalition_weight(3, 0) == Rational{1, 3});
    CHECK(coalition_weight(3, 1) == Rational{1, 6});
    CHECK(coalition_weight(1, 0) == Rational{1, 1});
    for (std::size_t n = 1; n <= 8; ++n) {
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const auto w = coalition_weight(n, s);
            total += binomial(n - 1, s) * w.to_double();
            CHECK(w.to_double() == doctest::Approx(oracle::factorial(n - s - 1) * oracle::factorial(s) /
                                                   oracle::factorial(n)));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK_THROWS_AS(coalition_weight(0, 0), Error);
    CHECK_THROWS_AS(coalition_weight(3, 3), Error);
}

TEST_CASE("enumerate_coalitions order and counts") {
    CHECK(enumerate_coalitions(2) == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(enumerate_coalitions(0) == std::vector<std::uint64_t>{0});
    CHECK(enumerate_coalitions(4).size() == 16);
    CHECK(nonempty_coalition_count(4) == 15);
    CHECK(nonempty_coalition_count(2) == 3);
    CHECK_THROWS_AS(enumerate_coalitions(kMaxExactPlayers + 1), Error);
}

TEST_CASE("marginal contributions") {
    const auto add = additive({0.5, 0.5, 0.5});
    for (std::uint64_t m = 0; m < 8; ++m) {
        for (std::size_t p = 0; p < 3; ++p) {
            if (m & (1U << p)) continue;
            CHECK(marginal_contribution(add, Coalition::from_mask(3, m), p) == doctest::Approx(0.5));
        }
    }
    const CoalitionGame constant(3, [](const Coalition&) { return 0.7; });
    CHECK(marginal_contribution(constant, Coalition::from_mask(3, 0b010), 0) == 0.0);
    const auto g = CoalitionGame::from_table({0.2, 0.9});
    CHECK(marginal_contribution(g, Coalition(1), 0) == doctest::Approx(0.7));
    CHECK_THROWS_AS(marginal_contribution(g, Coalition::from_mask(1, 1), 0), Error);
}

TEST_CASE("exact values on small games") {
    const auto v = shapley_exact(two_player());
    REQUIRE(v.values.size() == 2);
    CHECK(v.values[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(v.values[1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(v.method == ShapleyMethod::Exact);
    const auto brute = oracle::shapley_all_permutations(2, {0.0, 0.2, 0.5, 0.9});
    CHECK(v.values[0] == doctest::Approx(brute[0]));

    const auto a = shapley_exact(additive({0.1, -0.4, 2.5, 0.0}));
    CHECK(a.values[0] == doctest::Approx(0.1));
    CHECK(a.values[1] == doctest::Approx(-0.4));
    CHECK(a.values[2] == doctest::Approx(2.5));
    CHECK(a.values[3] == 0.0);

    CHECK(shapley_exact(CoalitionGame::from_table({0.4})).values.empty());
    CHECK_THROWS_AS(shapley_exact(CoalitionGame(kMaxExactPlayers + 1, [](const Coalition&) { return 0.0; })),
                    Error);
}

TEST_CASE("exact values match the subset-formula oracle and the reference kernel") {
    Rng rng(7);
    for (int g = 0; g < 30; ++g) {
        const std::size_t n = 1 + rng.below(9);
        const auto table = oracle::random_table(n, rng);
        const auto game = CoalitionGame::from_table(table);
        const auto fast = shapley_exact(game);
        const auto expected = oracle::shapley_by_subsets(n, table);
        const auto ref = reference::shapley_exact(game);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(fast.values[i] == doctest::Approx(expected[i]).epsilon(1e-12));
            CHECK(ref.values[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("efficiency holds up to twelve players") {
    Rng rng(8);
    for (std::size_t n : {10, 12}) {
        const auto table = oracle::random_table(n, rng);
        const auto v = shapley_exact(CoalitionGame::from_table(table));
        const double sum = std::accumulate(v.values.begin(), v.values.end(), 0.0);
        CHECK(std::abs(sum - (table.back() - table.front())) <= 1e-9);
    }
}

TEST_CASE("relabelling players permutes values") {
    Rng rng(9);
    const std::size_t n = 6;
    const auto table = oracle::random_table(n, rng);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<double> relabelled(table.size());
    for (std::uint64_t m = 0; m < table.size(); ++m) {
        std::uint64_t image = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (m & (std::uint64_t{1} << i)) image |= std::uint64_t{1} << perm[i];
        }
        relabelled[image] = table[m];
    }
    const auto a = shapley_exact(CoalitionGame::from_table(table));
    const auto b = shapley_exact(CoalitionGame::from_table(relabelled));
    for (std::size_t i = 0; i < n; ++i) CHECK(b.values[perm[i]] == doctest::Approx(a.values[i]).epsilon(1e-12));
}

TEST_CASE("dummy players receive zero") {
    const CoalitionGame g(4, [](const Coalition& s) {
        return (s.contains(0) ? 0.3 : 0.0) + (s.contains(1) && s.contains(2) ? 0.5 : 0.0);
    });
    const auto v = shapley_exact(g);
    CHECK(std::abs(v.values[3]) <= 1e-12);
    const auto report = verify_axioms(g, v, 1e-9);
    CHECK(report.passed());
    CHECK(std::find(report.dummy_players.begin(), report.dummy_players.end(), 3) != report.dummy_players.end());
}

TEST_CASE("verify_axioms flags perturbed values") {
    const auto g = two_player();
    auto v = shapley_exact(g);
    CHECK(verify_axioms(g, v, 1e-9).passed());
    v.values[0] += 0.1;
    const auto r = verify_axioms(g, v, 1e-9);
    CHECK_FALSE(r.efficiency);
    CHECK(r.efficiency_gap == doctest::Approx(0.1));

    const auto sym = CoalitionGame::from_table({0.0, 0.3, 0.3, 0.6});
    const auto sv = shapley_exact(sym);
    CHECK(sv.values[0] == doctest::Approx(0.3));
    CHECK(sv.values[1] == doctest::Approx(0.3));
    const auto sr = verify_axioms(sym, sv, 1e-9);
    CHECK(sr.symmetry);
    CHECK(sr.symmetric_pairs.size() == 1);
}

TEST_CASE("permutation estimator") {
    const CoalitionGame constant(5, [](const Coalition&) { return 0.42; });
    for (auto x : shapley_permutation(constant, 50, 3).values) CHECK(x == 0.0);

    const auto one = shapley_permutation(CoalitionGame::from_table({0.0, 0.4}), 1, 11);
    CHECK(one.values[0] == doctest::Approx(0.4));

    const auto est = shapley_permutation(two_player(), 10000, 42);
    CHECK(std::abs(est.values[0] - 0.3) < 0.05);
    CHECK(std::abs(est.values[1] - 0.6) < 0.05);
    CHECK(est.method == ShapleyMethod::Permutation);
    CHECK(est.sample_count == 10000);
    CHECK(est.seed == 42);
    CHECK_THROWS_AS(shapley_permutation(two_player(), 0, 1), Error);
}

TEST_CASE("permutation estimates sum to the full-minus-empty gap") {
    Rng rng(10);
    const auto table = oracle::random_table(7, rng);
    const auto v = shapley_permutation(CoalitionGame::from_table(table), 300, 5);
    const double sum = std::accumulate(v.values.begin(), v.values.end(), 0.0);
    CHECK(sum == doctest::Approx(table.back() - table.front()).epsilon(1e-12));
}

TEST_CASE("kernels are bit-identical across thread counts and match the serial reference") {
    Rng rng(11);
    const auto table = oracle::random_table(10, rng);
    const auto game = CoalitionGame::from_table(table);
    const auto e1 = shapley_exact(game, 1);
    const auto e4 = shapley_exact(game, 4);
    CHECK(e1.values == e4.values);

    const auto p1 = shapley_permutation(game, 3000, 77, 1);
    const auto p3 = shapley_permutation(game, 3000, 77, 3);
    const auto pr = reference::shapley_permutation(game, 3000, 77);
    CHECK(p1.values == p3.values);
    for (std::size_t i = 0; i < p1.values.size(); ++i) {
        CHECK(p1.values[i] == doctest::Approx(pr.values[i]).epsilon(1e-12));
    }
    CHECK(shapley_permutation(game, 3000, 77).values == p1.values);
    CHECK(shapley_permutation(game, 3000, 78).values != p1.values);
}

TEST_CASE("exceptions inside payoffs propagate out of parallel kernels") {
    const CoalitionGame bad(6, [](const Coalition& s) -> double {
        if (s.size() == 4) throw Error(ErrorKind::Numeric, "boom");
        return 0.0;
    });
    CHECK_THROWS_AS(shapley_exact(bad, 4), Error);
    CHECK_THROWS_AS(shapley_permutation(bad, 100, 1, 4), Error);
}

TEST_CASE("game arithmetic") {
    const auto a = two_player();
    const auto b = CoalitionGame::from_table({1.0, 1.0, 2.0, 4.0});
    CHECK(sum_games(a, b).payoff(std::uint64_t{3}) == doctest::Approx(4.9));
    CHECK(scale_game(a, -2.0).payoff(std::uint64_t{1}) == doctest::Approx(-0.4));
    CHECK_THROWS_AS(sum_games(a, CoalitionGame::from_table({0.0, 1.0})), Error);
    CHECK_THROWS_AS(CoalitionGame::from_table({0.0, 1.0, 2.0}), Error);
}

}  // TEST_SUITE
