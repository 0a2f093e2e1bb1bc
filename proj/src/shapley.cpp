#include "posce/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <span>

#include "posce/error.hpp"
#include "posce/parallel.hpp"
#include "posce/rng.hpp"

namespace posce {

namespace {

constexpr std::size_t kWordBits = 64;
constexpr std::size_t kPermutationChunk = 1024;

void require_exact_cap(std::size_t players) {
    if (players > kMaxExactPlayers) {
        fail(ErrorKind::Validation,
             "exact Shapley enumeration is capped at " + std::to_string(kMaxExactPlayers) +
                 " players (got " + std::to_string(players) +
                 "); use the permutation estimator instead");
    }
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) {
        fail(ErrorKind::Numeric, "coalition weight denominator overflows 64 bits");
    }
    return out;
}

// C(n, s) with exact intermediate division.
std::uint64_t binomial(std::uint64_t n, std::uint64_t s) {
    s = std::min(s, n - s);
    std::uint64_t out = 1;
    for (std::uint64_t i = 1; i <= s; ++i) {
        const std::uint64_t g = std::gcd(out, i);
        out = checked_mul(out / g, (n - s + i) / (i / g));
    }
    return out;
}

}  // namespace

Coalition::Coalition(std::size_t players)
    : players_(players), words_((players + kWordBits - 1) / kWordBits, 0) {}

Coalition Coalition::from_mask(std::size_t players, std::uint64_t mask) {
    if (players > kWordBits) fail(ErrorKind::Validation, "bitmask coalitions hold at most 64 players");
    if (players < kWordBits && (mask >> players) != 0) {
        fail(ErrorKind::Validation, "bitmask names players beyond the game");
    }
    Coalition c(players);
    if (players > 0) c.words_[0] = mask;
    return c;
}

Coalition Coalition::full(std::size_t players) {
    Coalition c(players);
    for (std::size_t i = 0; i < players; ++i) c.insert(i);
    return c;
}

bool Coalition::contains(std::size_t player) const {
    if (player >= players_) return false;
    return (words_[player / kWordBits] >> (player % kWordBits)) & 1U;
}

void Coalition::insert(std::size_t player) {
    if (player >= players_) fail(ErrorKind::Validation, "player index out of range");
    words_[player / kWordBits] |= std::uint64_t{1} << (player % kWordBits);
}

void Coalition::erase(std::size_t player) {
    if (player >= players_) fail(ErrorKind::Validation, "player index out of range");
    words_[player / kWordBits] &= ~(std::uint64_t{1} << (player % kWordBits));
}

std::size_t Coalition::size() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::uint64_t Coalition::mask() const {
    if (players_ > kWordBits) fail(ErrorKind::Validation, "coalition too large for a bitmask");
    return words_.empty() ? 0 : words_[0];
}

std::vector<std::size_t> Coalition::members() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < players_; ++i) {
        if (contains(i)) out.push_back(i);
    }
    return out;
}

CoalitionGame::CoalitionGame(std::size_t players, PayoffFn payoff)
    : players_(players), payoff_(std::move(payoff)) {
    if (!payoff_) fail(ErrorKind::Validation, "coalition game needs a payoff function");
}

CoalitionGame CoalitionGame::from_table(std::vector<double> values) {
    if (values.empty() || !std::has_single_bit(values.size())) {
        fail(ErrorKind::Validation, "payoff table size must be a power of two");
    }
    const auto players = static_cast<std::size_t>(std::countr_zero(values.size()));
    return CoalitionGame(players, [table = std::move(values)](const Coalition& c) {
        return table[c.mask()];
    });
}

double CoalitionGame::payoff(const Coalition& coalition) const {
    if (coalition.player_count() != players_) {
        fail(ErrorKind::Validation, "coalition does not belong to this game");
    }
    return payoff_(coalition);
}

double CoalitionGame::payoff(std::uint64_t mask) const {
    return payoff_(Coalition::from_mask(players_, mask));
}

CoalitionGame sum_games(const CoalitionGame& a, const CoalitionGame& b) {
    if (a.player_count() != b.player_count()) {
        fail(ErrorKind::Validation, "games must share the same players");
    }
    return CoalitionGame(a.player_count(),
                         [a, b](const Coalition& c) { return a.payoff(c) + b.payoff(c); });
}

CoalitionGame scale_game(const CoalitionGame& game, double factor) {
    return CoalitionGame(game.player_count(),
                         [game, factor](const Coalition& c) { return factor * game.payoff(c); });
}

Rational coalition_weight(std::size_t players, std::size_t subset_size) {
    if (players == 0) fail(ErrorKind::Validation, "coalition weight needs at least one player");
    if (subset_size >= players) {
        fail(ErrorKind::Validation, "subset size " + std::to_string(subset_size) +
                                        " must be below the player count " +
                                        std::to_string(players));
    }
    return Rational{1, checked_mul(players, binomial(players - 1, subset_size))};
}

std::vector<std::uint64_t> enumerate_coalitions(std::size_t players) {
    require_exact_cap(players);
    std::vector<std::uint64_t> out(std::size_t{1} << players);
    std::iota(out.begin(), out.end(), std::uint64_t{0});
    return out;
}

std::uint64_t nonempty_coalition_count(std::size_t players) {
    if (players >= kWordBits) fail(ErrorKind::Validation, "coalition count overflows 64 bits");
    return (std::uint64_t{1} << players) - 1;
}

double marginal_contribution(const CoalitionGame& game, const Coalition& subset,
                             std::size_t player) {
    if (player >= game.player_count()) fail(ErrorKind::Validation, "player index out of range");
    if (subset.contains(player)) {
        fail(ErrorKind::Validation,
             "player " + std::to_string(player) + " is already in the coalition");
    }
    Coalition with = subset;
    with.insert(player);
    return game.payoff(with) - game.payoff(subset);
}

std::string to_string(ShapleyMethod method) {
    return method == ShapleyMethod::Exact ? "exact" : "permutation";
}

std::vector<double> payoff_table(const CoalitionGame& game, int threads) {
    const std::size_t n = game.player_count();
    require_exact_cap(n);
    const auto count = static_cast<std::int64_t>(std::size_t{1} << n);
    std::vector<double> table(static_cast<std::size_t>(count));
    ExceptionTrap trap;
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads) if (threads > 1)
    for (std::int64_t mask = 0; mask < count; ++mask) {
        trap.run([&] {
            table[static_cast<std::size_t>(mask)] = game.payoff(static_cast<std::uint64_t>(mask));
        });
    }
    trap.rethrow();
    return table;
}

std::vector<double> shapley_from_table(std::size_t players, const std::vector<double>& table,
                                       int threads) {
    require_exact_cap(players);
    if (table.size() != (std::size_t{1} << players)) {
        fail(ErrorKind::Validation, "payoff table does not match the player count");
    }
    std::vector<double> weights(players);
    for (std::size_t s = 0; s < players; ++s) weights[s] = coalition_weight(players, s).to_double();

    std::vector<double> values(players, 0.0);
    const auto n = static_cast<std::int64_t>(players);
    // Marginals are summed per coalition size first so each size's weight
    // multiplies once; the visiting order is fixed, so the result does not
    // depend on the thread count.
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        std::vector<double> by_size(players, 0.0);
        for (std::uint64_t mask = 0; mask < table.size(); ++mask) {
            if (mask & bit) continue;
            by_size[static_cast<std::size_t>(std::popcount(mask))] += table[mask | bit] - table[mask];
        }
        double value = 0.0;
        for (std::size_t s = 0; s < players; ++s) value += weights[s] * by_size[s];
        values[static_cast<std::size_t>(i)] = value;
    }
    return values;
}

ShapleyValues shapley_exact(const CoalitionGame& game, int threads) {
    const auto table = payoff_table(game, threads);
    return ShapleyValues{shapley_from_table(game.player_count(), table, threads),
                         ShapleyMethod::Exact, 0, 0};
}

ShapleyValues shapley_permutation(const CoalitionGame& game, std::size_t samples,
                                  std::uint64_t seed, int threads) {
    if (samples == 0) fail(ErrorKind::Validation, "permutation estimator needs at least one sample");
    const std::size_t n = game.player_count();
    ShapleyValues out{std::vector<double>(n, 0.0), ShapleyMethod::Permutation, samples, seed};
    if (n == 0) return out;

    const double empty_payoff = game.payoff(Coalition(n));
    const std::size_t chunks = (samples + kPermutationChunk - 1) / kPermutationChunk;
    std::vector<std::vector<double>> chunk_sums(chunks, std::vector<double>(n, 0.0));

    ExceptionTrap trap;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
        trap.run([&] {
            auto& sums = chunk_sums[static_cast<std::size_t>(c)];
            std::vector<std::size_t> order(n);
            const std::size_t begin = static_cast<std::size_t>(c) * kPermutationChunk;
            const std::size_t end = std::min(samples, begin + kPermutationChunk);
            for (std::size_t j = begin; j < end; ++j) {
                Rng rng(derive_seed(seed, j));
                std::iota(order.begin(), order.end(), std::size_t{0});
                rng.shuffle(std::span<std::size_t>(order));
                Coalition coalition(n);
                double previous = empty_payoff;
                for (std::size_t player : order) {
                    coalition.insert(player);
                    const double current = game.payoff(coalition);
                    sums[player] += current - previous;
                    previous = current;
                }
            }
        });
    }
    trap.rethrow();

    for (const auto& sums : chunk_sums) {
        for (std::size_t i = 0; i < n; ++i) out.values[i] += sums[i];
    }
    for (auto& v : out.values) v /= static_cast<double>(samples);
    return out;
}

AxiomReport verify_axioms(const CoalitionGame& game, const ShapleyValues& values,
                          double tolerance) {
    const std::size_t n = game.player_count();
    require_exact_cap(n);
    if (values.values.size() != n) fail(ErrorKind::Validation, "value vector does not match the game");
    const auto table = payoff_table(game);
    const std::uint64_t full = table.size() - 1;

    AxiomReport report;
    const double total = std::accumulate(values.values.begin(), values.values.end(), 0.0);
    report.efficiency_gap = total - (table[full] - table[0]);
    report.efficiency = std::abs(report.efficiency_gap) <= tolerance;

    report.symmetry = true;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::uint64_t bi = std::uint64_t{1} << i;
            const std::uint64_t bj = std::uint64_t{1} << j;
            bool interchangeable = true;
            for (std::uint64_t mask = 0; mask <= full && interchangeable; ++mask) {
                if (mask & (bi | bj)) continue;
                interchangeable = std::abs(table[mask | bi] - table[mask | bj]) <= tolerance;
            }
            if (!interchangeable) continue;
            report.symmetric_pairs.emplace_back(i, j);
            if (std::abs(values.values[i] - values.values[j]) > tolerance) report.symmetry = false;
        }
    }

    report.dummy = true;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        bool null_player = true;
        for (std::uint64_t mask = 0; mask <= full && null_player; ++mask) {
            if (mask & bit) continue;
            null_player = std::abs(table[mask | bit] - table[mask]) <= tolerance;
        }
        if (!null_player) continue;
        report.dummy_players.push_back(i);
        if (std::abs(values.values[i]) > tolerance) report.dummy = false;
    }
    return report;
}

}  // namespace posce
