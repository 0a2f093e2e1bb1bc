#pragma once

// Cooperative-game engine: exact Shapley values by subset enumeration,
// Monte Carlo permutation estimation and axiom checks.
//
// Players are indexed 0..n-1. Coalitions of up to 64 players can be addressed
// by bitmask; larger ones use the word vector directly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace posce {

/// Largest player count for which subset enumeration is attempted.
inline constexpr std::size_t kMaxExactPlayers = 20;

class Coalition {
public:
    Coalition() = default;
    explicit Coalition(std::size_t players);

    static Coalition from_mask(std::size_t players, std::uint64_t mask);
    static Coalition full(std::size_t players);

    std::size_t player_count() const noexcept { return players_; }
    bool contains(std::size_t player) const;
    void insert(std::size_t player);
    void erase(std::size_t player);
    std::size_t size() const noexcept;
    bool empty() const noexcept { return size() == 0; }

    /// Bitmask view; only valid for player_count() <= 64.
    std::uint64_t mask() const;
    std::vector<std::size_t> members() const;

    friend bool operator==(const Coalition&, const Coalition&) = default;

private:
    std::size_t players_ = 0;
    std::vector<std::uint64_t> words_;
};

using PayoffFn = std::function<double(const Coalition&)>;

/// Characteristic function over n players. The payoff must be deterministic
/// and reentrant: kernels call it concurrently from several threads.
class CoalitionGame {
public:
    CoalitionGame(std::size_t players, PayoffFn payoff);

    /// Game given by an explicit table indexed by bitmask (size 2^n).
    static CoalitionGame from_table(std::vector<double> values);

    std::size_t player_count() const noexcept { return players_; }
    double payoff(const Coalition& coalition) const;
    double payoff(std::uint64_t mask) const;

private:
    std::size_t players_;
    PayoffFn payoff_;
};

CoalitionGame sum_games(const CoalitionGame& a, const CoalitionGame& b);
CoalitionGame scale_game(const CoalitionGame& game, double factor);

struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

/// Shapley weight (n-s-1)! s! / n! of a coalition of size s that excludes
/// the player being valued. Always reduces to 1 / (n * C(n-1, s)).
Rational coalition_weight(std::size_t players, std::size_t subset_size);

/// All 2^n subsets as bitmasks, ascending. The empty coalition comes first.
std::vector<std::uint64_t> enumerate_coalitions(std::size_t players);

/// Number of nonempty coalitions, 2^n - 1.
std::uint64_t nonempty_coalition_count(std::size_t players);

double marginal_contribution(const CoalitionGame& game, const Coalition& subset,
                             std::size_t player);

enum class ShapleyMethod { Exact, Permutation };

std::string to_string(ShapleyMethod method);

struct ShapleyValues {
    std::vector<double> values;
    ShapleyMethod method = ShapleyMethod::Exact;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;
};

/// Payoff of every coalition, indexed by bitmask. Evaluated once per subset,
/// in parallel over subsets.
std::vector<double> payoff_table(const CoalitionGame& game, int threads = 1);

/// Exact values by enumeration. Results are independent of `threads`.
ShapleyValues shapley_exact(const CoalitionGame& game, int threads = 1);

/// Values from a precomputed payoff table (see payoff_table).
std::vector<double> shapley_from_table(std::size_t players, const std::vector<double>& table,
                                       int threads = 1);

/// Monte Carlo estimate over `samples` uniformly random player orderings.
/// Sample j draws its ordering from a stream derived from (seed, j), so the
/// result is bit-identical for any thread count.
ShapleyValues shapley_permutation(const CoalitionGame& game, std::size_t samples,
                                  std::uint64_t seed, int threads = 1);

struct AxiomReport {
    bool efficiency = false;
    bool symmetry = false;
    bool dummy = false;
    double efficiency_gap = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> symmetric_pairs;
    std::vector<std::size_t> dummy_players;

    bool passed() const { return efficiency && symmetry && dummy; }
};

/// Checks Efficiency, Symmetry and Dummy exhaustively. Additivity spans two
/// games and is left to the caller (see sum_games / scale_game).
AxiomReport verify_axioms(const CoalitionGame& game, const ShapleyValues& values,
                          double tolerance);

namespace reference {

// Serial, formula-by-formula versions of the kernels above. Kept for
// testing and benchmarking; not used on the hot path.
ShapleyValues shapley_exact(const CoalitionGame& game);
ShapleyValues shapley_permutation(const CoalitionGame& game, std::size_t samples,
                                  std::uint64_t seed);

}  // namespace reference

}  // namespace posce
