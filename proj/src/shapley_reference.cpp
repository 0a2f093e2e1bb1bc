#include <numeric>
#include <span>

#include "posce/error.hpp"
#include "posce/rng.hpp"
#include "posce/shapley.hpp"

namespace posce::reference {

ShapleyValues shapley_exact(const CoalitionGame& game) {
    const std::size_t n = game.player_count();
    ShapleyValues out{std::vector<double>(n, 0.0), ShapleyMethod::Exact, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::uint64_t mask : enumerate_coalitions(n)) {
            const auto subset = Coalition::from_mask(n, mask);
            if (subset.contains(i)) continue;
            out.values[i] += coalition_weight(n, subset.size()).to_double() *
                             marginal_contribution(game, subset, i);
        }
    }
    return out;
}

ShapleyValues shapley_permutation(const CoalitionGame& game, std::size_t samples,
                                  std::uint64_t seed) {
    if (samples == 0) fail(ErrorKind::Validation, "permutation estimator needs at least one sample");
    const std::size_t n = game.player_count();
    ShapleyValues out{std::vector<double>(n, 0.0), ShapleyMethod::Permutation, samples, seed};
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < samples; ++j) {
        Rng rng(derive_seed(seed, j));
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        Coalition coalition(n);
        for (std::size_t player : order) {
            out.values[player] += marginal_contribution(game, coalition, player);
            coalition.insert(player);
        }
    }
    for (auto& v : out.values) v /= static_cast<double>(samples);
    return out;
}

}  // namespace posce::reference
