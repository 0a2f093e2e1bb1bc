#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace posce {

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::array<ClassScores, 3> per_class{};
    /// confusion[gold][predicted]
    std::array<std::array<std::size_t, 3>, 3> confusion{};

    std::size_t total() const;
};

/// Index of the largest probability; ties go to the lowest index.
std::size_t argmax_class(std::span<const double> probabilities);

/// Ratios with a zero denominator count as 0; macro-F1 is the unweighted mean.
EvalReport score_predictions(std::span<const std::size_t> gold, std::span<const std::size_t> predicted);

}  // namespace posce
