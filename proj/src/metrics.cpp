#include "posce/metrics.hpp"

#include "posce/error.hpp"

namespace posce {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::size_t EvalReport::total() const {
    std::size_t n = 0;
    for (const auto& row : confusion)
        for (auto c : row) n += c;
    return n;
}

std::size_t argmax_class(std::span<const double> probabilities) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return best;
}

EvalReport score_predictions(std::span<const std::size_t> gold, std::span<const std::size_t> predicted) {
    if (gold.size() != predicted.size()) fail(ErrorKind::Validation, "gold and predicted sizes differ");
    EvalReport r;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= 3 || predicted[i] >= 3) fail(ErrorKind::Validation, "class index out of range");
        ++r.confusion[gold[i]][predicted[i]];
    }
    std::size_t correct = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        correct += r.confusion[c][c];
        double predicted_c = 0.0, gold_c = 0.0;
        for (std::size_t o = 0; o < 3; ++o) {
            predicted_c += static_cast<double>(r.confusion[o][c]);
            gold_c += static_cast<double>(r.confusion[c][o]);
        }
        auto& s = r.per_class[c];
        const auto tp = static_cast<double>(r.confusion[c][c]);
        s.precision = ratio(tp, predicted_c);
        s.recall = ratio(tp, gold_c);
        // 2PR/(P+R) in count form; exact for integer counts.
        s.f1 = ratio(2.0 * tp, 2.0 * tp + (predicted_c - tp) + (gold_c - tp));
    }
    r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(gold.size()));
    r.macro_f1 = (r.per_class[0].f1 + r.per_class[1].f1 + r.per_class[2].f1) / 3.0;
    return r;
}

}  // namespace posce
