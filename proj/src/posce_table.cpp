#include "posce/posce_table.hpp"

#include <algorithm>
#include <cstring>

#include "posce/error.hpp"
#include "posce/parallel.hpp"
#include "posce/rng.hpp"

namespace posce {

namespace {

bool use_exact(const EstimatorConfig& estimator, std::size_t players) {
    switch (estimator.mode) {
        case EstimatorMode::Exact: return true;
        case EstimatorMode::Permutation: return false;
        case EstimatorMode::Auto: return players <= estimator.exact_max_players;
    }
    return true;
}

std::uint64_t payoff_evaluations(const ShapleyValues& v) {
    const auto n = v.values.size();
    if (v.method == ShapleyMethod::Exact) return std::uint64_t{1} << n;
    return static_cast<std::uint64_t>(v.sample_count) * n + 1;
}

SentenceAttribution attribution_from(const EncodedSentence& sentence, ShapleyValues shapley) {
    SentenceAttribution out;
    out.raw = Vector::Zero(static_cast<Eigen::Index>(sentence.length()));
    const auto positions = context_positions(sentence);
    for (std::size_t p = 0; p < positions.size(); ++p) {
        out.raw[static_cast<Eigen::Index>(positions[p])] = shapley.values[p];
    }
    out.shapley = std::move(shapley);
    return out;
}

BuildResult aggregate(std::span<const EncodedSentence> corpus,
                      const std::vector<SentenceAttribution>& attributions, std::size_t max_len,
                      const EstimatorConfig& estimator) {
    BuildResult out;
    out.table = PosceTable::unbuilt(max_len);
    out.table.estimator = estimator;
    const auto m = static_cast<Eigen::Index>(max_len);
    Matrix sums = Matrix::Zero(m, m);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(std::min(corpus[i].aspect_position(), max_len - 1));
        const auto& raw = attributions[i].raw;
        const auto width = std::min<Eigen::Index>(raw.size(), m);
        sums.row(row).head(width) += raw.head(width).transpose();
        ++out.table.counts[static_cast<std::size_t>(row)];

        const auto& shapley = attributions[i].shapley;
        ++out.stats.sentences;
        if (shapley.method == ShapleyMethod::Exact) {
            ++out.stats.exact_sentences;
        } else {
            ++out.stats.sampled_sentences;
        }
        out.stats.payoff_evaluations += payoff_evaluations(shapley);
    }
    for (Eigen::Index t = 0; t < m; ++t) {
        const auto count = out.table.counts[static_cast<std::size_t>(t)];
        if (count == 0) continue;
        const Vector mean = sums.row(t).transpose() / static_cast<double>(count);
        out.table.profiles.row(t) = softmax(mean).transpose();
    }
    return out;
}

void check_build_inputs(std::span<const EncodedSentence> corpus, std::size_t max_len,
                        const EstimatorConfig& estimator) {
    if (corpus.empty()) fail(ErrorKind::Validation, "cannot build a PosCE table from an empty corpus");
    if (max_len == 0) fail(ErrorKind::Validation, "max_len must be positive");
    estimator.validate();
}

}  // namespace

std::string to_string(EstimatorMode mode) {
    switch (mode) {
        case EstimatorMode::Auto: return "auto";
        case EstimatorMode::Exact: return "exact";
        case EstimatorMode::Permutation: return "permutation";
    }
    return "auto";
}

EstimatorMode parse_estimator_mode(std::string_view text) {
    if (text == "auto") return EstimatorMode::Auto;
    if (text == "exact") return EstimatorMode::Exact;
    if (text == "permutation") return EstimatorMode::Permutation;
    fail(ErrorKind::Validation, "unknown estimator '" + std::string(text) +
                                    "' (expected auto, exact or permutation)");
}

void EstimatorConfig::validate() const {
    if (samples == 0) fail(ErrorKind::Validation, "estimator samples must be positive");
    if (exact_max_players > kMaxExactPlayers) {
        fail(ErrorKind::Validation, "exact_max_players may not exceed " +
                                        std::to_string(kMaxExactPlayers));
    }
}

EncodedSentence encode_sentence(const EmbeddingTable& embeddings, const Sentence& sentence,
                                std::size_t max_len) {
    sentence.validate();
    if (max_len == 0) fail(ErrorKind::Validation, "max_len must be positive");
    std::size_t start = 0;
    if (sentence.length() > max_len && sentence.aspect_from >= max_len) {
        start = sentence.aspect_from - (max_len - 1);
    }
    const std::size_t end = std::min(sentence.length(), start + max_len);
    EncodedSentence out;
    out.id = sentence.id;
    out.token_ids = embeddings.encode(
        std::span<const std::string>(sentence.tokens).subspan(start, end - start));
    out.aspect_from = sentence.aspect_from - start;
    out.aspect_to = std::min(sentence.aspect_to, end) - start;
    out.label = class_index(sentence.polarity);
    return out;
}

std::vector<EncodedSentence> encode_corpus(const EmbeddingTable& embeddings, const Corpus& corpus,
                                           std::size_t max_len) {
    std::vector<EncodedSentence> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus.sentences) out.push_back(encode_sentence(embeddings, s, max_len));
    return out;
}

std::vector<std::size_t> context_positions(const EncodedSentence& sentence) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sentence.length(); ++i) {
        if (i < sentence.aspect_from || i >= sentence.aspect_to) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> coalition_phrase(const EncodedSentence& sentence, const Coalition& coalition) {
    std::vector<std::size_t> out;
    std::size_t player = 0;
    for (std::size_t i = 0; i < sentence.length(); ++i) {
        if (i >= sentence.aspect_from && i < sentence.aspect_to) {
            out.push_back(i);
        } else if (coalition.contains(player++)) {
            out.push_back(i);
        }
    }
    return out;
}

CoalitionGame game_from_sentence(const Classifier& model, const AspectGameSpec& spec) {
    if (spec.sentence == nullptr) fail(ErrorKind::Validation, "game spec has no sentence");
    const auto& s = *spec.sentence;
    if (s.length() == 0) fail(ErrorKind::Validation, "cannot build a game from an empty sentence");
    if (!(s.aspect_from < s.aspect_to && s.aspect_to <= s.length())) {
        fail(ErrorKind::Validation, "aspect span outside sentence '" + s.id + "'");
    }
    if (spec.payoff_class >= kClassCount) fail(ErrorKind::Validation, "payoff class must be 0, 1 or 2");

    const std::size_t players = s.length() - (s.aspect_to - s.aspect_from);
    return CoalitionGame(players, [&model, &s, cls = spec.payoff_class](const Coalition& c) {
        const auto positions = coalition_phrase(s, c);
        std::vector<std::size_t> ids;
        ids.reserve(positions.size());
        std::size_t aspect = 0;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            if (positions[k] == s.aspect_from) aspect = k;
            ids.push_back(s.token_ids[positions[k]]);
        }
        const Vector zero = Vector::Zero(static_cast<Eigen::Index>(ids.size()));
        return model.predict(ids, zero, aspect)[static_cast<Eigen::Index>(cls)];
    });
}

std::uint64_t sentence_seed(const EstimatorConfig& config, const std::string& sentence_id) {
    return derive_seed(config.seed, stable_hash(sentence_id));
}

SentenceAttribution sentence_profile(const Classifier& model, const AspectGameSpec& spec,
                                     const EstimatorConfig& estimator, int threads) {
    estimator.validate();
    const auto game = game_from_sentence(model, spec);
    const auto& s = *spec.sentence;
    if (use_exact(estimator, game.player_count())) {
        return attribution_from(s, shapley_exact(game, threads));
    }
    return attribution_from(
        s, shapley_permutation(game, estimator.samples, sentence_seed(estimator, s.id), threads));
}

PosceTable PosceTable::unbuilt(std::size_t max_len) {
    if (max_len == 0) fail(ErrorKind::Validation, "max_len must be positive");
    PosceTable t;
    t.max_len = max_len;
    const auto m = static_cast<Eigen::Index>(max_len);
    t.profiles = Matrix::Constant(m, m, 1.0 / static_cast<double>(max_len));
    t.counts.assign(max_len, 0);
    return t;
}

std::size_t PosceTable::total_count() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

void PosceTable::validate() const {
    const auto m = static_cast<Eigen::Index>(max_len);
    if (max_len == 0 || profiles.rows() != m || profiles.cols() != m || counts.size() != max_len) {
        fail(ErrorKind::Validation, "PosCE table shape is inconsistent");
    }
    if (!profiles.allFinite()) fail(ErrorKind::Numeric, "PosCE table holds non-finite values");
    estimator.validate();
}

bool bitwise_equal(const PosceTable& a, const PosceTable& b) {
    return a.max_len == b.max_len && a.counts == b.counts && a.built_at_epoch == b.built_at_epoch &&
           a.profiles.rows() == b.profiles.rows() && a.profiles.cols() == b.profiles.cols() &&
           std::memcmp(a.profiles.data(), b.profiles.data(),
                       sizeof(double) * static_cast<std::size_t>(a.profiles.size())) == 0 &&
           a.estimator.mode == b.estimator.mode && a.estimator.samples == b.estimator.samples &&
           a.estimator.seed == b.estimator.seed &&
           a.estimator.exact_max_players == b.estimator.exact_max_players;
}

BuildResult build_table(const Classifier& model, std::span<const EncodedSentence> corpus,
                        std::size_t max_len, const EstimatorConfig& estimator, int threads) {
    check_build_inputs(corpus, max_len, estimator);
    std::vector<SentenceAttribution> attributions(corpus.size());
    ExceptionTrap trap;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(corpus.size()); ++i) {
        trap.run([&] {
            const auto& s = corpus[static_cast<std::size_t>(i)];
            attributions[static_cast<std::size_t>(i)] =
                sentence_profile(model, AspectGameSpec::for_label(s), estimator, 1);
        });
    }
    trap.rethrow();
    return aggregate(corpus, attributions, max_len, estimator);
}

Vector uniform_profile(std::size_t length) {
    const auto n = static_cast<Eigen::Index>(length);
    return Vector::Constant(n, 1.0 / static_cast<double>(length));
}

Vector relative_profile(const Vector& profile) {
    return (static_cast<double>(profile.size()) * profile.array() - 1.0).matrix();
}

Vector lookup_profile(const PosceTable& table, std::size_t aspect_position, std::size_t length) {
    if (length == 0) fail(ErrorKind::Validation, "profile length must be positive");
    if (table.max_len == 0) return uniform_profile(length);
    const auto row = std::min(aspect_position, table.max_len - 1);
    if (table.counts[row] == 0) return uniform_profile(length);
    const auto n = static_cast<Eigen::Index>(length);
    const auto width = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(table.max_len));
    Vector out = Vector::Zero(n);
    out.head(width) = table.profiles.row(static_cast<Eigen::Index>(row)).head(width).transpose();
    return out / out.sum();
}

namespace reference {

BuildResult build_table(const Classifier& model, std::span<const EncodedSentence> corpus,
                        std::size_t max_len, const EstimatorConfig& estimator) {
    check_build_inputs(corpus, max_len, estimator);
    std::vector<SentenceAttribution> attributions;
    for (const auto& s : corpus) {
        const auto game = game_from_sentence(model, AspectGameSpec::for_label(s));
        auto values = use_exact(estimator, game.player_count())
                          ? reference::shapley_exact(game)
                          : reference::shapley_permutation(game, estimator.samples,
                                                           sentence_seed(estimator, s.id));
        attributions.push_back(attribution_from(s, std::move(values)));
    }
    return aggregate(corpus, attributions, max_len, estimator);
}

}  // namespace reference

}  // namespace posce
