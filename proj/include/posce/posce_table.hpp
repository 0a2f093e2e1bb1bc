#pragma once

// Position-based contributive embeddings: per-sentence Shapley profiles over
// context positions, aggregated into one profile row per absolute aspect
// position.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posce/corpus.hpp"
#include "posce/shapley.hpp"
#include "posce/textmodel.hpp"

namespace posce {

enum class EstimatorMode { Auto, Exact, Permutation };

std::string to_string(EstimatorMode mode);
EstimatorMode parse_estimator_mode(std::string_view text);

struct EstimatorConfig {
    EstimatorMode mode = EstimatorMode::Auto;
    /// Auto switches to sampling above this many context words.
    std::size_t exact_max_players = 12;
    std::size_t samples = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// A sentence cropped to max_len and mapped to embedding rows.
struct EncodedSentence {
    std::string id;
    std::vector<std::size_t> token_ids;
    std::size_t aspect_from = 0;
    std::size_t aspect_to = 0;
    std::size_t label = 0;

    std::size_t length() const noexcept { return token_ids.size(); }
    std::size_t aspect_position() const noexcept { return aspect_from; }
};

/// Sentences longer than max_len keep their first max_len tokens when the
/// aspect starts inside them; otherwise the window ends at the aspect start.
EncodedSentence encode_sentence(const EmbeddingTable& embeddings, const Sentence& sentence,
                                std::size_t max_len);
std::vector<EncodedSentence> encode_corpus(const EmbeddingTable& embeddings, const Corpus& corpus,
                                           std::size_t max_len);

struct AspectGameSpec {
    const EncodedSentence* sentence = nullptr;
    /// Class whose probability is the payoff; the gold label when building tables.
    std::size_t payoff_class = 0;

    static AspectGameSpec for_label(const EncodedSentence& s) { return {&s, s.label}; }
};

/// Sentence positions taken by each player of the sentence's game, in player order.
/// The aspect span is not a player.
std::vector<std::size_t> context_positions(const EncodedSentence& sentence);

/// Sentence positions that form the phrase of a coalition: the aspect span
/// plus the member context words, in original order.
std::vector<std::size_t> coalition_phrase(const EncodedSentence& sentence, const Coalition& coalition);

/// Payoff(S) is the payoff-class probability of the phrase obtained by deleting
/// every context word outside S, re-embedded at its shortened length with a
/// zero PosCE profile. The game refers to the model and sentence, which must
/// outlive it.
CoalitionGame game_from_sentence(const Classifier& model, const AspectGameSpec& spec);

struct SentenceAttribution {
    Vector raw;  // length L; zero on the aspect span
    ShapleyValues shapley;
};

/// Stream seed for a sentence's permutation estimate.
std::uint64_t sentence_seed(const EstimatorConfig& config, const std::string& sentence_id);

SentenceAttribution sentence_profile(const Classifier& model, const AspectGameSpec& spec,
                                     const EstimatorConfig& estimator, int threads = 1);

struct PosceTable {
    std::size_t max_len = 0;
    Matrix profiles;                 // max_len x max_len, row t = aspect at position t
    std::vector<std::size_t> counts; // sentences aggregated per row
    int built_at_epoch = -1;
    EstimatorConfig estimator;

    static PosceTable unbuilt(std::size_t max_len);
    bool built() const noexcept { return built_at_epoch >= 0 || total_count() > 0; }
    std::size_t total_count() const;
    void validate() const;
};

bool bitwise_equal(const PosceTable& a, const PosceTable& b);

struct BuildStats {
    std::size_t sentences = 0;
    std::size_t exact_sentences = 0;
    std::size_t sampled_sentences = 0;
    std::uint64_t payoff_evaluations = 0;
};

struct BuildResult {
    PosceTable table;
    BuildStats stats;
};

/// Averages raw profiles of sentences sharing an aspect position (zero-padded
/// to max_len) and softmaxes each row. Rows without sentences are uniform.
/// Parallel over sentences; the reduction runs in corpus order.
BuildResult build_table(const Classifier& model, std::span<const EncodedSentence> corpus,
                        std::size_t max_len, const EstimatorConfig& estimator, int threads = 1);

/// First L entries of row min(t, max_len-1), renormalised to sum to one.
/// Unbuilt rows give the uniform profile 1/L.
Vector lookup_profile(const PosceTable& table, std::size_t aspect_position, std::size_t length);

Vector uniform_profile(std::size_t length);

/// L * profile - 1: the model-facing form of a looked-up profile. Uniform
/// profiles map to zero, matching the zero profile used inside games.
Vector relative_profile(const Vector& profile);

namespace reference {

/// Serial build using the serial Shapley kernels.
BuildResult build_table(const Classifier& model, std::span<const EncodedSentence> corpus,
                        std::size_t max_len, const EstimatorConfig& estimator);

}  // namespace reference

}  // namespace posce
