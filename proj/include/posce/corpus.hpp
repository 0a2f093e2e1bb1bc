#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace posce {

enum class Polarity : std::uint8_t { Positive = 0, Neutral = 1, Negative = 2 };

std::string_view to_string(Polarity polarity);
/// Case-insensitive; throws a validation error naming unknown values.
Polarity parse_polarity(std::string_view text);
inline std::size_t class_index(Polarity p) { return static_cast<std::size_t>(p); }

struct Sentence {
    std::string id;
    std::vector<std::string> tokens;
    std::size_t aspect_from = 0;  // token span, half-open
    std::size_t aspect_to = 0;
    Polarity polarity = Polarity::Neutral;

    std::size_t length() const noexcept { return tokens.size(); }
    std::size_t aspect_position() const noexcept { return aspect_from; }
    void validate() const;
};

enum class Split { Unspecified, Train, Test };

struct Corpus {
    std::vector<Sentence> sentences;
    Split split = Split::Unspecified;

    std::size_t size() const noexcept { return sentences.size(); }
    bool empty() const noexcept { return sentences.empty(); }
    /// Distinct tokens in first-seen order.
    std::vector<std::string> vocabulary() const;
    std::vector<std::size_t> class_histogram() const;
    /// Checks every sentence and id uniqueness.
    void validate() const;
};

struct Token {
    std::string text;
    std::size_t char_from = 0;  // code-point offsets into the source text
    std::size_t char_to = 0;
};

/// Lowercases ASCII letters, splits on Unicode whitespace and strips leading
/// and trailing ASCII punctuation. Tokens that strip to nothing are dropped.
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

/// Builds a sentence from a raw record. The aspect is the run of tokens
/// overlapping the code-point range [char_from, char_to).
Sentence sentence_from_record(std::string id, std::string_view text, std::size_t char_from,
                              std::size_t char_to, std::string_view polarity);

enum class DatasetFormat { Auto, Tsv, Jsonl };

/// One record per line: `id<TAB>text<TAB>char_from<TAB>char_to<TAB>polarity`,
/// or a JSON object with the same keys (`from`/`to` for the offsets).
/// Blank lines and lines starting with '#' are ignored.
Corpus parse_dataset(std::istream& in, DatasetFormat format = DatasetFormat::Auto,
                     Split split = Split::Unspecified);
Corpus load_dataset(const std::filesystem::path& path, DatasetFormat format = DatasetFormat::Auto,
                    Split split = Split::Unspecified);

/// Writes the TSV form; texts are the tokens joined by single spaces.
void write_dataset(std::ostream& out, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticConfig {
    std::size_t train_size = 300;
    std::size_t test_size = 150;
    std::size_t min_len = 5;
    std::size_t max_len = 10;
    /// Chance that a sentence carries an opinion word of another polarity
    /// far from the aspect (when the sentence has room for one).
    double distractor_rate = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SyntheticCorpus {
    Corpus train;
    Corpus test;
};

/// Template sentences whose polarity is set by an opinion word within two
/// positions of the aspect (usually two to its left). Distractor opinion
/// words sit at least three positions away. Classes are balanced per split.
SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

/// Vocabulary the generator can emit.
std::vector<std::string> synthetic_vocabulary();

/// Labelling rule of the generator: the polarity of the opinion word nearest
/// to the aspect within two positions, if any.
std::optional<Polarity> synthetic_oracle(const Sentence& sentence);

}  // namespace posce
