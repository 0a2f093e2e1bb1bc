#include <algorithm>
#include <array>
#include <cstdio>

#include "posce/corpus.hpp"
#include "posce/error.hpp"
#include "posce/rng.hpp"

namespace posce {

namespace {

constexpr std::array<std::string_view, 10> kAspects = {
    "screen", "battery", "keyboard", "service", "food",
    "staff",  "price",   "display",  "camera",  "menu"};

constexpr std::array<std::array<std::string_view, 5>, 3> kOpinions = {{
    {"great", "excellent", "amazing", "superb", "lovely"},
    {"okay", "average", "ordinary", "standard", "adequate"},
    {"terrible", "awful", "horrible", "poor", "dreadful"},
}};

constexpr std::array<std::string_view, 16> kFillers = {
    "the", "a", "was", "is", "and", "with", "very", "it",
    "this", "that", "of", "for", "my", "our", "they", "then"};

// Opinion offsets relative to the aspect, with their relative weights.
constexpr std::array<std::pair<int, double>, 4> kOpinionOffsets = {{
    {-2, 0.6}, {-1, 0.15}, {1, 0.15}, {2, 0.1}}};

constexpr int kOpinionReach = 2;

std::optional<Polarity> opinion_polarity(std::string_view token) {
    for (std::size_t c = 0; c < kOpinions.size(); ++c) {
        if (std::find(kOpinions[c].begin(), kOpinions[c].end(), token) != kOpinions[c].end()) {
            return static_cast<Polarity>(c);
        }
    }
    return std::nullopt;
}

template <std::size_t N>
std::string pick(Rng& rng, const std::array<std::string_view, N>& words) {
    return std::string(words[rng.below(N)]);
}

Sentence make_sentence(Rng& rng, const SyntheticConfig& config, Polarity label, std::string id) {
    const std::size_t length = config.min_len + rng.below(config.max_len - config.min_len + 1);
    const auto aspect = static_cast<int>(rng.below(length));
    const auto len = static_cast<int>(length);

    double total = 0.0;
    for (auto [offset, weight] : kOpinionOffsets) {
        if (aspect + offset >= 0 && aspect + offset < len) total += weight;
    }
    double draw = rng.uniform() * total;
    int opinion = -1;
    for (auto [offset, weight] : kOpinionOffsets) {
        if (aspect + offset < 0 || aspect + offset >= len) continue;
        opinion = aspect + offset;
        draw -= weight;
        if (draw < 0.0) break;
    }

    Sentence s;
    s.id = std::move(id);
    s.polarity = label;
    s.tokens.resize(length);
    for (auto& t : s.tokens) t = pick(rng, kFillers);
    s.tokens[static_cast<std::size_t>(aspect)] = pick(rng, kAspects);
    s.tokens[static_cast<std::size_t>(opinion)] = pick(rng, kOpinions[class_index(label)]);
    s.aspect_from = static_cast<std::size_t>(aspect);
    s.aspect_to = s.aspect_from + 1;

    std::vector<std::size_t> far;
    for (int p = 0; p < len; ++p) {
        if (std::abs(p - aspect) > kOpinionReach) far.push_back(static_cast<std::size_t>(p));
    }
    if (!far.empty() && rng.uniform() < config.distractor_rate) {
        const auto other = (class_index(label) + 1 + rng.below(2)) % 3;
        s.tokens[far[rng.below(far.size())]] = pick(rng, kOpinions[other]);
    }
    return s;
}

Corpus make_split(Rng& rng, const SyntheticConfig& config, std::size_t size, Split split,
                  const char* prefix) {
    std::vector<Polarity> labels(size);
    for (std::size_t i = 0; i < size; ++i) labels[i] = static_cast<Polarity>(i % 3);
    rng.shuffle(std::span<Polarity>(labels));
    Corpus corpus;
    corpus.split = split;
    char id[32];
    for (std::size_t i = 0; i < size; ++i) {
        std::snprintf(id, sizeof(id), "%s-%05zu", prefix, i);
        corpus.sentences.push_back(make_sentence(rng, config, labels[i], id));
    }
    return corpus;
}

}  // namespace

void SyntheticConfig::validate() const {
    if (train_size < 30) fail(ErrorKind::Validation, "synthetic train size must be at least 30");
    if (test_size == 0) fail(ErrorKind::Validation, "synthetic test size must be positive");
    if (min_len < 5 || max_len < min_len) {
        fail(ErrorKind::Validation, "synthetic lengths need 5 <= min_len <= max_len");
    }
    if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) {
        fail(ErrorKind::Validation, "distractor rate must lie in [0, 1]");
    }
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    Rng train_rng(derive_seed(config.seed, 1));
    Rng test_rng(derive_seed(config.seed, 2));
    return SyntheticCorpus{make_split(train_rng, config, config.train_size, Split::Train, "syn-train"),
                           make_split(test_rng, config, config.test_size, Split::Test, "syn-test")};
}

std::vector<std::string> synthetic_vocabulary() {
    std::vector<std::string> out;
    for (auto w : kFillers) out.emplace_back(w);
    for (auto w : kAspects) out.emplace_back(w);
    for (const auto& group : kOpinions)
        for (auto w : group) out.emplace_back(w);
    return out;
}

std::optional<Polarity> synthetic_oracle(const Sentence& sentence) {
    const auto aspect = static_cast<int>(sentence.aspect_from);
    for (int distance = 1; distance <= kOpinionReach; ++distance) {
        for (int p : {aspect - distance, aspect + distance}) {
            if (p < 0 || p >= static_cast<int>(sentence.length())) continue;
            if (auto pol = opinion_polarity(sentence.tokens[static_cast<std::size_t>(p)])) return pol;
        }
    }
    return std::nullopt;
}

}  // namespace posce
