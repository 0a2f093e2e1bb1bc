#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace posce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kClassCount = 3;

// ---------------------------------------------------------------------------
// Embeddings

/// Frozen token vectors. Row 0 is always the UNK row; lookups of unknown
/// tokens fall back to it.
class EmbeddingTable {
public:
    static constexpr std::string_view kUnkToken = "<unk>";

    explicit EmbeddingTable(std::size_t dim);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return tokens_.size(); }

    /// Adds a token row; returns false (and keeps the old row) on duplicates.
    /// Adding kUnkToken overwrites the UNK row.
    bool add(std::string token, const Vector& row);

    bool contains(std::string_view token) const;
    std::size_t index_of(std::string_view token) const;
    std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

    const std::string& token(std::size_t row) const { return tokens_.at(row); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    Eigen::Map<const RowMatrix> matrix() const;
    Eigen::Map<const Vector> row(std::size_t index) const;

    /// Keeps UNK plus the listed tokens that are present, in list order.
    EmbeddingTable restricted_to(std::span<const std::string> vocabulary) const;

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
    std::size_t dim_;
    std::vector<double> data_;  // row-major, size() x dim()
};

/// Reads GloVe-style text: "token v1 ... vk" per line, whitespace separated.
/// The first line fixes k. Duplicate tokens keep their first vector.
EmbeddingTable parse_word_vectors(std::istream& in);
EmbeddingTable load_word_vectors(const std::filesystem::path& path);
void write_word_vectors(std::ostream& out, const EmbeddingTable& table);

/// Gaussian vectors with per-coordinate standard deviation `scale`.
EmbeddingTable random_embeddings(std::span<const std::string> vocabulary, std::size_t dim,
                                 std::uint64_t seed, double scale = 1.0);

// ---------------------------------------------------------------------------
// Classifier parameters

struct ClassifierParams {
    Matrix hidden_weight;    // k x h
    Vector hidden_bias;      // h
    Matrix output_weight;    // h x 3
    Vector output_bias;      // 3
    Vector posce_direction;  // k, lifts a scalar PosCE entry into the input space

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(hidden_weight.rows()); }
    std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(hidden_weight.cols()); }

    static ClassifierParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    /// Glorot-uniform weights, zero biases, unit-scale Gaussian posce_direction.
    static ClassifierParams random(std::size_t input_dim, std::size_t hidden_dim,
                                   std::uint64_t seed);

    /// Throws on inconsistent shapes or non-finite entries.
    void validate() const;
};

/// Applies `f` to corresponding tensors of one or more parameter sets.
template <typename F, typename... P>
void for_each_tensor(F&& f, P&&... params) {
    f(params.hidden_weight...);
    f(params.hidden_bias...);
    f(params.output_weight...);
    f(params.output_bias...);
    f(params.posce_direction...);
}

bool bitwise_equal(const ClassifierParams& a, const ClassifierParams& b);

// ---------------------------------------------------------------------------
// Input representation

struct InputRepresentation {
    Matrix features;      // L x k: token + positional + expanded PosCE
    Vector posce_profile; // L, kept for the posce_direction gradient
    std::size_t aspect_position = 0;

    std::size_t length() const noexcept { return static_cast<std::size_t>(features.rows()); }
};

/// Sinusoidal encoding: (p, 2j) = sin(p / 10000^(2j/k)), (p, 2j+1) = cos(...).
Matrix positional_encoding(std::size_t length, std::size_t dim);

/// Rank-1 lift: row i = profile[i] * direction.
Matrix expand_posce(const Vector& profile, const Vector& direction);

InputRepresentation compose_input(const Matrix& token_rows, const Vector& posce_profile,
                                  const ClassifierParams& params, std::size_t aspect_position);

/// Class probabilities: softmax(mean_rows(tanh(F M + b)) W_out + b_out).
Vector forward(const ClassifierParams& params, const InputRepresentation& input);

Vector softmax(const Vector& logits);

inline constexpr double kProbabilityFloor = 1e-12;

struct LossResult {
    double loss = 0.0;
    ClassifierParams gradients;
    /// True when the label probability was clamped at kProbabilityFloor.
    bool clamped = false;
};

/// Cross-entropy plus l2 * squared norm of hidden_weight, output_weight and
/// posce_direction. Biases are not penalised.
LossResult loss_and_gradients(const ClassifierParams& params, const InputRepresentation& input,
                              std::size_t label, double l2);

// ---------------------------------------------------------------------------
// Optimiser

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    ClassifierParams first_moment;
    ClassifierParams second_moment;
    std::uint64_t step = 0;

    static AdamState zeros_like(const ClassifierParams& params);
};

void adam_step(ClassifierParams& params, const ClassifierParams& gradients, AdamState& state,
               const AdamConfig& config);

// ---------------------------------------------------------------------------
// Read-only snapshot used for prediction, games and evaluation.

class Classifier {
public:
    Classifier(std::shared_ptr<const EmbeddingTable> embeddings, ClassifierParams params,
               std::size_t max_len);

    const EmbeddingTable& embeddings() const noexcept { return *embeddings_; }
    const std::shared_ptr<const EmbeddingTable>& embeddings_ptr() const noexcept { return embeddings_; }
    const ClassifierParams& params() const noexcept { return params_; }
    std::size_t max_len() const noexcept { return max_len_; }

    /// Builds F for a token-id sequence (length <= max_len).
    InputRepresentation compose(std::span<const std::size_t> token_ids, const Vector& posce_profile,
                                std::size_t aspect_position) const;

    Vector predict(std::span<const std::size_t> token_ids, const Vector& posce_profile,
                   std::size_t aspect_position) const;

private:
    std::shared_ptr<const EmbeddingTable> embeddings_;
    ClassifierParams params_;
    std::size_t max_len_;
    Matrix positions_;
};

}  // namespace posce
