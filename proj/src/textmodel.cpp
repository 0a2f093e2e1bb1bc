#include "posce/textmodel.hpp"

#include <cmath>
#include <cstring>

#include "posce/error.hpp"
#include "posce/rng.hpp"

namespace posce {

namespace {

struct Activations {
    Matrix hidden;  // L x h, post-tanh
    Vector pooled;  // h
    Vector probs;   // 3
};

Activations run_forward(const ClassifierParams& params, const InputRepresentation& input) {
    if (input.features.cols() != params.hidden_weight.rows()) {
        fail(ErrorKind::Validation, "input width does not match the hidden projection");
    }
    if (input.length() == 0) fail(ErrorKind::Validation, "cannot classify an empty input");
    if (!input.features.allFinite()) fail(ErrorKind::Numeric, "input features are not finite");

    Activations a;
    a.hidden = input.features * params.hidden_weight;
    a.hidden.rowwise() += params.hidden_bias.transpose();
    a.hidden = a.hidden.array().tanh().matrix();
    a.pooled = a.hidden.colwise().mean().transpose();
    const Vector logits = params.output_weight.transpose() * a.pooled + params.output_bias;
    if (!logits.allFinite()) fail(ErrorKind::Numeric, "logits are not finite");
    a.probs = softmax(logits);
    return a;
}

void check_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        fail(ErrorKind::Validation, std::string(name) + " has shape " + std::to_string(m.rows()) +
                                        "x" + std::to_string(m.cols()) + ", expected " +
                                        std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

ClassifierParams ClassifierParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    const auto k = static_cast<Eigen::Index>(input_dim);
    const auto h = static_cast<Eigen::Index>(hidden_dim);
    const auto c = static_cast<Eigen::Index>(kClassCount);
    return ClassifierParams{Matrix::Zero(k, h), Vector::Zero(h), Matrix::Zero(h, c), Vector::Zero(c),
                            Vector::Zero(k)};
}

ClassifierParams ClassifierParams::random(std::size_t input_dim, std::size_t hidden_dim,
                                          std::uint64_t seed) {
    auto p = zeros(input_dim, hidden_dim);
    Rng rng(seed);
    const auto glorot = [&](Matrix& m) {
        const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
    };
    glorot(p.hidden_weight);
    glorot(p.output_weight);
    for (auto& v : p.posce_direction) v = rng.normal();
    return p;
}

void ClassifierParams::validate() const {
    const auto k = hidden_weight.rows();
    const auto h = hidden_weight.cols();
    const auto c = static_cast<Eigen::Index>(kClassCount);
    if (k == 0 || h == 0) fail(ErrorKind::Validation, "classifier dimensions must be positive");
    check_shape(hidden_bias, h, 1, "hidden_bias");
    check_shape(output_weight, h, c, "output_weight");
    check_shape(output_bias, c, 1, "output_bias");
    check_shape(posce_direction, k, 1, "posce_direction");
    bool finite = true;
    for_each_tensor([&](const auto& t) { finite = finite && t.allFinite(); }, *this);
    if (!finite) fail(ErrorKind::Numeric, "classifier parameters contain non-finite values");
}

bool bitwise_equal(const ClassifierParams& a, const ClassifierParams& b) {
    bool same = true;
    for_each_tensor(
        [&](const auto& x, const auto& y) {
            same = same && x.rows() == y.rows() && x.cols() == y.cols() &&
                   std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
        },
        a, b);
    return same;
}

Matrix positional_encoding(std::size_t length, std::size_t dim) {
    if (length == 0) fail(ErrorKind::Validation, "positional encoding needs a positive length");
    if (dim < 2 || dim % 2 != 0) {
        fail(ErrorKind::Validation, "positional encoding needs an even dimension >= 2, got " +
                                        std::to_string(dim));
    }
    Matrix out(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim / 2; ++j) {
        const double rate =
            std::pow(10000.0, static_cast<double>(2 * j) / static_cast<double>(dim));
        for (std::size_t p = 0; p < length; ++p) {
            const double angle = static_cast<double>(p) / rate;
            out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(2 * j)) = std::sin(angle);
            out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(2 * j + 1)) = std::cos(angle);
        }
    }
    return out;
}

Matrix expand_posce(const Vector& profile, const Vector& direction) {
    return profile * direction.transpose();
}

InputRepresentation compose_input(const Matrix& token_rows, const Vector& posce_profile,
                                  const ClassifierParams& params, std::size_t aspect_position) {
    const auto length = token_rows.rows();
    const auto dim = token_rows.cols();
    if (length == 0) fail(ErrorKind::Validation, "cannot compose an empty input");
    if (posce_profile.size() != length) {
        fail(ErrorKind::Validation, "PosCE profile length " + std::to_string(posce_profile.size()) +
                                        " does not match " + std::to_string(length) + " tokens");
    }
    if (params.posce_direction.size() != dim) {
        fail(ErrorKind::Validation, "PosCE direction width does not match the token rows");
    }
    if (aspect_position >= static_cast<std::size_t>(length)) {
        fail(ErrorKind::Validation, "aspect position outside the input");
    }
    InputRepresentation out;
    out.features = token_rows + positional_encoding(static_cast<std::size_t>(length),
                                                    static_cast<std::size_t>(dim)) +
                   expand_posce(posce_profile, params.posce_direction);
    out.posce_profile = posce_profile;
    out.aspect_position = aspect_position;
    return out;
}

Vector softmax(const Vector& logits) {
    const Vector shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
    return shifted / shifted.sum();
}

Vector forward(const ClassifierParams& params, const InputRepresentation& input) {
    return run_forward(params, input).probs;
}

LossResult loss_and_gradients(const ClassifierParams& params, const InputRepresentation& input,
                              std::size_t label, double l2) {
    if (label >= kClassCount) fail(ErrorKind::Validation, "label must be 0, 1 or 2");
    if (l2 < 0.0) fail(ErrorKind::Validation, "l2 strength must be non-negative");
    const auto a = run_forward(params, input);
    const auto y = static_cast<Eigen::Index>(label);

    LossResult out;
    const double p_label = a.probs[y];
    out.clamped = p_label < kProbabilityFloor;
    const double penalty = params.hidden_weight.squaredNorm() + params.output_weight.squaredNorm() +
                           params.posce_direction.squaredNorm();
    out.loss = -std::log(std::max(p_label, kProbabilityFloor)) + l2 * penalty;

    // The clamp is flat below the floor, so the data term contributes nothing there.
    Vector d_logits = a.probs;
    d_logits[y] -= 1.0;
    if (out.clamped) d_logits.setZero();

    const double inv_len = 1.0 / static_cast<double>(input.length());
    auto& g = out.gradients;
    g.output_weight = a.pooled * d_logits.transpose() + 2.0 * l2 * params.output_weight;
    g.output_bias = d_logits;
    const Vector d_pooled = params.output_weight * d_logits;
    // dZ = (1/L) * broadcast(d_pooled) * (1 - H^2)
    Matrix d_pre = (1.0 - a.hidden.array().square()).matrix();
    d_pre.array().rowwise() *= (inv_len * d_pooled).transpose().array();
    g.hidden_weight = input.features.transpose() * d_pre + 2.0 * l2 * params.hidden_weight;
    g.hidden_bias = d_pre.colwise().sum().transpose();
    const Matrix d_features = d_pre * params.hidden_weight.transpose();
    g.posce_direction = d_features.transpose() * input.posce_profile + 2.0 * l2 * params.posce_direction;
    return out;
}

AdamState AdamState::zeros_like(const ClassifierParams& params) {
    AdamState s{ClassifierParams::zeros(params.input_dim(), params.hidden_dim()),
                ClassifierParams::zeros(params.input_dim(), params.hidden_dim()), 0};
    return s;
}

void adam_step(ClassifierParams& params, const ClassifierParams& gradients, AdamState& state,
               const AdamConfig& config) {
    ++state.step;
    const double step = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, step);
    const double correction2 = 1.0 - std::pow(config.beta2, step);
    for_each_tensor(
        [&](auto& p, const auto& g, auto& m, auto& v) {
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
            p.array() -= config.lr * (m.array() / correction1) /
                         ((v.array() / correction2).sqrt() + config.eps);
        },
        params, gradients, state.first_moment, state.second_moment);
}

Classifier::Classifier(std::shared_ptr<const EmbeddingTable> embeddings, ClassifierParams params,
                       std::size_t max_len)
    : embeddings_(std::move(embeddings)), params_(std::move(params)), max_len_(max_len) {
    if (!embeddings_) fail(ErrorKind::Validation, "classifier needs an embedding table");
    if (max_len_ == 0) fail(ErrorKind::Validation, "max_len must be positive");
    params_.validate();
    if (params_.input_dim() != embeddings_->dim()) {
        fail(ErrorKind::Validation, "embedding dimension " + std::to_string(embeddings_->dim()) +
                                        " does not match classifier input " +
                                        std::to_string(params_.input_dim()));
    }
    positions_ = positional_encoding(max_len_, embeddings_->dim());
}

InputRepresentation Classifier::compose(std::span<const std::size_t> token_ids,
                                        const Vector& posce_profile,
                                        std::size_t aspect_position) const {
    const auto length = static_cast<Eigen::Index>(token_ids.size());
    if (token_ids.empty()) fail(ErrorKind::Validation, "cannot classify an empty phrase");
    if (token_ids.size() > max_len_) {
        fail(ErrorKind::Validation, "phrase of " + std::to_string(token_ids.size()) +
                                        " tokens exceeds max_len " + std::to_string(max_len_));
    }
    if (posce_profile.size() != length) fail(ErrorKind::Validation, "PosCE profile length mismatch");
    if (aspect_position >= token_ids.size()) fail(ErrorKind::Validation, "aspect position outside the phrase");

    InputRepresentation out;
    out.features = positions_.topRows(length);
    const auto table = embeddings_->matrix();
    for (Eigen::Index i = 0; i < length; ++i) {
        out.features.row(i) += table.row(static_cast<Eigen::Index>(token_ids[static_cast<std::size_t>(i)]));
    }
    out.features.noalias() += posce_profile * params_.posce_direction.transpose();
    out.posce_profile = posce_profile;
    out.aspect_position = aspect_position;
    return out;
}

Vector Classifier::predict(std::span<const std::size_t> token_ids, const Vector& posce_profile,
                           std::size_t aspect_position) const {
    return forward(params_, compose(token_ids, posce_profile, aspect_position));
}

}  // namespace posce
