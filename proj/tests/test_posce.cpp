#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "posce/error.hpp"
#include "posce/posce_table.hpp"
#include "posce/rng.hpp"

using namespace posce;

namespace {

std::shared_ptr<const EmbeddingTable> toy_embeddings() {
    std::vector<std::string> vocab;
    for (int i = 0; i < 10; ++i) vocab.push_back("w" + std::to_string(i));
    return std::make_shared<const EmbeddingTable>(random_embeddings(vocab, 6, 99));
}

Classifier toy_model(std::uint64_t seed, std::size_t max_len = 8) {
    return Classifier(toy_embeddings(), ClassifierParams::random(6, 5, seed), max_len);
}

Classifier constant_model(std::size_t max_len = 8) {
    return Classifier(toy_embeddings(), ClassifierParams::zeros(6, 5), max_len);
}

EncodedSentence sentence(std::string id, std::vector<std::size_t> ids, std::size_t from, std::size_t to,
                         std::size_t label) {
    return EncodedSentence{std::move(id), std::move(ids), from, to, label};
}

std::vector<EncodedSentence> random_corpus(std::size_t count, std::size_t max_len, Rng& rng) {
    std::vector<EncodedSentence> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t len = 1 + rng.below(max_len);
        std::vector<std::size_t> ids(len);
        for (auto& x : ids) x = 1 + rng.below(10);
        const std::size_t from = rng.below(len);
        const std::size_t to = from + 1 + rng.below(std::min<std::size_t>(2, len - from));
        out.push_back(sentence("s" + std::to_string(i), ids, from, to, rng.below(3)));
    }
    return out;
}

}  // namespace

TEST_SUITE("posce") {

TEST_CASE("three-token game phrases") {
    const auto s = sentence("abc", {1, 2, 3}, 1, 2, 0);
    CHECK(context_positions(s) == std::vector<std::size_t>{0, 2});
    CHECK(coalition_phrase(s, Coalition::from_mask(2, 0)) == std::vector<std::size_t>{1});
    CHECK(coalition_phrase(s, Coalition::from_mask(2, 1)) == std::vector<std::size_t>{0, 1});
    CHECK(coalition_phrase(s, Coalition::from_mask(2, 2)) == std::vector<std::size_t>{1, 2});
    CHECK(coalition_phrase(s, Coalition::from_mask(2, 3)) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("game payoffs are model probabilities of the shortened phrase") {
    const auto model = toy_model(1);
    const auto s = sentence("x", {4, 5, 6, 7}, 2, 3, 1);
    const auto game = game_from_sentence(model, AspectGameSpec::for_label(s));
    CHECK(game.player_count() == 3);
    const std::vector<std::size_t> phrase{4, 6};
    const Vector expected = model.predict(phrase, Vector::Zero(2), 1);
    CHECK(game.payoff(Coalition::from_mask(3, 0b001)) == expected[1]);

    const auto lone = sentence("y", {3}, 0, 1, 2);
    const auto g0 = game_from_sentence(model, AspectGameSpec::for_label(lone));
    CHECK(g0.player_count() == 0);
    const std::vector<std::size_t> only{3};
    CHECK(g0.payoff(Coalition(0)) == model.predict(only, Vector::Zero(1), 0)[2]);

    const auto flat_model = constant_model();
    const auto flat = game_from_sentence(flat_model, AspectGameSpec::for_label(s));
    for (std::uint64_t m = 0; m < 8; ++m) CHECK(flat.payoff(m) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("sentence profiles") {
    const auto model = toy_model(2);
    const EstimatorConfig exact{EstimatorMode::Exact};

    const auto s = sentence("x", {4, 5, 6, 7, 8}, 1, 3, 0);
    const auto a = sentence_profile(model, AspectGameSpec::for_label(s), exact);
    REQUIRE(a.raw.size() == 5);
    CHECK(a.raw[1] == 0.0);
    CHECK(a.raw[2] == 0.0);
    const auto game = game_from_sentence(model, AspectGameSpec::for_label(s));
    CHECK(std::abs(a.raw.sum() - (game.payoff(std::uint64_t{7}) - game.payoff(std::uint64_t{0}))) <= 1e-9);

    const auto two = sentence("t", {2, 9}, 0, 1, 2);
    const auto g2 = game_from_sentence(model, AspectGameSpec::for_label(two));
    const auto p2 = sentence_profile(model, AspectGameSpec::for_label(two), exact);
    CHECK(p2.raw[1] == doctest::Approx(g2.payoff(std::uint64_t{1}) - g2.payoff(std::uint64_t{0})));
    CHECK(p2.raw[0] == 0.0);

    const auto flat = sentence_profile(constant_model(), AspectGameSpec::for_label(s), exact);
    CHECK(flat.raw.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("estimator selection and seeds") {
    const auto model = toy_model(4, 16);
    std::vector<std::size_t> ids(15, 3);
    const auto s = sentence("long", ids, 7, 8, 0);
    EstimatorConfig cfg;
    cfg.exact_max_players = 10;
    cfg.samples = 40;
    cfg.seed = 5;
    const auto sampled = sentence_profile(model, AspectGameSpec::for_label(s), cfg);
    CHECK(sampled.shapley.method == ShapleyMethod::Permutation);
    CHECK(sampled.shapley.sample_count == 40);
    CHECK(sampled.shapley.seed == sentence_seed(cfg, "long"));
    CHECK(sentence_seed(cfg, "long") != sentence_seed(cfg, "long2"));
    cfg.exact_max_players = 14;
    CHECK(sentence_profile(model, AspectGameSpec::for_label(s), cfg).shapley.method == ShapleyMethod::Exact);
    cfg.samples = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(parse_estimator_mode("permutation") == EstimatorMode::Permutation);
    CHECK_THROWS_AS(parse_estimator_mode("bogus"), Error);
}

TEST_CASE("single-sentence table rows match an independent recomputation") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = toy_model(10 + static_cast<std::uint64_t>(trial));
        auto corpus = random_corpus(1, 8, rng);
        const auto built = build_table(model, corpus, 8, EstimatorConfig{EstimatorMode::Exact});
        const auto t = static_cast<Eigen::Index>(corpus[0].aspect_from);
        const Vector expected = oracle::single_sentence_row(model, corpus[0], 8);
        CHECK((built.table.profiles.row(t).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(built.table.counts[static_cast<std::size_t>(t)] == 1);
    }
}

TEST_CASE("table invariants") {
    Rng rng(7);
    const auto model = toy_model(7);
    const auto corpus = random_corpus(40, 8, rng);
    const auto built = build_table(model, corpus, 8, {});
    const auto& table = built.table;
    CHECK_NOTHROW(table.validate());
    CHECK(table.total_count() == 40);
    for (std::size_t t = 0; t < 8; ++t) {
        const Vector row = table.profiles.row(static_cast<Eigen::Index>(t)).transpose();
        if (table.counts[t] == 0) {
            CHECK((row.array() - 1.0 / 8.0).abs().maxCoeff() == 0.0);
        } else {
            CHECK(row.minCoeff() >= 0.0);
            CHECK(std::abs(row.sum() - 1.0) <= 1e-9);
        }
    }
    CHECK(built.stats.sentences == 40);
    CHECK(built.stats.exact_sentences == 40);

    const auto flat = build_table(constant_model(), corpus, 8, {});
    CHECK((flat.table.profiles.array() - 1.0 / 8.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("duplicate sentences do not change a row") {
    const auto model = toy_model(8);
    const auto s = sentence("a", {1, 2, 3, 4}, 1, 2, 2);
    auto s2 = s;
    s2.id = "b";
    const std::vector<EncodedSentence> one{s}, two{s, s2};
    const auto a = build_table(model, one, 6, {});
    const auto b = build_table(model, two, 6, {});
    CHECK((a.table.profiles - b.table.profiles).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(b.table.counts[1] == 2);
}

TEST_CASE("table build is order-invariant, thread-invariant and matches the serial reference") {
    Rng rng(9);
    const auto model = toy_model(9);
    auto corpus = random_corpus(30, 8, rng);
    EstimatorConfig cfg;
    cfg.exact_max_players = 4;
    cfg.samples = 64;
    cfg.seed = 3;
    const auto base = build_table(model, corpus, 8, cfg, 1);
    const auto threaded = build_table(model, corpus, 8, cfg, 4);
    const auto serial = reference::build_table(model, corpus, 8, cfg);
    CHECK(bitwise_equal(base.table, threaded.table));
    CHECK((base.table.profiles - serial.table.profiles).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(base.stats.sampled_sentences > 0);
    CHECK(base.stats.payoff_evaluations == serial.stats.payoff_evaluations);

    std::reverse(corpus.begin(), corpus.end());
    const auto reversed = build_table(model, corpus, 8, cfg);
    CHECK((base.table.profiles - reversed.table.profiles).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("long aspect positions clamp to the last row") {
    const auto model = toy_model(11, 6);
    const auto s = sentence("far", {1, 2, 3, 4, 5, 6}, 5, 6, 0);
    const std::vector<EncodedSentence> corpus{s};
    const auto built = build_table(model, corpus, 4, {});
    CHECK(built.table.counts[3] == 1);
}

TEST_CASE("lookup_profile") {
    const auto unbuilt = PosceTable::unbuilt(6);
    const Vector u = lookup_profile(unbuilt, 2, 4);
    CHECK((u.array() - 0.25).abs().maxCoeff() == 0.0);
    CHECK_FALSE(unbuilt.built());

    Rng rng(12);
    const auto model = toy_model(12, 6);
    const auto corpus = random_corpus(30, 6, rng);
    const auto table = build_table(model, corpus, 6, {}).table;
    for (std::size_t t = 0; t < 6; ++t) {
        if (table.counts[t] == 0) continue;
        const Vector full = lookup_profile(table, t, 6);
        CHECK((full - table.profiles.row(static_cast<Eigen::Index>(t)).transpose()).cwiseAbs().maxCoeff() <= 1e-15);
        const Vector part = lookup_profile(table, t, 3);
        CHECK(std::abs(part.sum() - 1.0) <= 1e-9);
        CHECK(part[1] / part[0] == doctest::Approx(table.profiles(static_cast<Eigen::Index>(t), 1) /
                                                   table.profiles(static_cast<Eigen::Index>(t), 0)));
    }
    const Vector longer = lookup_profile(table, 20, 9);
    CHECK(longer.size() == 9);
    CHECK(longer.tail(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(lookup_profile(table, 0, 0), Error);
}

TEST_CASE("relative profiles") {
    CHECK(relative_profile(uniform_profile(5)).cwiseAbs().maxCoeff() <= 1e-15);
    const Vector p = (Vector(2) << 0.75, 0.25).finished();
    CHECK(relative_profile(p)[0] == 0.5);
    CHECK(relative_profile(p)[1] == -0.5);
}

TEST_CASE("encode_sentence crops around the aspect") {
    const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
    const auto emb = random_embeddings(vocab, 4, 1);
    Sentence s{"x", {"a", "b", "c", "d", "e", "f"}, 1, 2, Polarity::Negative};
    auto e = encode_sentence(emb, s, 4);
    CHECK(e.length() == 4);
    CHECK(e.aspect_from == 1);
    CHECK(e.label == 2);
    s.aspect_from = 5;
    s.aspect_to = 6;
    e = encode_sentence(emb, s, 4);
    CHECK(e.token_ids == std::vector<std::size_t>{emb.index_of("c"), emb.index_of("d"), emb.index_of("e"),
                                                  emb.index_of("f")});
    CHECK(e.aspect_from == 3);
    CHECK(e.aspect_to == 4);
    s.aspect_from = 2;
    s.aspect_to = 6;
    e = encode_sentence(emb, s, 4);
    CHECK(e.aspect_to == 4);
}

}  // TEST_SUITE
