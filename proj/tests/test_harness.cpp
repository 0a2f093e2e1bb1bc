#include <doctest.h>

#include <sstream>

#include "posce/error.hpp"
#include "posce/harness.hpp"
#include "posce/rng.hpp"

using namespace posce;

namespace {

struct Fixture {
    SyntheticCorpus data;
    std::shared_ptr<const EmbeddingTable> embeddings;
    TrainConfig config;

    explicit Fixture(std::uint64_t seed = 3) {
        SyntheticConfig sc;
        sc.train_size = 45;
        sc.test_size = 24;
        sc.seed = seed;
        data = generate_synthetic(sc);
        embeddings = std::make_shared<const EmbeddingTable>(random_embeddings(synthetic_vocabulary(), 8, seed));
        config.lr = 1e-2;
        config.hidden = 6;
        config.max_len = 10;
        config.max_epochs = 4;
        config.seed = seed;
    }

    TrainResult run() const { return train(embeddings, data.train, &data.test, config); }
};

std::string log_text(const TrainConfig& config, const TrainResult& r) {
    std::ostringstream out;
    write_run_log(out, to_json(config), r.log);
    return out.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("schedule parsing and semantics") {
    CHECK(Schedule::parse("never") == Schedule::never());
    CHECK(Schedule::parse("at:5") == Schedule::at(5));
    CHECK(Schedule::parse("upto:10") == Schedule::up_to(10));
    for (const char* bad : {"at:0", "at:", "upto:-1", "at:5x", "sometimes", "AT:5"}) {
        CHECK_THROWS_AS(Schedule::parse(bad), Error);
    }
    CHECK(Schedule::at(5).build_epochs(20) == std::vector<int>{5});
    CHECK(Schedule::up_to(2).build_epochs(20) == std::vector<int>{1, 2});
    CHECK(Schedule::never().build_epochs(20).empty());
    CHECK(Schedule::at(5).label() == "=5");
    CHECK(Schedule::up_to(5).label() == "<=5");
    CHECK(Schedule::up_to(5).to_string() == "upto:5");
}

TEST_CASE("config validation and JSON round-trip") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.schedule = Schedule::at(21);
    CHECK_THROWS_AS(c.validate(), Error);
    c.schedule = Schedule::at(3);
    c.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.lr = 0.05;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.batch_size = 4;
    c.estimator.mode = EstimatorMode::Permutation;
    c.estimator.samples = 77;
    const auto back = train_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"lr", 1}}), Error);
}

TEST_CASE("metrics") {
    const std::vector<std::size_t> gold{0, 0, 1, 1, 2, 2};
    CHECK(score_predictions(gold, gold).accuracy == 1.0);
    CHECK(score_predictions(gold, gold).macro_f1 == 1.0);

    std::vector<std::size_t> g, p;
    for (std::size_t c = 0; c < 3; ++c) {
        for (int i = 0; i < 4; ++i) {
            g.push_back(c);
            p.push_back(0);
        }
    }
    const auto r = score_predictions(g, p);
    CHECK(r.accuracy == 1.0 / 3.0);
    CHECK(r.per_class[0].precision == 1.0 / 3.0);
    CHECK(r.per_class[0].recall == 1.0);
    CHECK(r.per_class[0].f1 == 0.5);
    CHECK(r.per_class[1].f1 == 0.0);
    CHECK(r.macro_f1 == 1.0 / 6.0);
    CHECK(r.total() == 12);

    // Class 2 is never predicted and never true.
    const std::vector<std::size_t> g2{0, 1, 0}, p2{0, 1, 1};
    const auto r2 = score_predictions(g2, p2);
    CHECK(r2.per_class[2].f1 == 0.0);
    CHECK(r2.per_class[2].precision == 0.0);
    std::size_t trace = 0;
    for (std::size_t c = 0; c < 3; ++c) trace += r2.confusion[c][c];
    CHECK(r2.accuracy == static_cast<double>(trace) / 3.0);

    const std::vector<double> tie{0.4, 0.4, 0.2};
    CHECK(argmax_class(tie) == 0);
    const std::vector<double> tie12{0.2, 0.4, 0.4};
    CHECK(argmax_class(tie12) == 1);
    CHECK_THROWS_AS(score_predictions(g2, std::vector<std::size_t>{0}), Error);
}

TEST_CASE("random predictions keep metric identities") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> g(1 + rng.below(40)), p(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = rng.below(3);
            p[i] = rng.below(3);
        }
        const auto r = score_predictions(g, p);
        std::size_t trace = 0;
        for (std::size_t c = 0; c < 3; ++c) trace += r.confusion[c][c];
        CHECK(r.total() == g.size());
        CHECK(r.accuracy == static_cast<double>(trace) / static_cast<double>(g.size()));
        CHECK(r.macro_f1 >= 0.0);
        CHECK(r.macro_f1 <= 1.0);
        for (const auto& s : r.per_class) {
            if (s.precision + s.recall == 0.0) CHECK(s.f1 == 0.0);
        }
    }
}

TEST_CASE("never schedule leaves the table unbuilt and equals a PosCE-disabled run") {
    Fixture f;
    f.config.schedule = Schedule::never();
    const auto a = f.run();
    CHECK_FALSE(a.table.built());
    for (const auto& r : a.log) CHECK_FALSE(r.build.has_value());
    f.config.posce_enabled = false;
    const auto b = f.run();
    CHECK(bitwise_equal(a.params, b.params));
    CHECK(a.log.back().test->accuracy == b.log.back().test->accuracy);
}

TEST_CASE("build events follow the schedule") {
    Fixture f;
    f.config.schedule = Schedule::up_to(2);
    const auto r = f.run();
    REQUIRE(r.log.size() == 4);
    CHECK(r.log[0].build.has_value());
    CHECK(r.log[1].build.has_value());
    CHECK_FALSE(r.log[2].build.has_value());
    CHECK(r.table.built_at_epoch == 2);
    CHECK(r.log[1].build->stats.sentences == 45);

    f.config.schedule = Schedule::at(3);
    const auto at3 = f.run();
    int builds = 0;
    for (const auto& e : at3.log) builds += e.build ? 1 : 0;
    CHECK(builds == 1);
    CHECK(at3.log[2].build->epoch == 3);
}

TEST_CASE("tables apply from the epoch after the build") {
    Fixture f;
    f.config.schedule = Schedule::never();
    const auto never = f.run();
    f.config.schedule = Schedule::at(2);
    const auto at2 = f.run();
    // Training is identical through epoch 2; the new table affects epoch 3 onward.
    CHECK(never.log[0].mean_loss == at2.log[0].mean_loss);
    CHECK(never.log[1].mean_loss == at2.log[1].mean_loss);
    CHECK(never.log[2].mean_loss != at2.log[2].mean_loss);
}

TEST_CASE("training is deterministic and thread-count independent") {
    Fixture f;
    f.config.schedule = Schedule::up_to(2);
    f.config.estimator.mode = EstimatorMode::Permutation;
    f.config.estimator.samples = 30;
    const auto a = f.run();
    const auto b = f.run();
    CHECK(bitwise_equal(a.params, b.params));
    CHECK(bitwise_equal(a.table, b.table));
    CHECK(log_text(f.config, a) == log_text(f.config, b));

    f.config.threads = 3;
    const auto c = f.run();
    CHECK(bitwise_equal(a.params, c.params));
    CHECK(bitwise_equal(a.table, c.table));

    f.config.threads = 1;
    f.config.seed = 4;
    CHECK_FALSE(bitwise_equal(a.params, f.run().params));
}

TEST_CASE("run log format") {
    Fixture f;
    f.config.schedule = Schedule::at(1);
    const auto r = f.run();
    std::istringstream in(log_text(f.config, r));
    std::string line;
    std::vector<nlohmann::json> records;
    while (std::getline(in, line)) records.push_back(nlohmann::json::parse(line));
    REQUIRE(records.size() == 5);
    CHECK(records[0]["record"] == "config");
    CHECK(records[0]["config"]["schedule"] == "at:1");
    CHECK(records[1]["build"]["epoch"] == 1);
    CHECK(records[2]["build"].is_null());
    CHECK(records[4]["test"]["accuracy"].get<double>() == r.log.back().test->accuracy);
    std::ostringstream timings;
    write_timings(timings, r.log);
    CHECK(timings.str().rfind("epoch\tbuild_wall_seconds\n1\t", 0) == 0);
}

TEST_CASE("evaluation through the table") {
    Fixture f;
    f.config.schedule = Schedule::at(2);
    const auto r = f.run();
    const Classifier model(f.embeddings, r.params, f.config.max_len);
    const auto report = evaluate(model, r.table, f.data.test);
    CHECK(report.accuracy == r.log.back().test->accuracy);
    CHECK(report.total() == 24);
    CHECK(evaluate(model, r.table, f.data.test, 4).accuracy == report.accuracy);
    CHECK_THROWS_AS(evaluate(model, r.table, Corpus{}), Error);
}

TEST_CASE("schedule experiment") {
    Fixture f;
    const std::vector<Schedule> only_never{Schedule::never()};
    const auto self = schedule_experiment(f.embeddings, f.data.train, f.data.test, f.config, only_never);
    REQUIRE(self.size() == 1);
    CHECK(self[0].delta_accuracy_pp == 0.0);
    CHECK(self[0].delta_macro_f1 == 0.0);

    const std::vector<Schedule> schedules{Schedule::at(1), Schedule::up_to(2)};
    const auto rows = schedule_experiment(f.embeddings, f.data.train, f.data.test, f.config, schedules);
    REQUIRE(rows.size() == 2);
    std::ostringstream tsv, grid;
    write_comparison_tsv(tsv, rows);
    write_comparison_grid(grid, rows);
    std::istringstream lines(tsv.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "schedule\taccuracy\tmacro_f1\tdelta_acc_pp\tdelta_f1");
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 2);
    CHECK(grid.str().rfind("Epoch\t=1\t<=2\nAcc\t", 0) == 0);
    CHECK_THROWS_AS(schedule_experiment(f.embeddings, f.data.train, f.data.test, f.config, {}), Error);
}

TEST_CASE("training input errors") {
    Fixture f;
    CHECK_THROWS_AS(train(f.embeddings, Corpus{}, nullptr, f.config), Error);
    CHECK_THROWS_AS(train(nullptr, f.data.train, nullptr, f.config), Error);
    f.config.schedule = Schedule::at(9);
    CHECK_THROWS_AS(f.run(), Error);
}

}  // TEST_SUITE
