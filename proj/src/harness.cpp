#include "posce/harness.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "posce/error.hpp"
#include "posce/parallel.hpp"
#include "posce/rng.hpp"

namespace posce {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 1000;

int parse_epoch(std::string_view text, std::string_view whole) {
    int value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || value < 1) {
        fail(ErrorKind::Usage, "bad schedule '" + std::string(whole) +
                                   "' (expected never, at:E or upto:E with E >= 1)");
    }
    return value;
}

std::string format_signed(double value, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, value);
    return buf;
}

}  // namespace

Schedule Schedule::parse(std::string_view text) {
    if (text == "never") return never();
    if (text.starts_with("at:")) return at(parse_epoch(text.substr(3), text));
    if (text.starts_with("upto:")) return up_to(parse_epoch(text.substr(5), text));
    fail(ErrorKind::Usage, "bad schedule '" + std::string(text) +
                               "' (expected never, at:E or upto:E with E >= 1)");
}

std::string Schedule::to_string() const {
    switch (kind) {
        case Kind::Never: return "never";
        case Kind::At: return "at:" + std::to_string(epoch);
        case Kind::UpTo: return "upto:" + std::to_string(epoch);
    }
    return "never";
}

std::string Schedule::label() const {
    switch (kind) {
        case Kind::Never: return "never";
        case Kind::At: return "=" + std::to_string(epoch);
        case Kind::UpTo: return "<=" + std::to_string(epoch);
    }
    return "never";
}

bool Schedule::builds_after(int completed_epoch) const {
    switch (kind) {
        case Kind::Never: return false;
        case Kind::At: return completed_epoch == epoch;
        case Kind::UpTo: return completed_epoch >= 1 && completed_epoch <= epoch;
    }
    return false;
}

std::vector<int> Schedule::build_epochs(int max_epochs) const {
    std::vector<int> out;
    for (int e = 1; e <= max_epochs; ++e) {
        if (builds_after(e)) out.push_back(e);
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) fail(ErrorKind::Validation, "learning rate must be positive");
    if (!(l2 >= 0.0)) fail(ErrorKind::Validation, "l2 strength must be non-negative");
    if (batch_size == 0) fail(ErrorKind::Validation, "batch size must be positive");
    if (max_epochs == 0) fail(ErrorKind::Validation, "max_epochs must be positive");
    if (max_len == 0) fail(ErrorKind::Validation, "max_len must be positive");
    if (hidden == 0) fail(ErrorKind::Validation, "hidden dimension must be positive");
    if (threads < 1) fail(ErrorKind::Validation, "threads must be at least 1");
    if (schedule.kind != Schedule::Kind::Never &&
        (schedule.epoch < 1 || static_cast<std::size_t>(schedule.epoch) > max_epochs)) {
        fail(ErrorKind::Validation, "schedule epoch " + std::to_string(schedule.epoch) +
                                        " lies outside 1.." + std::to_string(max_epochs));
    }
    estimator.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
    return {
        {"lr", c.lr},
        {"l2", c.l2},
        {"batch_size", c.batch_size},
        {"max_epochs", c.max_epochs},
        {"seed", c.seed},
        {"schedule", c.schedule.to_string()},
        {"estimator",
         {{"mode", to_string(c.estimator.mode)},
          {"exact_max_players", c.estimator.exact_max_players},
          {"samples", c.estimator.samples},
          {"seed", c.estimator.seed}}},
        {"max_len", c.max_len},
        {"hidden", c.hidden},
        {"posce_enabled", c.posce_enabled},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.lr = j.at("lr").get<double>();
        c.l2 = j.at("l2").get<double>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.max_epochs = j.at("max_epochs").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.schedule = Schedule::parse(j.at("schedule").get<std::string>());
        const auto& e = j.at("estimator");
        c.estimator.mode = parse_estimator_mode(e.at("mode").get<std::string>());
        c.estimator.exact_max_players = e.at("exact_max_players").get<std::size_t>();
        c.estimator.samples = e.at("samples").get<std::size_t>();
        c.estimator.seed = e.at("seed").get<std::uint64_t>();
        c.max_len = j.at("max_len").get<std::size_t>();
        c.hidden = j.at("hidden").get<std::size_t>();
        c.posce_enabled = j.at("posce_enabled").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad training config: ") + e.what());
    }
    return c;
}

Vector predict_with_table(const Classifier& model, const PosceTable& table,
                          const EncodedSentence& sentence) {
    const auto profile = relative_profile(lookup_profile(table, sentence.aspect_position(), sentence.length()));
    return model.predict(sentence.token_ids, profile, sentence.aspect_position());
}

EvalReport evaluate(const Classifier& model, const PosceTable& table,
                    std::span<const EncodedSentence> corpus, int threads) {
    if (corpus.empty()) fail(ErrorKind::Validation, "cannot evaluate on an empty corpus");
    std::vector<std::size_t> gold(corpus.size());
    std::vector<std::size_t> predicted(corpus.size());
    ExceptionTrap trap;
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(corpus.size()); ++i) {
        trap.run([&] {
            const auto idx = static_cast<std::size_t>(i);
            const Vector probs = predict_with_table(model, table, corpus[idx]);
            gold[idx] = corpus[idx].label;
            predicted[idx] = argmax_class(std::span<const double>(probs.data(), kClassCount));
        });
    }
    trap.rethrow();
    return score_predictions(gold, predicted);
}

EvalReport evaluate(const Classifier& model, const PosceTable& table, const Corpus& corpus,
                    int threads) {
    const auto encoded = encode_corpus(model.embeddings(), corpus, model.max_len());
    return evaluate(model, table, encoded, threads);
}

TrainResult train(std::shared_ptr<const EmbeddingTable> embeddings, const Corpus& train_corpus,
                  const Corpus* test_corpus, const TrainConfig& config) {
    config.validate();
    if (!embeddings) fail(ErrorKind::Validation, "training needs an embedding table");
    if (train_corpus.empty()) fail(ErrorKind::Validation, "training corpus is empty");
    train_corpus.validate();

    const auto train_set = encode_corpus(*embeddings, train_corpus, config.max_len);
    std::vector<EncodedSentence> test_set;
    if (test_corpus != nullptr && !test_corpus->empty()) {
        test_set = encode_corpus(*embeddings, *test_corpus, config.max_len);
    }

    const std::size_t k = embeddings->dim();
    const Matrix positions = positional_encoding(config.max_len, k);
    const auto emb = embeddings->matrix();

    TrainResult result;
    result.params = ClassifierParams::random(k, config.hidden, derive_seed(config.seed, kInitStream));
    result.table = PosceTable::unbuilt(config.max_len);
    AdamState adam = AdamState::zeros_like(result.params);
    const AdamConfig adam_config{config.lr};

    EstimatorConfig estimator = config.estimator;
    estimator.seed = derive_seed(config.seed, config.estimator.seed);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, kShuffleStream + epoch));
        rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            std::vector<LossResult> items(count);
            const ClassifierParams& params = result.params;
            const PosceTable& table = result.table;
            ExceptionTrap trap;
#pragma omp parallel for schedule(static) num_threads(config.threads) if (config.threads > 1)
            for (std::int64_t b = 0; b < static_cast<std::int64_t>(count); ++b) {
                trap.run([&] {
                    const auto& s = train_set[order[start + static_cast<std::size_t>(b)]];
                    const auto len = static_cast<Eigen::Index>(s.length());
                    Matrix token_rows(len, static_cast<Eigen::Index>(k));
                    for (Eigen::Index i = 0; i < len; ++i) {
                        token_rows.row(i) = emb.row(static_cast<Eigen::Index>(s.token_ids[static_cast<std::size_t>(i)]));
                    }
                    const Vector profile = relative_profile(
                        config.posce_enabled ? lookup_profile(table, s.aspect_position(), s.length())
                                             : uniform_profile(s.length()));
                    InputRepresentation input;
                    input.features = token_rows + positions.topRows(len) +
                                     expand_posce(profile, params.posce_direction);
                    input.posce_profile = profile;
                    input.aspect_position = s.aspect_position();
                    items[static_cast<std::size_t>(b)] =
                        loss_and_gradients(params, input, s.label, config.l2);
                });
            }
            trap.rethrow();

            ClassifierParams grad = ClassifierParams::zeros(k, config.hidden);
            for (const auto& item : items) {
                loss_sum += item.loss;
                for_each_tensor([](auto& acc, const auto& g) { acc += g; }, grad, item.gradients);
            }
            const double scale = 1.0 / static_cast<double>(count);
            for_each_tensor([scale](auto& g) { g *= scale; }, grad);
            adam_step(result.params, grad, adam, adam_config);
        }

        EpochRecord record;
        record.epoch = static_cast<int>(epoch);
        record.mean_loss = loss_sum / static_cast<double>(train_set.size());

        const Classifier snapshot(embeddings, result.params, config.max_len);
        if (config.posce_enabled && config.schedule.builds_after(record.epoch)) {
            const auto started = std::chrono::steady_clock::now();
            auto built = build_table(snapshot, train_set, config.max_len, estimator, config.threads);
            built.table.built_at_epoch = record.epoch;
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
            result.table = std::move(built.table);
            record.build = BuildEvent{record.epoch, elapsed.count(), built.stats};
        }
        if (!test_set.empty()) record.test = evaluate(snapshot, result.table, test_set, config.threads);
        result.log.push_back(std::move(record));
    }
    return result;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < 3; ++c) {
        per_class.push_back({{"class", std::string(to_string(static_cast<Polarity>(c)))},
                             {"precision", r.per_class[c].precision},
                             {"recall", r.per_class[c].recall},
                             {"f1", r.per_class[c].f1}});
    }
    return {{"accuracy", r.accuracy},
            {"macro_f1", r.macro_f1},
            {"per_class", per_class},
            {"confusion", r.confusion}};
}

void write_run_log(std::ostream& out, const nlohmann::json& config, const std::vector<EpochRecord>& log) {
    out << nlohmann::json{{"record", "config"}, {"format", "posce-run-log"}, {"version", 1},
                          {"config", config}}
               .dump()
        << '\n';
    for (const auto& r : log) {
        nlohmann::json line{{"record", "epoch"}, {"epoch", r.epoch}, {"loss", r.mean_loss}};
        line["test"] = r.test ? to_json(*r.test) : nlohmann::json(nullptr);
        if (r.build) {
            line["build"] = {{"epoch", r.build->epoch},
                             {"sentences", r.build->stats.sentences},
                             {"exact_sentences", r.build->stats.exact_sentences},
                             {"sampled_sentences", r.build->stats.sampled_sentences},
                             {"payoff_evaluations", r.build->stats.payoff_evaluations}};
        } else {
            line["build"] = nullptr;
        }
        out << line.dump() << '\n';
    }
}

void write_timings(std::ostream& out, const std::vector<EpochRecord>& log) {
    out << "epoch\tbuild_wall_seconds\n";
    for (const auto& r : log) {
        if (r.build) out << r.epoch << '\t' << r.build->wall_seconds << '\n';
    }
}

std::vector<ScheduleRow> schedule_experiment(std::shared_ptr<const EmbeddingTable> embeddings,
                                             const Corpus& train_corpus, const Corpus& test_corpus,
                                             const TrainConfig& base, std::span<const Schedule> schedules) {
    if (schedules.empty()) fail(ErrorKind::Validation, "schedule experiment needs at least one schedule");
    if (test_corpus.empty()) fail(ErrorKind::Validation, "schedule experiment needs a test corpus");
    const auto final_report = [&](const Schedule& schedule) {
        TrainConfig config = base;
        config.schedule = schedule;
        const auto run = train(embeddings, train_corpus, &test_corpus, config);
        return *run.log.back().test;
    };
    const EvalReport baseline = final_report(Schedule::never());
    std::vector<ScheduleRow> rows;
    for (const auto& schedule : schedules) {
        ScheduleRow row;
        row.schedule = schedule;
        row.report = schedule == Schedule::never() ? baseline : final_report(schedule);
        row.delta_accuracy_pp = 100.0 * (row.report.accuracy - baseline.accuracy);
        row.delta_macro_f1 = row.report.macro_f1 - baseline.macro_f1;
        rows.push_back(row);
    }
    return rows;
}

void write_comparison_tsv(std::ostream& out, std::span<const ScheduleRow> rows) {
    out << "schedule\taccuracy\tmacro_f1\tdelta_acc_pp\tdelta_f1\n";
    for (const auto& r : rows) {
        out << r.schedule.to_string() << '\t' << format_signed(r.report.accuracy, "%.4f") << '\t'
            << format_signed(r.report.macro_f1, "%.4f") << '\t'
            << format_signed(r.delta_accuracy_pp, "%+.2f") << '\t'
            << format_signed(r.delta_macro_f1, "%+.3f") << '\n';
    }
}

void write_comparison_grid(std::ostream& out, std::span<const ScheduleRow> rows) {
    out << "Epoch";
    for (const auto& r : rows) out << '\t' << r.schedule.label();
    out << "\nAcc";
    for (const auto& r : rows) out << '\t' << format_signed(r.delta_accuracy_pp, "%+.1f%%");
    out << "\nF1";
    for (const auto& r : rows) out << '\t' << format_signed(r.delta_macro_f1, "%+.3f");
    out << '\n';
}

}  // namespace posce
