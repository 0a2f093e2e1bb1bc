#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "posce/corpus.hpp"
#include "posce/error.hpp"
#include "posce/harness.hpp"
#include "posce/posce_table.hpp"
#include "posce/rng.hpp"
#include "posce/serialization.hpp"
#include "posce/textmodel.hpp"

namespace posce::cli {

namespace fs = std::filesystem;

namespace {

// Stream ids for seeds the CLI draws itself (the harness owns 1 and 1000+).
constexpr std::uint64_t kEmbeddingStream = 2;
constexpr std::uint64_t kSynthVectorStream = 3;

constexpr int kFormatVersion = 1;

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, value);
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    return out;
}

fs::path prepare_out_dir(const std::string& out) {
    if (out.empty()) fail(ErrorKind::Usage, "--out is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + out + ": " + ec.message());
    return fs::path(out);
}

void write_config_comment(std::ostream& out, const nlohmann::json& config) {
    out << "# " << nlohmann::json{{"format_version", kFormatVersion}, {"config", config}}.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Shared option groups

struct EstimatorArgs {
    std::string mode = "auto";
    std::size_t samples = 2000;
    std::size_t exact_max_players = 12;
    std::uint64_t seed = 0;

    void attach(CLI::App& app) {
        app.add_option("--estimator", mode, "Shapley estimator: auto, exact or permutation")
            ->capture_default_str();
        app.add_option("--samples", samples, "Permutations per sentence when sampling")->capture_default_str();
        app.add_option("--exact-max-players", exact_max_players,
                       "auto: largest context enumerated exactly")
            ->capture_default_str();
        app.add_option("--estimator-seed", seed, "Stream id for permutation sampling")->capture_default_str();
    }

    EstimatorConfig resolve() const {
        EstimatorConfig c;
        c.mode = parse_estimator_mode(mode);
        c.samples = samples;
        c.exact_max_players = exact_max_players;
        c.seed = seed;
        c.validate();
        return c;
    }
};

void attach_common(CLI::App& app, std::uint64_t& seed, int& threads, std::string* out) {
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (1 = reproducible serial mode)")
        ->capture_default_str();
    if (out != nullptr) app.add_option("--out", *out, "Output directory");
}

struct TrainArgs {
    std::string data;
    std::string test;
    std::string vectors;
    std::size_t dim = 32;
    std::string schedule = "never";
    std::string out;
    EstimatorArgs estimator;
    TrainConfig config;

    void attach(CLI::App& app) {
        attach_common(app, config.seed, config.threads, &out);
        app.add_option("--data", data, "Training dataset (TSV or JSONL)")->required();
        app.add_option("--test", test, "Test dataset, evaluated after every epoch");
        app.add_option("--vectors", vectors, "Word vectors (GloVe text); random if omitted");
        app.add_option("--dim", dim, "Dimension of random vectors when --vectors is absent")
            ->capture_default_str();
        app.add_option("--lr", config.lr, "Adam learning rate")->capture_default_str();
        app.add_option("--l2", config.l2, "L2 strength")->capture_default_str();
        app.add_option("--batch", config.batch_size, "Minibatch size")->capture_default_str();
        app.add_option("--epochs", config.max_epochs, "Training epochs")->capture_default_str();
        app.add_option("--schedule", schedule, "PosCE builds: never, at:E or upto:E")->capture_default_str();
        app.add_option("--max-len", config.max_len, "Token window per sentence")->capture_default_str();
        app.add_option("--hidden", config.hidden, "Hidden width")->capture_default_str();
        estimator.attach(app);
    }

    void resolve() {
        config.schedule = Schedule::parse(schedule);
        config.estimator = estimator.resolve();
        config.validate();
        if (dim == 0) fail(ErrorKind::Validation, "--dim must be positive");
    }

    nlohmann::json effective() const {
        auto j = to_json(config);
        j["data"] = data;
        j["test"] = test;
        j["vectors"] = vectors;
        if (vectors.empty()) j["dim"] = dim;
        return j;
    }
};

struct LoadedData {
    Corpus train;
    Corpus test;
    std::shared_ptr<const EmbeddingTable> embeddings;
};

LoadedData load_training_inputs(const TrainArgs& args) {
    LoadedData d;
    d.train = load_dataset(args.data, DatasetFormat::Auto, Split::Train);
    if (d.train.empty()) fail(ErrorKind::Validation, "training dataset " + args.data + " holds no sentences");
    if (!args.test.empty()) d.test = load_dataset(args.test, DatasetFormat::Auto, Split::Test);

    auto vocabulary = d.train.vocabulary();
    for (auto& token : d.test.vocabulary()) vocabulary.push_back(std::move(token));
    if (args.vectors.empty()) {
        d.embeddings = std::make_shared<const EmbeddingTable>(
            random_embeddings(d.train.vocabulary(), args.dim, derive_seed(args.config.seed, kEmbeddingStream)));
        // Test-only words fall back to UNK, as they would with pretrained vectors.
    } else {
        d.embeddings = std::make_shared<const EmbeddingTable>(
            load_word_vectors(args.vectors).restricted_to(vocabulary));
    }
    if (d.embeddings->dim() % 2 != 0) {
        fail(ErrorKind::Validation, "embedding dimension must be even for the positional encoding");
    }
    return d;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(TrainArgs& args, std::ostream& out) {
    args.resolve();
    const fs::path dir = prepare_out_dir(args.out);
    const auto data = load_training_inputs(args);
    const auto config = args.effective();

    const auto result = train(data.embeddings, data.train, data.test.empty() ? nullptr : &data.test, args.config);

    save_checkpoint(dir / "model.ckpt", Checkpoint{data.embeddings, result.params, args.config.max_len, config});
    save_table(dir / "posce.table", result.table, config);
    {
        auto f = open_output(dir / "posce_table.tsv");
        write_config_comment(f, config);
        export_table_tsv(f, result.table);
    }
    {
        auto f = open_output(dir / "run_log.jsonl");
        write_run_log(f, config, result.log);
    }
    {
        auto f = open_output(dir / "timings.tsv");
        write_config_comment(f, config);
        write_timings(f, result.log);
    }

    out << "trained " << result.log.size() << " epochs on " << data.train.size() << " sentences\n";
    for (const auto& r : result.log) {
        out << "epoch " << r.epoch << "  loss " << fmt("%.4f", r.mean_loss);
        if (r.test) out << "  acc " << fmt("%.4f", r.test->accuracy) << "  f1 " << fmt("%.4f", r.test->macro_f1);
        if (r.build) out << "  [posce build: " << r.build->stats.sentences << " sentences]";
        out << '\n';
    }
    out << "wrote " << (dir / "model.ckpt").string() << ", posce.table, posce_table.tsv, run_log.jsonl, timings.tsv\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint;
    std::string table;
    std::string data;
    std::string out;
    std::uint64_t seed = 1;
    int threads = 1;

    void attach(CLI::App& app) {
        attach_common(app, seed, threads, &out);
        app.add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
        app.add_option("--table", table, "PosCE table; uniform profiles if omitted");
        app.add_option("--data", data, "Dataset to score")->required();
    }
};

PosceTable load_table_for(const Checkpoint& ckpt, const std::string& path) {
    if (path.empty()) return PosceTable::unbuilt(ckpt.max_len);
    auto table = load_table(path);
    if (table.max_len != ckpt.max_len) {
        fail(ErrorKind::Validation, "table max_len " + std::to_string(table.max_len) +
                                        " does not match checkpoint max_len " + std::to_string(ckpt.max_len));
    }
    return table;
}

void write_report_tsv(std::ostream& out, const EvalReport& r) {
    out << "metric\tclass\tvalue\n";
    out << "accuracy\tall\t" << fmt("%.6f", r.accuracy) << '\n';
    out << "macro_f1\tall\t" << fmt("%.6f", r.macro_f1) << '\n';
    for (std::size_t c = 0; c < kClassCount; ++c) {
        const auto name = std::string(to_string(static_cast<Polarity>(c)));
        out << "precision\t" << name << '\t' << fmt("%.6f", r.per_class[c].precision) << '\n';
        out << "recall\t" << name << '\t' << fmt("%.6f", r.per_class[c].recall) << '\n';
        out << "f1\t" << name << '\t' << fmt("%.6f", r.per_class[c].f1) << '\n';
    }
    for (std::size_t g = 0; g < kClassCount; ++g) {
        for (std::size_t p = 0; p < kClassCount; ++p) {
            out << "confusion\t" << to_string(static_cast<Polarity>(g)) << "->"
                << to_string(static_cast<Polarity>(p)) << '\t' << r.confusion[g][p] << '\n';
        }
    }
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
    if (args.threads < 1) fail(ErrorKind::Validation, "threads must be at least 1");
    const auto ckpt = load_checkpoint(args.checkpoint);
    const auto table = load_table_for(ckpt, args.table);
    const auto corpus = load_dataset(args.data);
    const auto model = ckpt.classifier();
    const auto report = evaluate(model, table, corpus, args.threads);

    out << "sentences  " << report.total() << '\n';
    out << "accuracy   " << fmt("%.4f", report.accuracy) << '\n';
    out << "macro-F1   " << fmt("%.4f", report.macro_f1) << '\n';
    out << "class      precision  recall  f1\n";
    for (std::size_t c = 0; c < kClassCount; ++c) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-10s %9.4f  %6.4f  %6.4f\n",
                      std::string(to_string(static_cast<Polarity>(c))).c_str(), report.per_class[c].precision,
                      report.per_class[c].recall, report.per_class[c].f1);
        out << line;
    }
    out << "confusion (rows gold, columns predicted)\n";
    for (const auto& row : report.confusion) out << "  " << row[0] << '\t' << row[1] << '\t' << row[2] << '\n';
    out << '\n';
    write_report_tsv(out, report);

    if (!args.out.empty()) {
        const fs::path dir = prepare_out_dir(args.out);
        auto f = open_output(dir / "eval.tsv");
        write_config_comment(f, {{"checkpoint", args.checkpoint}, {"table", args.table}, {"data", args.data}});
        write_report_tsv(f, report);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// posce-build

struct BuildArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::uint64_t seed = 1;
    int threads = 1;
    EstimatorArgs estimator;

    void attach(CLI::App& app) {
        attach_common(app, seed, threads, &out);
        app.add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
        app.add_option("--data", data, "Corpus whose Shapley profiles form the table")->required();
        estimator.attach(app);
    }
};

int cmd_posce_build(const BuildArgs& args, std::ostream& out) {
    if (args.threads < 1) fail(ErrorKind::Validation, "threads must be at least 1");
    auto estimator = args.estimator.resolve();
    const fs::path dir = prepare_out_dir(args.out);
    const auto ckpt = load_checkpoint(args.checkpoint);
    const auto corpus = load_dataset(args.data);
    if (corpus.empty()) fail(ErrorKind::Validation, "dataset " + args.data + " holds no sentences");
    const auto model = ckpt.classifier();
    const auto encoded = encode_corpus(model.embeddings(), corpus, ckpt.max_len);
    estimator.seed = derive_seed(args.seed, args.estimator.seed);

    const auto built = build_table(model, encoded, ckpt.max_len, estimator, args.threads);
    const nlohmann::json config{{"checkpoint", args.checkpoint},
                                {"checkpoint_config", ckpt.config},
                                {"data", args.data},
                                {"seed", args.seed},
                                {"estimator",
                                 {{"mode", args.estimator.mode},
                                  {"samples", args.estimator.samples},
                                  {"exact_max_players", args.estimator.exact_max_players},
                                  {"seed", args.estimator.seed}}}};
    save_table(dir / "posce.table", built.table, config);
    {
        auto f = open_output(dir / "posce_table.tsv");
        write_config_comment(f, config);
        export_table_tsv(f, built.table);
    }
    out << "built PosCE table from " << built.stats.sentences << " sentences (" << built.stats.exact_sentences
        << " exact, " << built.stats.sampled_sentences << " sampled, " << built.stats.payoff_evaluations
        << " payoff evaluations)\n";
    out << "wrote " << (dir / "posce.table").string() << ", posce_table.tsv\n";
    return 0;
}

// ---------------------------------------------------------------------------
// attribute

struct AttributeArgs {
    std::string checkpoint;
    std::string table;
    std::string text;
    std::size_t aspect_from = 0;
    std::optional<std::size_t> aspect_to;
    std::string payoff_class;
    std::string label;
    std::string tsv;
    std::uint64_t seed = 1;
    int threads = 1;
    EstimatorArgs estimator;

    void attach(CLI::App& app) {
        attach_common(app, seed, threads, nullptr);
        app.add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
        app.add_option("--table", table, "PosCE table for the historical row; uniform if omitted");
        app.add_option("--text", text, "Sentence to explain")->required();
        app.add_option("--aspect-from", aspect_from, "First aspect token (0-based)")->required();
        app.add_option("--aspect-to", aspect_to, "One past the last aspect token (default from+1)");
        app.add_option("--class", payoff_class, "Payoff class: 0, 1, 2 or true (default: predicted)");
        app.add_option("--label", label, "Gold polarity, needed for --class true");
        app.add_option("--tsv", tsv, "Also write the per-token table to this file");
        estimator.attach(app);
    }
};

std::size_t resolve_payoff_class(const AttributeArgs& args, const Vector& probs) {
    if (args.payoff_class.empty()) return argmax_class(std::span<const double>(probs.data(), kClassCount));
    if (args.payoff_class == "true") {
        if (args.label.empty()) fail(ErrorKind::Usage, "--class true needs --label <polarity>");
        return class_index(parse_polarity(args.label));
    }
    if (args.payoff_class == "0" || args.payoff_class == "1" || args.payoff_class == "2") {
        return static_cast<std::size_t>(args.payoff_class[0] - '0');
    }
    fail(ErrorKind::Usage, "--class must be 0, 1, 2 or true, got '" + args.payoff_class + "'");
}

int cmd_attribute(const AttributeArgs& args, std::ostream& out) {
    if (args.threads < 1) fail(ErrorKind::Validation, "threads must be at least 1");
    auto estimator = args.estimator.resolve();
    estimator.seed = derive_seed(args.seed, args.estimator.seed);
    const auto ckpt = load_checkpoint(args.checkpoint);
    const auto table = load_table_for(ckpt, args.table);
    const auto model = ckpt.classifier();

    Sentence sentence;
    sentence.id = "attribute";
    sentence.tokens = tokenize(args.text);
    sentence.aspect_from = args.aspect_from;
    sentence.aspect_to = args.aspect_to.value_or(args.aspect_from + 1);
    if (sentence.tokens.empty()) fail(ErrorKind::Validation, "--text has no tokens");
    if (!(sentence.aspect_from < sentence.aspect_to && sentence.aspect_to <= sentence.length())) {
        fail(ErrorKind::Validation, "aspect span [" + std::to_string(sentence.aspect_from) + ", " +
                                        std::to_string(sentence.aspect_to) + ") does not fit " +
                                        std::to_string(sentence.length()) + " tokens");
    }
    auto encoded = encode_sentence(model.embeddings(), sentence, ckpt.max_len);
    const std::size_t offset = sentence.aspect_from - encoded.aspect_from;
    const Vector probs = predict_with_table(model, table, encoded);
    encoded.label = resolve_payoff_class(args, probs);

    const AspectGameSpec spec{&encoded, encoded.label};
    const auto attribution = sentence_profile(model, spec, estimator, args.threads);
    const Vector profile = softmax(attribution.raw);
    const Vector historical = lookup_profile(table, encoded.aspect_position(), encoded.length());
    const auto game = game_from_sentence(model, spec);
    const auto players = game.player_count();
    const double full = game.payoff(Coalition::full(players));
    const double empty = game.payoff(Coalition(players));

    const auto class_name = [](std::size_t c) { return std::string(to_string(static_cast<Polarity>(c))); };
    out << "text: " << args.text << '\n';
    if (encoded.length() < sentence.length()) {
        out << "note: cropped to tokens [" << offset << ", " << offset + encoded.length() << ") by max_len "
            << ckpt.max_len << "; positions below are within the crop\n";
    }
    out << "aspect: [" << encoded.aspect_from << ", " << encoded.aspect_to << ")  payoff class: "
        << encoded.label << " (" << class_name(encoded.label) << ")\n";
    const auto& sv = attribution.shapley;
    out << "estimator: " << to_string(sv.method) << ", " << players << " context words";
    if (sv.method == ShapleyMethod::Permutation) out << ", " << sv.sample_count << " samples, seed " << sv.seed;
    out << '\n';
    out << "historical row: " << (table.built() ? "t=" + std::to_string(std::min(encoded.aspect_position(), table.max_len - 1)) : "none (uniform)") << '\n';

    std::ostringstream rows;
    rows << "position\ttoken\traw_shapley\tprofile\thistorical\n";
    for (std::size_t i = 0; i < encoded.length(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        rows << i << '\t' << sentence.tokens[offset + i] << '\t' << fmt("%+.6f", attribution.raw[idx]) << '\t'
             << fmt("%.6f", profile[idx]) << '\t' << fmt("%.6f", historical[idx]) << '\n';
    }
    out << rows.str();
    out << "probabilities:";
    for (std::size_t c = 0; c < kClassCount; ++c) {
        out << ' ' << class_name(c) << '=' << fmt("%.6f", probs[static_cast<Eigen::Index>(c)]);
    }
    out << "  predicted=" << class_name(argmax_class(std::span<const double>(probs.data(), kClassCount))) << '\n';
    const double sum = attribution.raw.sum();
    const double gap = std::abs(sum - (full - empty));
    out << "check: sum(raw)=" << fmt("%+.9f", sum) << "  P(full)-P(aspect)=" << fmt("%+.9f", full - empty)
        << "  gap=" << fmt("%.2e", gap) << (gap <= 1e-6 ? "  ok" : "  MISMATCH") << '\n';

    if (!args.tsv.empty()) {
        auto f = open_output(args.tsv);
        write_config_comment(f, {{"checkpoint", args.checkpoint},
                                 {"table", args.table},
                                 {"text", args.text},
                                 {"aspect_from", args.aspect_from},
                                 {"aspect_to", sentence.aspect_to},
                                 {"payoff_class", encoded.label},
                                 {"estimator", to_string(sv.method)},
                                 {"samples", sv.sample_count},
                                 {"seed", sv.seed}});
        f << rows.str();
    }
    return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    SyntheticConfig config;
    std::optional<std::size_t> test_size;
    std::size_t dim = 32;
    std::string out;
    int threads = 1;

    void attach(CLI::App& app) {
        attach_common(app, config.seed, threads, &out);
        app.add_option("--size", config.train_size, "Training sentences")->capture_default_str();
        app.add_option("--test-size", test_size, "Test sentences (default size/2)");
        app.add_option("--min-len", config.min_len, "Shortest sentence")->capture_default_str();
        app.add_option("--max-len", config.max_len, "Longest sentence")->capture_default_str();
        app.add_option("--distractor-rate", config.distractor_rate, "Chance of a far opinion word")
            ->capture_default_str();
        app.add_option("--dim", dim, "Dimension of the emitted random word vectors")->capture_default_str();
    }
};

int cmd_synth(SynthArgs& args, std::ostream& out) {
    args.config.test_size = args.test_size.value_or(args.config.train_size / 2);
    args.config.validate();
    if (args.dim == 0 || args.dim % 2 != 0) fail(ErrorKind::Validation, "--dim must be positive and even");
    const fs::path dir = prepare_out_dir(args.out);
    const auto corpus = generate_synthetic(args.config);
    const nlohmann::json config{{"generator", "synthetic"},
                                {"train_size", args.config.train_size},
                                {"test_size", args.config.test_size},
                                {"min_len", args.config.min_len},
                                {"max_len", args.config.max_len},
                                {"distractor_rate", args.config.distractor_rate},
                                {"seed", args.config.seed},
                                {"dim", args.dim}};
    for (const auto& [name, split] : {std::pair{"train.tsv", &corpus.train}, std::pair{"test.tsv", &corpus.test}}) {
        auto f = open_output(dir / name);
        write_config_comment(f, config);
        write_dataset(f, *split);
        const auto h = split->class_histogram();
        out << name << ": " << split->size() << " sentences (positive " << h[0] << ", neutral " << h[1]
            << ", negative " << h[2] << ")\n";
    }
    {
        const auto vocab = synthetic_vocabulary();
        auto f = open_output(dir / "vectors.txt");
        write_word_vectors(f, random_embeddings(vocab, args.dim, derive_seed(args.config.seed, kSynthVectorStream)));
    }
    out << "wrote " << dir.string() << "/{train.tsv,test.tsv,vectors.txt}\n";
    return 0;
}

// ---------------------------------------------------------------------------
// schedule-experiment

struct ExperimentArgs {
    TrainArgs train;
    std::vector<std::string> schedules{"at:1", "upto:5", "at:5", "upto:10", "at:10", "upto:20", "at:20"};

    void attach(CLI::App& app) {
        train.attach(app);
        app.remove_option(app.get_option("--schedule"));
        app.add_option("--schedules", schedules, "Schedules to compare against never")
            ->delimiter(',')
            ->capture_default_str();
    }
};

int cmd_experiment(ExperimentArgs& args, std::ostream& out) {
    args.train.resolve();
    if (args.train.test.empty()) fail(ErrorKind::Usage, "schedule-experiment needs --test");
    std::vector<Schedule> schedules;
    for (const auto& s : args.schedules) {
        schedules.push_back(Schedule::parse(s));
        TrainConfig probe = args.train.config;
        probe.schedule = schedules.back();
        probe.validate();
    }
    const fs::path dir = prepare_out_dir(args.train.out);
    const auto data = load_training_inputs(args.train);
    auto config = args.train.effective();
    config.erase("schedule");
    config["schedules"] = args.schedules;

    const auto rows = schedule_experiment(data.embeddings, data.train, data.test, args.train.config, schedules);
    write_comparison_tsv(out, rows);
    out << '\n';
    write_comparison_grid(out, rows);
    {
        auto f = open_output(dir / "comparison.tsv");
        write_config_comment(f, config);
        write_comparison_tsv(f, rows);
    }
    {
        auto f = open_output(dir / "comparison_grid.tsv");
        write_config_comment(f, config);
        write_comparison_grid(f, rows);
    }
    return 0;
}

int report(std::ostream& err, std::string_view kind, const std::string& message, int code) {
    err << "error: " << kind << ": " << message << '\n';
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"PosCE: Shapley-based positional contribution embeddings for aspect sentiment", "posce"};
    app.require_subcommand(1);
    // Config files hold one [section] per subcommand, e.g. [train] lr = 0.01.
    app.set_config("--config", "", "Read option defaults from a TOML/INI file");
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    TrainArgs train_args;
    EvalArgs eval_args;
    BuildArgs build_args;
    AttributeArgs attribute_args;
    SynthArgs synth_args;
    ExperimentArgs experiment_args;

    auto* train_cmd = app.add_subcommand("train", "Train a classifier with a PosCE update schedule");
    train_args.attach(*train_cmd);
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset");
    eval_args.attach(*eval_cmd);
    auto* build_cmd = app.add_subcommand("posce-build", "Build a PosCE table from a checkpoint and corpus");
    build_args.attach(*build_cmd);
    auto* attribute_cmd = app.add_subcommand("attribute", "Per-token Shapley report for one sentence");
    attribute_args.attach(*attribute_cmd);
    auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic positional corpus");
    synth_args.attach(*synth_cmd);
    auto* experiment_cmd =
        app.add_subcommand("schedule-experiment", "Compare PosCE update schedules against the never baseline");
    experiment_args.attach(*experiment_cmd);

    std::vector<const char*> argv{"posce"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::string message = e.what();
        if (message.empty()) message = "invalid command line";
        return report(err, to_string(ErrorKind::Usage), message + " (run with --help)",
                      static_cast<int>(ErrorKind::Usage));
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args, out);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, out);
        if (build_cmd->parsed()) return cmd_posce_build(build_args, out);
        if (attribute_cmd->parsed()) return cmd_attribute(attribute_args, out);
        if (synth_cmd->parsed()) return cmd_synth(synth_args, out);
        if (experiment_cmd->parsed()) return cmd_experiment(experiment_args, out);
    } catch (const Error& e) {
        return report(err, to_string(e.kind()), e.what(), static_cast<int>(e.kind()));
    } catch (const std::bad_alloc&) {
        return report(err, "internal", "out of memory", 1);
    } catch (const std::exception& e) {
        return report(err, "internal", e.what(), 1);
    }
    return report(err, to_string(ErrorKind::Usage), "no subcommand given", static_cast<int>(ErrorKind::Usage));
}

}  // namespace posce::cli
