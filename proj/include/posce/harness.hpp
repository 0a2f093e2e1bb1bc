#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posce/corpus.hpp"
#include "posce/metrics.hpp"
#include "posce/posce_table.hpp"
#include "posce/textmodel.hpp"

namespace posce {

/// When the PosCE table is (re)built: never, once after epoch e (`at:e`), or
/// after every epoch up to and including e (`upto:e`).
struct Schedule {
    enum class Kind { Never, At, UpTo };

    Kind kind = Kind::Never;
    int epoch = 0;

    static Schedule never() { return {}; }
    static Schedule at(int e) { return {Kind::At, e}; }
    static Schedule up_to(int e) { return {Kind::UpTo, e}; }
    static Schedule parse(std::string_view text);

    std::string to_string() const;
    /// Column label in the style "=5" / "<=5" / "never".
    std::string label() const;
    bool builds_after(int completed_epoch) const;
    std::vector<int> build_epochs(int max_epochs) const;

    friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct TrainConfig {
    double lr = 1e-3;
    double l2 = 1e-5;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 20;
    std::uint64_t seed = 1;
    Schedule schedule;
    EstimatorConfig estimator;
    std::size_t max_len = 32;
    std::size_t hidden = 32;
    int threads = 1;
    /// false pins every profile to uniform and skips table builds.
    bool posce_enabled = true;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct BuildEvent {
    int epoch = 0;
    double wall_seconds = 0.0;
    BuildStats stats;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<EvalReport> test;
    std::optional<BuildEvent> build;
};

struct TrainResult {
    ClassifierParams params;
    PosceTable table;
    std::vector<EpochRecord> log;
};

/// Minibatch Adam on cross-entropy. Profiles come from the current table
/// (uniform until the first build); a build at the end of epoch e feeds
/// every later step. Results do not depend on config.threads.
TrainResult train(std::shared_ptr<const EmbeddingTable> embeddings, const Corpus& train_corpus,
                  const Corpus* test_corpus, const TrainConfig& config);

EvalReport evaluate(const Classifier& model, const PosceTable& table,
                    std::span<const EncodedSentence> corpus, int threads = 1);
EvalReport evaluate(const Classifier& model, const PosceTable& table, const Corpus& corpus,
                    int threads = 1);

/// Class probabilities with the table's profile for the sentence's aspect position.
Vector predict_with_table(const Classifier& model, const PosceTable& table,
                          const EncodedSentence& sentence);

// Run log: JSON lines. The first record carries the effective config; then
// one record per epoch. Wall-clock times are kept out of it so identical runs
// produce identical logs; write_timings emits them separately.
void write_run_log(std::ostream& out, const nlohmann::json& config, const std::vector<EpochRecord>& log);
void write_timings(std::ostream& out, const std::vector<EpochRecord>& log);
nlohmann::json to_json(const EvalReport& report);

struct ScheduleRow {
    Schedule schedule;
    EvalReport report;
    double delta_accuracy_pp = 0.0;  // percentage points vs the never baseline
    double delta_macro_f1 = 0.0;
};

/// Trains once per schedule with the shared config and seed, plus a `never`
/// baseline, and reports final test metrics with deltas against it.
std::vector<ScheduleRow> schedule_experiment(std::shared_ptr<const EmbeddingTable> embeddings,
                                             const Corpus& train_corpus, const Corpus& test_corpus,
                                             const TrainConfig& base, std::span<const Schedule> schedules);

void write_comparison_tsv(std::ostream& out, std::span<const ScheduleRow> rows);
/// Schedules as columns, rows "Acc" (delta %) and "F1" (delta, absolute).
void write_comparison_grid(std::ostream& out, std::span<const ScheduleRow> rows);

}  // namespace posce
