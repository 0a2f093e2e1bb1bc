// Serial reference kernels against the OpenMP ones. Thread counts are the
// benchmark argument; the reference variants ignore it.

#include <benchmark/benchmark.h>

#include <memory>

#include "posce/corpus.hpp"
#include "posce/posce_table.hpp"
#include "posce/rng.hpp"
#include "posce/shapley.hpp"

using namespace posce;

namespace {

// Random payoff table: cheap payoffs, so the kernels dominate.
CoalitionGame table_game(std::size_t players) {
    Rng rng(17);
    std::vector<double> values(std::size_t{1} << players);
    for (auto& v : values) v = rng.uniform();
    return CoalitionGame::from_table(std::move(values));
}

struct ModelFixture {
    std::shared_ptr<const EmbeddingTable> embeddings;
    Classifier model;
    std::vector<EncodedSentence> corpus;
    EncodedSentence longest;

    ModelFixture()
        : embeddings(std::make_shared<const EmbeddingTable>(random_embeddings(synthetic_vocabulary(), 32, 5))),
          model(embeddings, ClassifierParams::random(32, 32, 6), 12) {
        SyntheticConfig sc;
        sc.train_size = 60;
        sc.test_size = 30;
        sc.min_len = 8;
        sc.max_len = 12;
        corpus = encode_corpus(*embeddings, generate_synthetic(sc).train, 12);
        longest = corpus.front();
        for (const auto& s : corpus) {
            if (s.length() > longest.length()) longest = s;
        }
    }
};

const ModelFixture& fixture() {
    static const ModelFixture f;
    return f;
}

void BM_ExactReference(benchmark::State& state) {
    const auto game = table_game(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(reference::shapley_exact(game));
}
BENCHMARK(BM_ExactReference)->Arg(12)->Arg(16)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_ExactParallel(benchmark::State& state) {
    const auto game = table_game(static_cast<std::size_t>(state.range(0)));
    const auto threads = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(shapley_exact(game, threads));
}
BENCHMARK(BM_ExactParallel)->ArgsProduct({{12, 16}, {1, 2, 4, 8}})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_PermutationReference(benchmark::State& state) {
    const auto game = table_game(16);
    for (auto _ : state) benchmark::DoNotOptimize(reference::shapley_permutation(game, 2000, 3));
}
BENCHMARK(BM_PermutationReference)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_PermutationParallel(benchmark::State& state) {
    const auto game = table_game(16);
    const auto threads = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(shapley_permutation(game, 2000, 3, threads));
}
BENCHMARK(BM_PermutationParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);

// One model-backed game: every payoff is a forward pass.
void BM_SentenceExactReference(benchmark::State& state) {
    const auto& f = fixture();
    const auto game = game_from_sentence(f.model, AspectGameSpec::for_label(f.longest));
    for (auto _ : state) benchmark::DoNotOptimize(reference::shapley_exact(game));
}
BENCHMARK(BM_SentenceExactReference)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_SentenceExactParallel(benchmark::State& state) {
    const auto& f = fixture();
    const auto game = game_from_sentence(f.model, AspectGameSpec::for_label(f.longest));
    const auto threads = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(shapley_exact(game, threads));
}
BENCHMARK(BM_SentenceExactParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_TableBuildReference(benchmark::State& state) {
    const auto& f = fixture();
    const EstimatorConfig est{EstimatorMode::Exact};
    for (auto _ : state) benchmark::DoNotOptimize(reference::build_table(f.model, f.corpus, 12, est));
}
BENCHMARK(BM_TableBuildReference)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_TableBuildParallel(benchmark::State& state) {
    const auto& f = fixture();
    const EstimatorConfig est{EstimatorMode::Exact};
    const auto threads = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_table(f.model, f.corpus, 12, est, threads));
}
BENCHMARK(BM_TableBuildParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
