#include <benchmark/benchmark.h>

#include "asmk/codebook.hpp"
#include "asmk/index.hpp"
#include "asmk/random.hpp"
#include "asmk/synthetic.hpp"
#include "asmk/varint.hpp"

using namespace asmk;

namespace {

MatrixF random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    MatrixF m(rows, cols);
    for (auto& v : m.data()) v = static_cast<float>(rng.uniform(-1, 1));
    return m;
}

Codebook random_codebook(std::size_t kappa, std::size_t dim)
{
    SplitMix64 rng(7);
    MatrixD c(kappa, dim);
    for (auto& v : c.data()) v = rng.uniform(-1, 1);
    return Codebook(c);
}

void BM_AssignOneByOne(benchmark::State& state)
{
    const auto kappa = static_cast<std::size_t>(state.range(0));
    const auto cb = random_codebook(kappa, 128);
    const auto x = random_rows(256, 128, 1);
    for (auto _ : state) {
        for (std::size_t i = 0; i < x.rows(); ++i) benchmark::DoNotOptimize(assign(cb, x.row(i), 1));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * x.rows()));
}
BENCHMARK(BM_AssignOneByOne)->Arg(1024)->Arg(8192);

void BM_AssignBatch(benchmark::State& state)
{
    const auto kappa = static_cast<std::size_t>(state.range(0));
    const auto cb = random_codebook(kappa, 128);
    const auto x = random_rows(256, 128, 1);
    for (auto _ : state) benchmark::DoNotOptimize(assign_batch(cb, x, 1));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * x.rows()));
}
BENCHMARK(BM_AssignBatch)->Arg(1024)->Arg(8192);

void BM_VarintRoundTrip(benchmark::State& state)
{
    SplitMix64 rng(3);
    std::vector<std::uint32_t> values(4096);
    for (auto& v : values) v = static_cast<std::uint32_t>(rng.below(std::uint64_t{1} << rng.below(28)));
    for (auto _ : state) {
        std::vector<std::uint8_t> bytes;
        for (auto v : values) varint::encode(v, bytes);
        std::size_t pos = 0;
        std::uint64_t sum = 0;
        std::uint64_t v = 0;
        while (varint::decode(bytes, pos, v)) sum += v;
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * values.size()));
}
BENCHMARK(BM_VarintRoundTrip);

void BM_Selectivity(benchmark::State& state)
{
    SplitMix64 rng(4);
    KernelParams p;
    std::vector<BinarySignature> sigs(512, BinarySignature(p.dim));
    for (auto& s : sigs) {
        for (auto& w : s.words()) w = rng.next();
    }
    for (auto _ : state) {
        double acc = 0.0;
        for (std::size_t i = 1; i < sigs.size(); ++i) acc += selectivity(sigs[i - 1], sigs[i], p);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * (sigs.size() - 1)));
}
BENCHMARK(BM_Selectivity);

struct SearchFixture {
    SearchFixture()
    {
        SyntheticSpec s;
        s.n_images = 1000;
        s.n_queries = 20;
        s.descriptors_per_image = 300;
        s.dim = 128;
        s.n_objects = 20;
        s.noise_sigma = 0.1;
        s.seed = 1;
        corpus = generate_synthetic(s);
        MatrixF sample(0, s.dim);
        for (std::size_t i = 0; i < corpus.database.size(); i += 10) {
            for (std::size_t r = 0; r < corpus.database[i].size(); ++r) sample.append_row(corpus.database[i].vectors.row(r));
        }
        KMeansOptions o;
        o.kappa = 1024;
        o.iterations = 5;
        codebook = train_codebook(sample, o);
        KernelParams p;
        std::vector<AggregatedImageRecord> records;
        for (std::size_t i = 0; i < corpus.database.size(); ++i) {
            records.push_back(build_record(quantize(codebook, corpus.database[i].vectors, 1),
                                           static_cast<std::uint32_t>(i)));
        }
        index = build_index(records, p, o.kappa);
    }
    SyntheticCorpus corpus;
    Codebook codebook;
    InvertedIndex index;
};

void BM_Search(benchmark::State& state)
{
    static const SearchFixture f;
    const auto ma = static_cast<std::size_t>(state.range(0));
    std::size_t q = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(search(f.index, f.codebook, f.corpus.queries[q].vectors, ma, 100));
        q = (q + 1) % f.corpus.queries.size();
    }
}
BENCHMARK(BM_Search)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
