#include <benchmark/benchmark.h>

#include <random>

#include "gcinfer/compile.hpp"
#include "gcinfer/garble.hpp"
#include "gcinfer/ot.hpp"
#include "gcinfer/simulate.hpp"

using namespace gcinfer;

namespace {

const ModelDescriptor& desk() {
  static const auto m = load_model(std::string(GCINFER_SOURCE_DIR) + "/fixtures/desk_64_16_8.json");
  return m;
}

const CompiledCircuit& desk_folded() {
  static const auto c = compile(desk(), CompileMode::Folded);
  return c;
}

std::vector<uint8_t> bits(size_t n, std::mt19937_64& rng) {
  std::vector<uint8_t> v(n);
  for (auto& b : v) b = rng() & 1;
  return v;
}

std::vector<FxVec> inputs(size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> U(-8192, 8191);
  std::vector<FxVec> xs(n, FxVec(desk().input_size()));
  for (auto& x : xs)
    for (auto& v : x) v = from_raw(U(rng));
  return xs;
}

// full garble of the folded 64-16-8 program; counter is AND gates per second
void BM_Garble(benchmark::State& st) {
  const auto& p = desk_folded().program;
  std::mt19937_64 rng(2);
  auto g = bits(party_counts(p).garbler, rng);
  const auto ands = stats(p).nonxor_count;
  std::vector<uint8_t> tables;
  std::vector<Block> labels;
  for (auto _ : st) {
    ProgramGarbler gb(p, Block(_mm_set_epi64x(3, int64_t(rng()))));
    tables.clear();
    while (gb.cycles_done() < gb.total_cycles()) {
      labels.clear();
      gb.garble_next(g, tables, labels);
    }
    benchmark::DoNotOptimize(tables.data());
  }
  st.counters["and_gates/s"] = benchmark::Counter(double(ands) * double(st.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Garble)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_GarbleEvaluate(benchmark::State& st) {
  const auto& p = desk_folded().program;
  std::mt19937_64 rng(3);
  auto pc = party_counts(p);
  auto g = bits(pc.garbler, rng), e = bits(pc.evaluator, rng);
  for (auto _ : st) benchmark::DoNotOptimize(garble_and_evaluate(p, g, e, Block(_mm_set_epi64x(5, 7))));
}
BENCHMARK(BM_GarbleEvaluate)->Unit(benchmark::kMillisecond)->UseRealTime();

// arg 1 = OpenMP, 0 = serial reference
void BM_SimulateBatch(benchmark::State& st) {
  const auto& p = desk_folded().program;
  std::mt19937_64 rng(4);
  auto pc = party_counts(p);
  std::vector<std::vector<uint8_t>> g(64), e(64);
  for (size_t i = 0; i < 64; ++i) g[i] = bits(pc.garbler, rng), e[i] = bits(pc.evaluator, rng);
  for (auto _ : st) benchmark::DoNotOptimize(simulate_batch(p, g, e, st.range(0) != 0));
}
BENCHMARK(BM_SimulateBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_RefEvalBatch(benchmark::State& st) {
  static const auto xs = inputs(2048);
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) ? ref_network_eval_batch(desk(), xs)
                                         : ref_network_eval_batch_serial(desk(), xs));
}
BENCHMARK(BM_RefEvalBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_OtSecure(benchmark::State& st) {
  const size_t n = 1024;
  std::mt19937_64 rng(6);
  std::vector<OtPair> pairs(n);
  for (auto& pr : pairs) pr = {Block(_mm_set_epi64x(int64_t(rng()), 1)), Block(_mm_set_epi64x(int64_t(rng()), 2))};
  auto c = bits(n, rng);
  for (auto _ : st) benchmark::DoNotOptimize(ot_run_local(OtMode::Secure, pairs, c, st.range(0) != 0));
  st.counters["ots/s"] = benchmark::Counter(double(n) * double(st.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_OtSecure)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
