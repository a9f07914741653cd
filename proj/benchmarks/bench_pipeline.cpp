// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "histoselect/baselines.hpp"
#include "histoselect/oracle.hpp"
#include "histoselect/training.hpp"

using namespace histoselect;

namespace {

SyntheticSpec bench_spec(std::size_t side, std::size_t dim) {
    SyntheticSpec spec;
    spec.grid_rows = side;
    spec.grid_cols = side;
    spec.m_tissues = 4;
    spec.dim = dim;
    spec.n_classes = 4;
    spec.noise_sigma = 0.3;
    spec.blob_count = 3;
    spec.seed = 99;
    return spec;
}

}  // namespace

static void BM_segment(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const SyntheticInstance inst = generate_synthetic(bench_spec(side, 64));
    for (auto _ : state) {
        benchmark::DoNotOptimize(segment(inst.bundle, inst.prompts));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_segment)->Arg(16)->Arg(32)->Arg(64);

static void BM_patch_scores(benchmark::State& state) {
    const SyntheticInstance inst = generate_synthetic(bench_spec(32, 64));
    const SelectorParams params = init_params(64, 64, 4, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(patch_scores(inst.bundle, inst.question, params));
    }
}
BENCHMARK(BM_patch_scores);

static void BM_select(benchmark::State& state) {
    const SyntheticInstance inst = generate_synthetic(bench_spec(32, 16));
    const SelectorParams params = init_params(16, 16, 4, 1);
    const TissuePartition part = segment(inst.bundle, inst.prompts);
    const auto scores = patch_scores(inst.bundle, inst.question, params);
    const auto rates = group_rates(part, inst.question, params);
    const auto budgets = group_budgets(rates, part.group_sizes);
    for (auto _ : state) {
        benchmark::DoNotOptimize(select(part, scores, budgets, std::size_t{300}));
    }
}
BENCHMARK(BM_select);

static void BM_backward(benchmark::State& state) {
    const SyntheticInstance inst = generate_synthetic(bench_spec(16, 16));
    const SelectorParams params = init_params(16, 32, 4, 1);
    TrainConfig cfg;
    cfg.hidden_dim = 32;
    cfg.schedule = BetaSchedule{0, 0.2, 0.1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(inst.bundle, inst.prompts,
                                          inst.question, params, cfg, 0));
    }
}
BENCHMARK(BM_backward);

static void BM_bernoulli_kl(benchmark::State& state) {
    double x = 0.01;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bernoulli_kl(x, 0.37));
        x += 0.001;
        if (x > 0.99) {
            x = 0.01;
        }
    }
}
BENCHMARK(BM_bernoulli_kl);

static void BM_exhaustive_topk(benchmark::State& state) {
    Rng rng(5);
    std::vector<double> scores(18);
    for (double& s : scores) {
        s = rng.next_double();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(oracle::exhaustive_topk(scores, 9));
    }
}
BENCHMARK(BM_exhaustive_topk);

BENCHMARK_MAIN();
