// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "histoselect/training.hpp"

// Brute-force verifiers, each coded independently of the implementation it
// checks: exhaustive subset enumeration for top-k, a two-outcome sum for the
// Bernoulli KL, central differences for gradients, and an exact rational
// hypergeometric expectation for random-retrieval F1.
namespace histoselect::oracle {

// Enumerates all C(n, k) subsets (n <= 20) and returns the one maximizing the
// score sum; equal sums resolve to the lexicographically smallest index set.
std::vector<std::size_t> exhaustive_topk(std::span<const double> scores,
                                         std::size_t k);

// Bernoulli KL as an explicit sum over the two outcomes, with the same
// [kKlEps, 1 - kKlEps] argument clamp as the implementation under test.
double kl_direct(double pi, double p);

// Central differences (f(x+h) - f(x-h)) / 2h per parameter coordinate.
ParamGradients finite_diff(const std::function<double(const SelectorParams&)>& f,
                           const SelectorParams& at, double step);

// E[F1] over the hypergeometric draw of k from n with t relevant, evaluated
// in exact rational arithmetic and converted to double at the end.
double expected_random_f1(std::size_t n, std::size_t t, std::size_t k);

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    std::uint64_t worst_seed = 0;
};

struct GradCheckConfig {
    std::size_t seeds = 20;
    std::size_t grid_rows = 4;
    std::size_t grid_cols = 8;  // N = 32
    std::size_t m_tissues = 3;
    std::size_t dim = 8;
    std::size_t n_classes = 4;
    std::size_t hidden_dim = 4;
    double noise_sigma = 0.3;
    double step = 1e-5;
    double tolerance = 1e-4;
    std::uint64_t base_seed = 2026;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_err = 0.0;
    std::string worst_block;
    std::size_t worst_index = 0;
    std::uint64_t worst_seed = 0;
    std::size_t boundary_resamples = 0;
    double tolerance = 0.0;
    bool passed = false;
};

// Compares training::backward against finite differences of forward's total
// on seeded synthetic instances, re-sampling any instance whose scores sit
// within 1e-6 of a selection boundary or whose rate*size is within 1e-3 of a
// budget flip.
GradCheckReport run_gradcheck(const GradCheckConfig& config);

std::string gradcheck_report_json(const GradCheckReport& report);

}  // namespace histoselect::oracle
