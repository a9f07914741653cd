// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "histoselect/segmentation.hpp"
#include "histoselect/wsi_data.hpp"

namespace histoselect {

// All Bernoulli-KL arguments are clamped into [kKlEps, 1 - kKlEps] so
// saturated sigmoids cannot produce infinities.
constexpr double kKlEps = 1e-6;

struct LossBreakdown {
    double l_vqa = 0.0;
    double l_group = 0.0;
    double l_patch = 0.0;
    double beta_g = 0.0;
    double beta_p = 0.0;
    double total = 0.0;  // l_vqa + beta_g * l_group + beta_p * l_patch
};

// Linear warmup to the final weights, then held constant.
struct BetaSchedule {
    std::size_t warmup_iters = 5000;
    double beta_g_final = 0.2;
    double beta_p_final = 0.1;
};

// pi log(pi/p) + (1-pi) log((1-pi)/(1-p)) after clamping both arguments.
double bernoulli_kl(double pi, double p);

// Pseudo-prior per group: (cos(g_j, q) + 1) / 2, clamped; 0.0 for empty groups.
std::vector<double> group_prior(const TissuePartition& partition,
                                const QuestionRecord& question);

// Pseudo-prior per patch: (cos(x_i, q) + 1) / 2, clamped.
std::vector<double> patch_prior(const EmbeddingBundle& bundle,
                                const QuestionRecord& question);

// Mean Bernoulli KL of rate against prior over the nonempty groups.
double group_loss(const std::vector<double>& rates,
                  const std::vector<double>& priors,
                  const std::vector<std::size_t>& group_sizes);

// Mean Bernoulli KL of score against prior over all patches.
double patch_loss(const std::vector<double>& scores,
                  const std::vector<double>& priors);

// (beta_g, beta_p) at a given iteration.
std::pair<double, double> beta_at(std::size_t iter, const BetaSchedule& schedule);

LossBreakdown total_loss(double l_vqa, double l_group, double l_patch,
                         std::pair<double, double> betas);

// One CSV row of the training history; `history_csv_header()` gives the
// column line "iter,l_vqa,l_group,l_patch,beta_g,beta_p,total".
std::string history_csv_header();
std::string history_csv_row(std::size_t iter, const LossBreakdown& loss);

}  // namespace histoselect
