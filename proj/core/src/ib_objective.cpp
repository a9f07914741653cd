// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/ib_objective.hpp"

#include <algorithm>
#include <cmath>

#include "histoselect/error.hpp"
#include "histoselect/io_util.hpp"

namespace histoselect {

namespace {

double clamp_unit(double v) {
    return std::clamp(v, kKlEps, 1.0 - kKlEps);
}

double cos_to_prior(double c) {
    return clamp_unit((c + 1.0) / 2.0);
}

}  // namespace

double bernoulli_kl(double pi, double p) {
    if (!std::isfinite(pi) || !std::isfinite(p)) {
        throw ValidationError("bernoulli_kl: non-finite argument");
    }
    const double a = clamp_unit(pi);
    const double b = clamp_unit(p);
    return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
}

std::vector<double> group_prior(const TissuePartition& partition,
                                const QuestionRecord& question) {
    std::vector<double> priors(partition.m_groups, 0.0);
    for (std::size_t j = 0; j < partition.m_groups; ++j) {
        if (!partition.group_valid(j)) {
            continue;
        }
        priors[j] = cos_to_prior(
            cosine_similarity(partition.prototype(j), question.embedding));
    }
    return priors;
}

std::vector<double> patch_prior(const EmbeddingBundle& bundle,
                                const QuestionRecord& question) {
    std::vector<double> priors(bundle.n_patches);
    for (std::size_t i = 0; i < bundle.n_patches; ++i) {
        priors[i] = cos_to_prior(
            cosine_similarity(bundle.patch(i), question.embedding));
    }
    return priors;
}

double group_loss(const std::vector<double>& rates,
                  const std::vector<double>& priors,
                  const std::vector<std::size_t>& group_sizes) {
    if (rates.size() != priors.size() || rates.size() != group_sizes.size()) {
        throw ValidationError("group_loss: shape mismatch");
    }
    double sum = 0.0;
    std::size_t nonempty = 0;
    for (std::size_t j = 0; j < rates.size(); ++j) {
        if (group_sizes[j] == 0) {
            continue;
        }
        sum += bernoulli_kl(rates[j], priors[j]);
        ++nonempty;
    }
    if (nonempty == 0) {
        throw ValidationError("group_loss: every group is empty");
    }
    return sum / static_cast<double>(nonempty);
}

double patch_loss(const std::vector<double>& scores,
                  const std::vector<double>& priors) {
    if (scores.size() != priors.size()) {
        throw ValidationError("patch_loss: shape mismatch");
    }
    if (scores.empty()) {
        throw ValidationError("patch_loss: no patches");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sum += bernoulli_kl(scores[i], priors[i]);
    }
    return sum / static_cast<double>(scores.size());
}

std::pair<double, double> beta_at(std::size_t iter, const BetaSchedule& schedule) {
    double factor = 1.0;
    if (schedule.warmup_iters > 0) {
        factor = std::min(1.0, static_cast<double>(iter) /
                                   static_cast<double>(schedule.warmup_iters));
    }
    return {schedule.beta_g_final * factor, schedule.beta_p_final * factor};
}

LossBreakdown total_loss(double l_vqa, double l_group, double l_patch,
                         std::pair<double, double> betas) {
    LossBreakdown out;
    out.l_vqa = l_vqa;
    out.l_group = l_group;
    out.l_patch = l_patch;
    out.beta_g = betas.first;
    out.beta_p = betas.second;
    out.total = l_vqa + betas.first * l_group + betas.second * l_patch;
    return out;
}

std::string history_csv_header() {
    return "iter,l_vqa,l_group,l_patch,beta_g,beta_p,total\n";
}

std::string history_csv_row(std::size_t iter, const LossBreakdown& loss) {
    std::string row = std::to_string(iter);
    row += ',';
    row += fmt_double(loss.l_vqa);
    row += ',';
    row += fmt_double(loss.l_group);
    row += ',';
    row += fmt_double(loss.l_patch);
    row += ',';
    row += fmt_double(loss.beta_g);
    row += ',';
    row += fmt_double(loss.beta_p);
    row += ',';
    row += fmt_double(loss.total);
    row += '\n';
    return row;
}

}  // namespace histoselect
