// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "histoselect/error.hpp"
#include "histoselect/ib_objective.hpp"
#include "histoselect/rng.hpp"

namespace histoselect::oracle {

namespace {

double subset_sum(std::uint32_t mask, std::span<const double> scores) {
    double sum = 0.0;
    while (mask != 0) {
        const int i = std::countr_zero(mask);
        sum += scores[static_cast<std::size_t>(i)];
        mask &= mask - 1;
    }
    return sum;
}

// Index-set lexicographic order: at the first index where membership
// differs, the smaller set is the one containing it.
bool lex_less(std::uint32_t a, std::uint32_t b) {
    const std::uint32_t diff = a ^ b;
    if (diff == 0) {
        return false;
    }
    const std::uint32_t lowbit = diff & (~diff + 1);
    return (a & lowbit) != 0;
}

}  // namespace

std::vector<std::size_t> exhaustive_topk(std::span<const double> scores,
                                         std::size_t k) {
    const std::size_t n = scores.size();
    if (n > 20) {
        throw ValidationError("exhaustive_topk: n " + std::to_string(n) +
                              " > 20 is not enumerable");
    }
    if (k > n) {
        throw ValidationError("exhaustive_topk: k > n");
    }
    std::vector<std::size_t> best_set;
    if (k == 0) {
        return best_set;
    }
    std::uint32_t best_mask = (1u << k) - 1u;
    double best_sum = subset_sum(best_mask, scores);
    const std::uint32_t limit = 1u << n;
    // Gosper's hack walks every k-subset mask in increasing numeric order.
    std::uint32_t mask = best_mask;
    while (true) {
        const std::uint32_t c = mask & (~mask + 1);
        const std::uint32_t r = mask + c;
        if (r >= limit) {
            break;
        }
        mask = (((r ^ mask) >> 2) / c) | r;
        if (mask >= limit) {
            break;
        }
        const double sum = subset_sum(mask, scores);
        if (sum > best_sum ||
            (sum == best_sum && lex_less(mask, best_mask))) {
            best_sum = sum;
            best_mask = mask;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (best_mask & (1u << i)) {
            best_set.push_back(i);
        }
    }
    return best_set;
}

double kl_direct(double pi, double p) {
    if (!std::isfinite(pi) || !std::isfinite(p)) {
        throw ValidationError("kl_direct: non-finite argument");
    }
    const double a = std::clamp(pi, kKlEps, 1.0 - kKlEps);
    const double b = std::clamp(p, kKlEps, 1.0 - kKlEps);
    const double outcome_p[2] = {a, 1.0 - a};
    const double outcome_q[2] = {b, 1.0 - b};
    double sum = 0.0;
    for (int outcome = 0; outcome < 2; ++outcome) {
        sum += outcome_p[outcome] *
               (std::log(outcome_p[outcome]) - std::log(outcome_q[outcome]));
    }
    return sum;
}

ParamGradients finite_diff(const std::function<double(const SelectorParams&)>& f,
                           const SelectorParams& at, double step) {
    SelectorParams probe = at;
    ParamGradients grads = zeros_like(probe);
    auto pblocks = param_blocks(probe);
    auto gblocks = grad_blocks(grads);
    for (std::size_t b = 0; b < pblocks.size(); ++b) {
        std::vector<double>& theta = *pblocks[b].values;
        std::vector<double>& g = *gblocks[b].values;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double saved = theta[i];
            theta[i] = saved + step;
            const double hi = f(probe);
            theta[i] = saved - step;
            const double lo = f(probe);
            theta[i] = saved;
            g[i] = (hi - lo) / (2.0 * step);
        }
    }
    return grads;
}

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

cpp_int binomial(std::size_t n, std::size_t k) {
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    cpp_int result = 1;
    for (std::size_t i = 0; i < k; ++i) {
        result *= static_cast<unsigned long>(n - i);
        result /= static_cast<unsigned long>(i + 1);
    }
    return result;
}

}  // namespace

double expected_random_f1(std::size_t n, std::size_t t, std::size_t k) {
    if (t > n || k > n) {
        throw ValidationError("expected_random_f1: t and k must be <= n");
    }
    if (t == 0 || k == 0) {
        return 0.0;
    }
    const cpp_int total = binomial(n, k);
    const std::size_t lo = k > n - t ? k - (n - t) : 0;
    const std::size_t hi = std::min(t, k);
    cpp_rational expectation = 0;
    for (std::size_t x = lo; x <= hi; ++x) {
        if (x == 0) {
            continue;  // F1(0) = 0
        }
        const cpp_int ways = binomial(t, x) * binomial(n - t, k - x);
        // F1 = 2PR/(P+R) with P = x/k, R = x/t reduces to 2x/(t+k).
        const cpp_rational f1(cpp_int(2 * x), cpp_int(t + k));
        expectation += f1 * cpp_rational(ways, total);
    }
    return expectation.convert_to<double>();
}

GradCheckReport run_gradcheck(const GradCheckConfig& config) {
    GradCheckReport report;
    report.tolerance = config.tolerance;
    report.blocks.clear();

    TrainConfig cfg;
    cfg.schedule = BetaSchedule{0, 0.2, 0.1};  // both compression terms active
    cfg.cap = Cap::none();
    cfg.hidden_dim = config.hidden_dim;

    SyntheticSpec spec;
    spec.grid_rows = config.grid_rows;
    spec.grid_cols = config.grid_cols;
    spec.m_tissues = config.m_tissues;
    spec.dim = config.dim;
    spec.n_classes = config.n_classes;
    spec.noise_sigma = config.noise_sigma;
    spec.blob_count = 2;
    spec.class_signal_scale = 1.0;

    const auto boundary_ok = [](const ForwardResult& fwd) {
        const TissuePartition& part = fwd.partition;
        for (std::size_t j = 0; j < part.m_groups; ++j) {
            const std::size_t nj = part.group_sizes[j];
            if (nj == 0) {
                continue;
            }
            const double rn = fwd.selection.rates[j] * static_cast<double>(nj);
            if (std::abs(rn - std::round(rn)) < 1e-3) {
                return false;  // budget could flip under perturbation
            }
            const std::size_t kj = fwd.selection.budgets[j];
            if (kj < nj) {
                std::vector<double> group_scores;
                group_scores.reserve(nj);
                for (std::size_t i : part.group_indices[j]) {
                    group_scores.push_back(fwd.selection.scores[i]);
                }
                std::sort(group_scores.begin(), group_scores.end(),
                          std::greater<>());
                if (group_scores[kj - 1] - group_scores[kj] < 1e-6) {
                    return false;  // score tie at the selection boundary
                }
            }
        }
        return true;
    };

    for (std::size_t s = 0; s < config.seeds; ++s) {
        SyntheticInstance instance;
        SelectorParams params;
        ForwardResult fwd;
        std::uint64_t instance_seed = 0;
        for (std::size_t attempt = 0;; ++attempt) {
            instance_seed = Rng::derive_seed(config.base_seed, s * 1000 + attempt);
            spec.seed = instance_seed;
            instance = generate_synthetic(spec);
            params = init_params(config.dim, config.hidden_dim, config.n_classes,
                                 Rng::derive_seed(instance_seed, 77));
            fwd = forward(instance.bundle, instance.prompts, instance.question,
                          params, cfg, 0);
            if (boundary_ok(fwd)) {
                break;
            }
            ++report.boundary_resamples;
        }

        ParamGradients analytic = backward(instance.bundle, instance.prompts,
                                           instance.question, params, cfg, 0);
        ParamGradients numeric = finite_diff(
            [&](const SelectorParams& p) {
                return forward(instance.bundle, instance.prompts,
                               instance.question, p, cfg, 0)
                    .losses.total;
            },
            params, config.step);

        auto ablocks = grad_blocks(analytic);
        auto nblocks = grad_blocks(numeric);
        if (report.blocks.empty()) {
            for (const BlockView& block : ablocks) {
                report.blocks.push_back({block.name, 0.0, 0, 0});
            }
        }
        for (std::size_t b = 0; b < ablocks.size(); ++b) {
            const std::vector<double>& ga = *ablocks[b].values;
            const std::vector<double>& gn = *nblocks[b].values;
            for (std::size_t i = 0; i < ga.size(); ++i) {
                const double scale = std::max(
                    {std::abs(ga[i]), std::abs(gn[i]), 1e-6});
                const double rel = std::abs(ga[i] - gn[i]) / scale;
                if (rel > report.blocks[b].max_rel_err) {
                    report.blocks[b].max_rel_err = rel;
                    report.blocks[b].worst_index = i;
                    report.blocks[b].worst_seed = instance_seed;
                }
            }
        }
    }

    for (const GradCheckBlock& block : report.blocks) {
        if (block.max_rel_err > report.max_rel_err) {
            report.max_rel_err = block.max_rel_err;
            report.worst_block = block.name;
            report.worst_index = block.worst_index;
            report.worst_seed = block.worst_seed;
        }
    }
    report.passed = report.max_rel_err <= report.tolerance;
    return report;
}

std::string gradcheck_report_json(const GradCheckReport& report) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const GradCheckBlock& block : report.blocks) {
        blocks.push_back({{"name", block.name},
                          {"max_rel_err", block.max_rel_err},
                          {"worst_index", block.worst_index},
                          {"worst_seed", block.worst_seed}});
    }
    nlohmann::json doc{
        {"passed", report.passed},
        {"tolerance", report.tolerance},
        {"max_rel_err", report.max_rel_err},
        {"worst_block", report.worst_block},
        {"worst_index", report.worst_index},
        {"worst_seed", report.worst_seed},
        {"boundary_resamples", report.boundary_resamples},
        {"blocks", std::move(blocks)},
    };
    return doc.dump(2) + "\n";
}

}  // namespace histoselect::oracle
