// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "histoselect/baselines.hpp"
#include "histoselect/cli.hpp"
#include "histoselect/image_io.hpp"
#include "histoselect/io_util.hpp"
#include "histoselect/oracle.hpp"
#include "histoselect/rng.hpp"
#include "histoselect/training.hpp"

using namespace histoselect;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) {
        ++g_failures;
    }
}

std::string fmt(double v) { return fmt_double(v); }

// ---------------------------------------------------------------------------

void criterion_1_kl_grid() {
    const auto start = Clock::now();
    double worst = 0.0;
    bool identity_ok = true;
    for (int a = 1; a <= 99; ++a) {
        for (int b = 1; b <= 99; ++b) {
            const double pi = a / 100.0;
            const double p = b / 100.0;
            worst = std::max(worst,
                             std::abs(bernoulli_kl(pi, p) - oracle::kl_direct(pi, p)));
        }
        identity_ok = identity_ok && bernoulli_kl(a / 100.0, a / 100.0) == 0.0;
    }
    const double elapsed = seconds_since(start);
    report(1, worst <= 1e-12 && identity_ok && elapsed < 1.0,
           "KL vs oracle on the 99x99 grid: max |diff| " + fmt(worst) +
               ", KL(x,x)==0 " + (identity_ok ? "exact" : "VIOLATED") + ", " +
               fmt(elapsed) + " s");
}

void criterion_2_selection_oracle() {
    const auto start = Clock::now();
    Rng rng(555);
    std::size_t mismatches = 0;
    const std::size_t instances = 1000;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const std::size_t m = 1 + rng.next_below(5);
        std::vector<std::size_t> labels;
        for (std::size_t j = 0; j < m && labels.size() < 64; ++j) {
            const std::size_t nj =
                std::min<std::size_t>(1 + rng.next_below(20), 64 - labels.size());
            labels.insert(labels.end(), nj, j);
        }
        for (std::size_t i = labels.size(); i > 1; --i) {
            std::swap(labels[i - 1], labels[rng.next_below(i)]);
        }
        const std::size_t n = labels.size();

        TissuePartition part;
        part.m_groups = m;
        part.dim = 1;
        part.labels = labels;
        part.group_indices.resize(m);
        part.group_sizes.assign(m, 0);
        part.prototypes.assign(m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            part.group_indices[labels[i]].push_back(i);
            ++part.group_sizes[labels[i]];
        }

        std::vector<double> scores(n);
        const bool all_ties = inst % 25 == 0;  // engineered tie instances
        const bool coarse = inst % 7 == 0;     // frequent partial ties
        for (double& s : scores) {
            s = all_ties ? 0.5
                         : (coarse ? 0.2 * static_cast<double>(rng.next_below(5))
                                   : rng.next_double());
        }
        std::vector<std::size_t> budgets(m, 0);
        for (std::size_t j = 0; j < m; ++j) {
            if (part.group_sizes[j] > 0) {
                budgets[j] = 1 + rng.next_below(part.group_sizes[j]);
            }
        }
        const SelectionResult got = select(part, scores, budgets, std::nullopt);
        std::vector<std::size_t> expected;
        for (std::size_t j = 0; j < m; ++j) {
            if (part.group_sizes[j] == 0) {
                continue;
            }
            std::vector<double> group_scores;
            group_scores.reserve(part.group_sizes[j]);
            for (std::size_t i : part.group_indices[j]) {
                group_scores.push_back(scores[i]);
            }
            for (std::size_t pos : oracle::exhaustive_topk(group_scores, budgets[j])) {
                expected.push_back(part.group_indices[j][pos]);
            }
        }
        std::sort(expected.begin(), expected.end());
        mismatches += got.selected == expected ? 0 : 1;
    }
    const double elapsed = seconds_since(start);
    report(2, mismatches == 0 && elapsed < 30.0,
           "select vs exhaustive oracle on " + std::to_string(instances) +
               " instances: " + std::to_string(mismatches) + " mismatches, " +
               fmt(elapsed) + " s");
}

void criterion_3_budget_law() {
    Rng rng(808);
    std::size_t violations = 0;
    for (std::size_t draw = 0; draw < 10000; ++draw) {
        const double r = std::nextafter(rng.next_double(), 1.0);  // (0,1)
        const std::size_t nj = 1 + rng.next_below(1000);
        const std::size_t k = group_budgets({r}, {nj})[0];
        const auto expected = static_cast<std::size_t>(
            std::ceil(r * static_cast<double>(nj)));
        if (k != expected || k < 1 || k > nj) {
            ++violations;
        }
    }
    const bool empty_ok = group_budgets({0.5}, {0})[0] == 0;
    report(3, violations == 0 && empty_ok,
           "budget law over 10^4 draws: " + std::to_string(violations) +
               " violations, empty-group budget " +
               (empty_ok ? "0" : "WRONG"));
}

void criterion_4_gradcheck() {
    const auto start = Clock::now();
    oracle::GradCheckConfig config;  // 20 seeds, N=32, d=8, M=3, h=4, C=4
    const oracle::GradCheckReport rep = oracle::run_gradcheck(config);
    const double elapsed = seconds_since(start);
    report(4, rep.passed && elapsed < 120.0,
           "STE gradient vs finite differences over " +
               std::to_string(config.seeds) + " seeds: max rel err " +
               fmt(rep.max_rel_err) + " (tol 1e-4, worst block " +
               rep.worst_block + ", " + std::to_string(rep.boundary_resamples) +
               " boundary resamples), " + fmt(elapsed) + " s");
}

SyntheticSpec retrieval_spec(double noise, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.grid_rows = 10;
    spec.grid_cols = 10;  // N = 100
    spec.m_tissues = 4;
    spec.dim = 16;
    spec.n_classes = 4;
    spec.noise_sigma = noise;
    spec.blob_count = 2;
    spec.class_signal_scale = 0.5;
    spec.seed = seed;
    return spec;
}

void criterion_5_planted_retrieval() {
    const auto start = Clock::now();

    // Noiseless: similarity is exact, random matches its expectation.
    const SyntheticInstance clean = generate_synthetic(retrieval_spec(0.0, 1001));
    std::size_t t_relevant = 0;
    for (bool r : clean.truth.relevant_mask) {
        t_relevant += r ? 1 : 0;
    }
    const auto sim_clean =
        similarity_select(clean.bundle, clean.question, t_relevant);
    const double sim_clean_f1 =
        retrieval_f1(sim_clean, clean.truth.relevant_mask).f1;

    const std::size_t trials = 100000;
    double random_mean = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const auto picked =
            random_select(100, t_relevant, Rng::derive_seed(2002, trial));
        random_mean += retrieval_f1(picked, clean.truth.relevant_mask).f1;
    }
    random_mean /= static_cast<double>(trials);
    const double exact_clean = oracle::expected_random_f1(100, t_relevant, t_relevant);

    // Noise 0.3 over 100 seeds.
    double sim_noisy_mean = 0.0;
    double random_noisy_mean = 0.0;
    double expected_noisy_mean = 0.0;
    const std::size_t noisy_seeds = 100;
    const std::size_t noisy_trials = 200;
    for (std::uint64_t seed = 0; seed < noisy_seeds; ++seed) {
        const SyntheticInstance inst =
            generate_synthetic(retrieval_spec(0.3, 3000 + seed));
        std::size_t t = 0;
        for (bool r : inst.truth.relevant_mask) {
            t += r ? 1 : 0;
        }
        const auto sim = similarity_select(inst.bundle, inst.question, t);
        sim_noisy_mean += retrieval_f1(sim, inst.truth.relevant_mask).f1;
        expected_noisy_mean += oracle::expected_random_f1(100, t, t);
        double acc = 0.0;
        for (std::size_t trial = 0; trial < noisy_trials; ++trial) {
            const auto picked = random_select(
                100, t, Rng::derive_seed(4000 + seed, trial));
            acc += retrieval_f1(picked, inst.truth.relevant_mask).f1;
        }
        random_noisy_mean += acc / static_cast<double>(noisy_trials);
    }
    sim_noisy_mean /= static_cast<double>(noisy_seeds);
    random_noisy_mean /= static_cast<double>(noisy_seeds);
    expected_noisy_mean /= static_cast<double>(noisy_seeds);

    const double elapsed = seconds_since(start);
    const bool ok = sim_clean_f1 == 1.0 &&
                    std::abs(random_mean - exact_clean) <= 0.01 &&
                    sim_noisy_mean >= 0.9 &&
                    std::abs(random_noisy_mean - expected_noisy_mean) <= 0.02 &&
                    elapsed < 120.0;
    report(5, ok,
           "planted retrieval: clean similarity F1 " + fmt(sim_clean_f1) +
               ", random mean " + fmt(random_mean) + " vs exact " +
               fmt(exact_clean) + "; noisy similarity mean F1 " +
               fmt(sim_noisy_mean) + ", noisy random " + fmt(random_noisy_mean) +
               " vs exact " + fmt(expected_noisy_mean) + ", " + fmt(elapsed) + " s");
}

SyntheticSpec training_suite_spec() {
    SyntheticSpec spec;
    spec.grid_rows = 16;
    spec.grid_cols = 16;  // N = 256
    spec.m_tissues = 4;
    spec.dim = 16;
    spec.n_classes = 4;
    spec.noise_sigma = 0.3;
    spec.blob_count = 3;
    spec.class_signal_scale = 0.15;
    spec.seed = 20260810;
    return spec;
}

struct TrainingOutcome {
    SelectorParams params;
    std::vector<std::pair<std::size_t, LossBreakdown>> history;
    Dataset suite;
    double learned_acc_03 = 0.0;
    double random_acc_03 = 0.0;
    double learned_acc_01 = 0.0;
    double learned_acc_10 = 0.0;
    bool rates_ordered = false;
    double mean_relevant_rate = 0.0;
    double worst_irrelevant_rate = 0.0;
};

TrainingOutcome run_training_suite() {
    TrainingOutcome out;
    out.suite = generate_dataset(training_suite_spec(), 200);

    TrainConfig cfg;
    cfg.iters = 2000;
    cfg.learning_rate = 1e-3;
    cfg.optimizer = Optimizer::adam;
    cfg.schedule = BetaSchedule{};  // default warmup 5000 to (0.2, 0.1)
    cfg.cap = Cap::fraction(0.3);
    cfg.seed = 7;
    cfg.hidden_dim = 32;
    cfg.strategy = SelectionStrategy::learned;

    const TrainResult learned = train(out.suite, cfg);
    out.params = learned.params;
    out.history = learned.history;

    TrainConfig random_cfg = cfg;
    random_cfg.strategy = SelectionStrategy::random;
    const TrainResult random_model = train(out.suite, random_cfg);

    TrainConfig eval = cfg;
    eval.cap = Cap::fraction(0.3);
    out.learned_acc_03 = evaluate_accuracy(out.suite, learned.params, eval, 99);
    eval.cap = Cap::fraction(0.1);
    out.learned_acc_01 = evaluate_accuracy(out.suite, learned.params, eval, 99);
    eval.cap = Cap::fraction(1.0);
    out.learned_acc_10 = evaluate_accuracy(out.suite, learned.params, eval, 99);

    TrainConfig random_eval = random_cfg;
    random_eval.cap = Cap::fraction(0.3);
    out.random_acc_03 =
        evaluate_accuracy(out.suite, random_model.params, random_eval, 99);

    // Mean learned rate of the question-relevant group vs every other group.
    std::vector<double> rate_sum(4, 0.0);
    std::vector<std::size_t> rate_count(4, 0);
    double relevant_sum = 0.0;
    std::size_t relevant_count = 0;
    for (const SlideCase& slide : out.suite.slides) {
        const TissuePartition part = segment(slide.bundle, out.suite.prompts);
        const std::vector<double> rates =
            group_rates(part, slide.question, learned.params);
        for (std::size_t j = 0; j < rates.size(); ++j) {
            if (!part.group_valid(j)) {
                continue;
            }
            if (j == slide.truth.target_tissue) {
                relevant_sum += rates[j];
                ++relevant_count;
            } else {
                rate_sum[j] += rates[j];
                ++rate_count[j];
            }
        }
    }
    out.mean_relevant_rate = relevant_sum / static_cast<double>(relevant_count);
    out.rates_ordered = true;
    out.worst_irrelevant_rate = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        if (rate_count[j] == 0) {
            continue;
        }
        const double mean_j = rate_sum[j] / static_cast<double>(rate_count[j]);
        out.worst_irrelevant_rate = std::max(out.worst_irrelevant_rate, mean_j);
        out.rates_ordered = out.rates_ordered && out.mean_relevant_rate > mean_j;
    }
    return out;
}

void criterion_6_and_7_training(TrainingOutcome& out) {
    const auto start = Clock::now();
    out = run_training_suite();
    const double elapsed = seconds_since(start);

    const bool gap_ok = out.learned_acc_03 >= out.random_acc_03 + 0.10;
    report(6, gap_ok && out.rates_ordered && elapsed < 300.0,
           "training efficacy: learned acc@0.3 " + fmt(out.learned_acc_03) +
               " vs random " + fmt(out.random_acc_03) + " (gap " +
               fmt(out.learned_acc_03 - out.random_acc_03) +
               "), relevant-group mean rate " + fmt(out.mean_relevant_rate) +
               " vs worst irrelevant " + fmt(out.worst_irrelevant_rate) + ", " +
               fmt(elapsed) + " s");

    const bool trend_ok = out.learned_acc_03 >= out.learned_acc_01 &&
                          out.learned_acc_03 >= out.learned_acc_10 - 0.02;
    report(7, trend_ok,
           "budget trend: acc@0.1 " + fmt(out.learned_acc_01) + ", acc@0.3 " +
               fmt(out.learned_acc_03) + ", acc@1.0 " + fmt(out.learned_acc_10));
}

void criterion_8_beta_and_history(const TrainingOutcome& out) {
    const BetaSchedule sched;
    bool beta_ok = beta_at(0, sched) == std::pair{0.0, 0.0};
    beta_ok = beta_ok && beta_at(1, sched) == std::pair{0.2 * (1.0 / 5000.0),
                                                        0.1 * (1.0 / 5000.0)};
    beta_ok = beta_ok && beta_at(2500, sched) == std::pair{0.1, 0.05};
    beta_ok = beta_ok && beta_at(5000, sched) == std::pair{0.2, 0.1};
    beta_ok = beta_ok && beta_at(1000000, sched) == std::pair{0.2, 0.1};

    // Every logged iteration reconstructs total bit-exactly from the CSV row.
    const std::string csv = history_csv(out.history);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    bool reconstruct_ok = true;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        std::size_t iter = 0;
        double v[6];
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf", &iter, &v[0],
                        &v[1], &v[2], &v[3], &v[4], &v[5]) != 7) {
            reconstruct_ok = false;
            break;
        }
        const double rebuilt = v[0] + v[3] * v[1] + v[4] * v[2];
        reconstruct_ok = reconstruct_ok && rebuilt == v[5] &&
                         out.history[rows].second.total == v[5];
        ++rows;
    }
    reconstruct_ok = reconstruct_ok && rows == out.history.size();
    report(8, beta_ok && reconstruct_ok,
           std::string("beta schedule exact at {0,1,2500,5000,1e6}: ") +
               (beta_ok ? "yes" : "NO") + "; history totals reconstruct over " +
               std::to_string(rows) + " rows: " +
               (reconstruct_ok ? "bit-exact" : "MISMATCH"));
}

void criterion_9_determinism_and_formats() {
    const fs::path root = fs::temp_directory_path() / "histoselect_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    SyntheticSpec spec;
    spec.grid_rows = 8;
    spec.grid_cols = 8;
    spec.m_tissues = 4;
    spec.dim = 10;
    spec.n_classes = 2;
    spec.noise_sigma = 0.2;
    spec.blob_count = 2;
    spec.seed = 77;
    const fs::path spec_path = root / "spec.json";
    write_file_bytes(spec_path, synthetic_spec_to_json(spec));

    bool ok = true;
    std::string detail;

    const auto run_twice_identical = [&](const std::vector<std::string>& args_a,
                                         const std::vector<std::string>& args_b,
                                         const fs::path& dir_a,
                                         const fs::path& dir_b,
                                         const char* what) {
        if (cli::run(args_a) != 0 || cli::run(args_b) != 0) {
            ok = false;
            detail += std::string(what) + " failed to run; ";
            return;
        }
        for (const auto& entry : fs::directory_iterator(dir_a)) {
            const fs::path twin = dir_b / entry.path().filename();
            if (!fs::exists(twin) ||
                read_file_bytes(entry.path()) != read_file_bytes(twin)) {
                ok = false;
                detail += std::string(what) + " not byte-identical (" +
                          entry.path().filename().string() + "); ";
            }
        }
    };

    const fs::path g1 = root / "g1", g2 = root / "g2";
    run_twice_identical(
        {"gen", "--spec", spec_path.string(), "--out", g1.string()},
        {"gen", "--spec", spec_path.string(), "--out", g2.string()}, g1, g2,
        "gen");

    const fs::path s1 = root / "s1", s2 = root / "s2";
    run_twice_identical({"segment", "--bundle", (g1 / "slide_0000.hsb").string(),
                         "--prompts", (g1 / "prompts.hsb").string(), "--out",
                         s1.string()},
                        {"segment", "--bundle", (g1 / "slide_0000.hsb").string(),
                         "--prompts", (g1 / "prompts.hsb").string(), "--out",
                         s2.string()},
                        s1, s2, "segment");

    const fs::path t1 = root / "t1", t2 = root / "t2";
    run_twice_identical(
        {"train", "--data", g1.string(), "--out", t1.string(), "--iters", "20",
         "--hidden", "6", "--seed", "3"},
        {"train", "--data", g1.string(), "--out", t2.string(), "--iters", "20",
         "--hidden", "6", "--seed", "3"},
        t1, t2, "train");

    const fs::path x1 = root / "x1", x2 = root / "x2";
    run_twice_identical(
        {"select", "--bundle", (g1 / "slide_0000.hsb").string(), "--prompts",
         (g1 / "prompts.hsb").string(), "--question",
         (g1 / "question_0000.hsb").string(), "--params",
         (t1 / "params.json").string(), "--budget", "0.3", "--out", x1.string()},
        {"select", "--bundle", (g1 / "slide_0000.hsb").string(), "--prompts",
         (g1 / "prompts.hsb").string(), "--question",
         (g1 / "question_0000.hsb").string(), "--params",
         (t1 / "params.json").string(), "--budget", "0.3", "--out", x2.string()},
        x1, x2, "select");

    const fs::path b1 = root / "b1", b2 = root / "b2";
    run_twice_identical(
        {"bench", "--data", g1.string(), "--strategies", "random,similarity",
         "--budgets", "0.3", "--trials", "64", "--seed", "5", "--out",
         b1.string()},
        {"bench", "--data", g1.string(), "--strategies", "random,similarity",
         "--budgets", "0.3", "--trials", "64", "--seed", "5", "--out",
         b2.string()},
        b1, b2, "bench");

    const fs::path h1 = root / "h1", h2 = root / "h2";
    run_twice_identical({"heatmap", "--bundle", (g1 / "slide_0000.hsb").string(),
                         "--question", (g1 / "question_0000.hsb").string(),
                         "--out", h1.string()},
                        {"heatmap", "--bundle", (g1 / "slide_0000.hsb").string(),
                         "--question", (g1 / "question_0000.hsb").string(),
                         "--out", h2.string()},
                        h1, h2, "heatmap");

    const fs::path r1 = root / "r1", r2 = root / "r2";
    run_twice_identical(
        {"rates", "--data", g1.string(), "--params", (t1 / "params.json").string(),
         "--out", r1.string()},
        {"rates", "--data", g1.string(), "--params", (t1 / "params.json").string(),
         "--out", r2.string()},
        r1, r2, "rates");

    const fs::path gc1 = root / "gc1", gc2 = root / "gc2";
    run_twice_identical({"gradcheck", "--seeds", "2", "--out", gc1.string()},
                        {"gradcheck", "--seeds", "2", "--out", gc2.string()},
                        gc1, gc2, "gradcheck");

    // HSB1 bit-exact round trip.
    const EmbeddingBundle bundle = load_bundle(g1 / "slide_0000.hsb");
    const fs::path resaved = root / "resaved.hsb";
    save_bundle(bundle, resaved);
    if (read_file_bytes(g1 / "slide_0000.hsb") != read_file_bytes(resaved)) {
        ok = false;
        detail += "HSB1 round trip not bit-exact; ";
    }

    // Golden images.
    const fs::path golden(HISTOSELECT_GOLDEN_DIR);
    if (cli::run({"heatmap", "--bundle", (g1 / "slide_0000.hsb").string(),
                  "--question", (g1 / "question_0000.hsb").string(), "--out",
                  (root / "gold").string()}) != 0 ||
        read_file_bytes(root / "gold" / "heatmap.pgm") !=
            read_file_bytes(golden / "heatmap.pgm") ||
        read_file_bytes(s1 / "mask.ppm") != read_file_bytes(golden / "mask.ppm")) {
        ok = false;
        detail += "golden PGM/PPM mismatch; ";
    }

    report(9, ok,
           ok ? "all subcommands byte-identical on rerun; HSB1 round trip "
                "bit-exact; golden PGM/PPM match"
              : detail);
}

}  // namespace

int main() {
    std::printf("HistoSelect acceptance suite\n");
    criterion_1_kl_grid();
    criterion_2_selection_oracle();
    criterion_3_budget_law();
    criterion_4_gradcheck();
    criterion_5_planted_retrieval();
    TrainingOutcome outcome;
    criterion_6_and_7_training(outcome);
    criterion_8_beta_and_history(outcome);
    criterion_9_determinism_and_formats();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
