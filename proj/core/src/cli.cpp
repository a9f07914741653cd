// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "histoselect/baselines.hpp"
#include "histoselect/error.hpp"
#include "histoselect/image_io.hpp"
#include "histoselect/io_util.hpp"
#include "histoselect/oracle.hpp"
#include "histoselect/rng.hpp"
#include "histoselect/training.hpp"

namespace fs = std::filesystem;

namespace histoselect::cli {

namespace {

std::size_t worker_count() {
    const char* env = std::getenv("HSEL_THREADS");
    std::size_t workers = 0;
    if (env != nullptr) {
        workers = static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
    }
    if (workers == 0) {
        workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
    return workers;
}

// Runs fn(i) for i in [0, count) across workers; fn must only write to
// per-index slots so the merged result is order-independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(1, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

std::string slide_tag(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", index);
    return buf;
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

GroundTruth load_truth(const fs::path& csv_path, const fs::path& json_path) {
    GroundTruth truth;
    const std::string csv = read_file_bytes(csv_path);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        if (line.empty()) {
            continue;
        }
        const std::size_t last_comma = line.rfind(',');
        if (last_comma == std::string::npos) {
            throw FormatError(csv_path.string() + ": malformed row '" + line + "'");
        }
        truth.true_labels.push_back(
            static_cast<std::size_t>(std::stoull(line.substr(last_comma + 1))));
    }
    nlohmann::json meta = nlohmann::json::parse(read_file_bytes(json_path));
    truth.target_tissue = meta.at("target_tissue").get<std::size_t>();
    truth.answer_label = meta.at("answer_label").get<std::size_t>();
    truth.relevant_mask.resize(truth.true_labels.size());
    for (std::size_t i = 0; i < truth.true_labels.size(); ++i) {
        truth.relevant_mask[i] = truth.true_labels[i] == truth.target_tissue;
    }
    return truth;
}

// gen output layout: prompts.hsb, slide_NNNN.hsb, question_NNNN.hsb,
// truth_NNNN.csv, truth_NNNN.json.
Dataset load_dataset_dir(const fs::path& dir, bool need_truth) {
    Dataset ds;
    ds.prompts = load_prompts(dir / "prompts.hsb");
    std::vector<fs::path> slide_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("slide_") && name.ends_with(".hsb")) {
            slide_files.push_back(entry.path());
        }
    }
    std::sort(slide_files.begin(), slide_files.end());
    if (slide_files.empty()) {
        throw ValidationError("no slide_*.hsb files under " + dir.string());
    }
    for (const fs::path& slide_path : slide_files) {
        std::string tag = slide_path.filename().string();
        tag = tag.substr(6, tag.size() - 6 - 4);  // strip slide_ / .hsb
        SlideCase slide;
        slide.bundle = load_bundle(slide_path);
        slide.question = load_question(dir / ("question_" + tag + ".hsb"));
        const fs::path truth_csv = dir / ("truth_" + tag + ".csv");
        const fs::path truth_json = dir / ("truth_" + tag + ".json");
        if (fs::exists(truth_csv) && fs::exists(truth_json)) {
            slide.truth = load_truth(truth_csv, truth_json);
        } else if (need_truth) {
            throw ValidationError("missing ground truth for slide " + tag +
                                  " under " + dir.string());
        }
        ds.slides.push_back(std::move(slide));
    }
    return ds;
}

SelectorParams zero_params(std::size_t dim, std::size_t n_classes) {
    SelectorParams params = init_params(dim, 1, n_classes, 0);
    for (BlockView block : param_blocks(params)) {
        std::fill(block.values->begin(), block.values->end(), 0.0);
    }
    return params;
}

Cap make_cap(double budget, bool absolute, bool has_budget) {
    if (!has_budget) {
        return Cap::none();
    }
    if (absolute) {
        if (budget < 0.0 || budget != std::floor(budget)) {
            throw ValidationError("--budget with --absolute must be a whole count");
        }
        return Cap::absolute(static_cast<std::size_t>(budget));
    }
    return Cap::fraction(budget);
}

// ---- subcommand bodies -----------------------------------------------------

int cmd_gen(const std::string& spec_path, const std::string& out,
            std::size_t count) {
    const SyntheticSpec spec = parse_synthetic_spec_json(read_file_bytes(spec_path));
    const fs::path dir = ensure_out_dir(out);
    const Dataset ds = generate_dataset(spec, count);
    save_prompts(ds.prompts, dir / "prompts.hsb");
    write_file_bytes(dir / "spec.json", synthetic_spec_to_json(spec));
    for (std::size_t i = 0; i < ds.slides.size(); ++i) {
        const SlideCase& slide = ds.slides[i];
        const std::string tag = slide_tag(i);
        save_bundle(slide.bundle, dir / ("slide_" + tag + ".hsb"));
        save_question(slide.question, dir / ("question_" + tag + ".hsb"));
        write_labels_csv(dir / ("truth_" + tag + ".csv"), slide.bundle,
                         slide.truth.true_labels);
        std::size_t n_relevant = 0;
        for (bool r : slide.truth.relevant_mask) {
            n_relevant += r ? 1 : 0;
        }
        nlohmann::json meta{
            {"slide_id", slide.bundle.slide_id},
            {"target_tissue", slide.truth.target_tissue},
            {"answer_label", slide.truth.answer_label},
            {"n_relevant", n_relevant},
        };
        write_file_bytes(dir / ("truth_" + tag + ".json"), meta.dump(2) + "\n");
    }
    std::cout << "wrote " << count << " slide(s) to " << dir.string() << "\n";
    return 0;
}

int cmd_segment(const std::string& bundle_path, const std::string& prompts_path,
                const std::string& out) {
    const EmbeddingBundle bundle = load_bundle(bundle_path);
    const PromptBank prompts = load_prompts(prompts_path);
    const TissuePartition part = segment(bundle, prompts);
    const fs::path dir = ensure_out_dir(out);
    write_labels_csv(dir / "labels.csv", bundle, part.labels);
    write_ppm(dir / "mask.ppm", render_label_mask(bundle, part.labels));
    std::cout << "wrote labels.csv and mask.ppm to " << dir.string() << "\n";
    return 0;
}

int cmd_select(const std::string& bundle_path, const std::string& prompts_path,
               const std::string& question_path, const std::string& params_path,
               double budget, bool absolute, bool has_budget,
               const std::string& out) {
    const EmbeddingBundle bundle = load_bundle(bundle_path);
    const PromptBank prompts = load_prompts(prompts_path);
    const QuestionRecord question = load_question(question_path);
    const SelectorParams params =
        params_path.empty() ? zero_params(bundle.dim, question.n_classes)
                            : load_params_json(params_path);
    const Cap cap = make_cap(budget, absolute, has_budget);
    const TissuePartition part = segment(bundle, prompts);
    const SelectionResult result =
        run_selection(part, bundle, question, params, cap.resolve(bundle.n_patches));
    const fs::path dir = ensure_out_dir(out);
    write_file_bytes(dir / "selection.json",
                     selection_to_json(result, part, bundle.slide_id));
    const std::vector<bool> all(bundle.n_patches, true);
    write_pgm(dir / "selection_before.pgm", render_selection_mask(bundle, all));
    write_pgm(dir / "selection_after.pgm",
              render_selection_mask(bundle, result.hard_mask));
    std::cout << "selected " << result.selected.size() << " of "
              << bundle.n_patches << " patches\n";
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out,
              const TrainConfig& cfg) {
    const Dataset ds = load_dataset_dir(data_dir, false);
    const TrainResult result = train(ds, cfg);
    const fs::path dir = ensure_out_dir(out);
    save_params_json(dir / "params.json", result.params, cfg.seed);
    write_file_bytes(dir / "history.csv", history_csv(result.history));
    std::cout << "trained " << cfg.iters << " iteration(s); params.json and "
              << "history.csv written to " << dir.string() << "\n";
    return 0;
}

int cmd_bench(const std::string& data_dir, const std::vector<std::string>& strategies,
              const std::vector<double>& budgets, std::size_t trials,
              std::uint64_t seed, const std::string& params_path,
              const std::string& out) {
    const Dataset ds = load_dataset_dir(data_dir, true);
    SelectorParams params;
    bool have_params = false;
    if (!params_path.empty()) {
        params = load_params_json(params_path);
        have_params = true;
    }
    std::string csv = "strategy,budget_fraction,trial_seed,precision,recall,f1\n";
    for (const std::string& strategy_text : strategies) {
        const StrategyId strategy = parse_strategy(strategy_text);
        if (strategy == StrategyId::learned && !have_params) {
            throw ValidationError("bench: the learned strategy needs --params");
        }
        for (double budget : budgets) {
            if (!(budget > 0.0) || budget > 1.0) {
                throw ValidationError("bench: budget fractions must lie in (0, 1]");
            }
            const auto slide_k = [&](const SlideCase& slide) {
                return static_cast<std::size_t>(std::ceil(
                    budget * static_cast<double>(slide.bundle.n_patches)));
            };
            const auto mean_score = [&](auto&& select_fn) {
                RetrievalScore mean;
                for (const SlideCase& slide : ds.slides) {
                    const std::vector<std::size_t> picked = select_fn(slide);
                    const RetrievalScore s =
                        retrieval_f1(picked, slide.truth.relevant_mask);
                    mean.precision += s.precision;
                    mean.recall += s.recall;
                    mean.f1 += s.f1;
                }
                const double z = static_cast<double>(ds.slides.size());
                mean.precision /= z;
                mean.recall /= z;
                mean.f1 /= z;
                return mean;
            };
            const auto emit = [&](std::uint64_t trial_seed, const RetrievalScore& s) {
                csv += strategy_name(strategy);
                csv += ',';
                csv += fmt_double(budget);
                csv += ',';
                csv += std::to_string(trial_seed);
                csv += ',';
                csv += fmt_double(s.precision);
                csv += ',';
                csv += fmt_double(s.recall);
                csv += ',';
                csv += fmt_double(s.f1);
                csv += '\n';
            };
            if (strategy == StrategyId::random) {
                std::vector<RetrievalScore> scores(trials);
                std::vector<std::uint64_t> seeds(trials);
                parallel_for(trials, [&](std::size_t t) {
                    seeds[t] = Rng::derive_seed(seed, t);
                    scores[t] = RetrievalScore{};
                    double p = 0.0, r = 0.0, f = 0.0;
                    for (std::size_t s_idx = 0; s_idx < ds.slides.size(); ++s_idx) {
                        const SlideCase& slide = ds.slides[s_idx];
                        const auto picked = random_select(
                            slide.bundle.n_patches, slide_k(slide),
                            Rng::derive_seed(seeds[t], s_idx));
                        const RetrievalScore sc =
                            retrieval_f1(picked, slide.truth.relevant_mask);
                        p += sc.precision;
                        r += sc.recall;
                        f += sc.f1;
                    }
                    const double z = static_cast<double>(ds.slides.size());
                    scores[t] = {p / z, r / z, f / z};
                });
                for (std::size_t t = 0; t < trials; ++t) {
                    emit(seeds[t], scores[t]);
                }
            } else if (strategy == StrategyId::diversity) {
                emit(seed, mean_score([&](const SlideCase& slide) {
                         return diversity_select(slide.bundle, slide_k(slide));
                     }));
            } else if (strategy == StrategyId::similarity) {
                emit(seed, mean_score([&](const SlideCase& slide) {
                         return similarity_select(slide.bundle, slide.question,
                                                  slide_k(slide));
                     }));
            } else {
                emit(seed, mean_score([&](const SlideCase& slide) {
                         const TissuePartition part =
                             segment(slide.bundle, ds.prompts);
                         return run_selection(part, slide.bundle, slide.question,
                                              params, slide_k(slide))
                             .selected;
                     }));
            }
        }
    }
    const fs::path dir = ensure_out_dir(out);
    write_file_bytes(dir / "bench.csv", csv);
    std::cout << "wrote bench.csv to " << dir.string() << "\n";
    return 0;
}

int cmd_gradcheck(const oracle::GradCheckConfig& config, const std::string& out) {
    const oracle::GradCheckReport report = oracle::run_gradcheck(config);
    const std::string json = oracle::gradcheck_report_json(report);
    if (!out.empty()) {
        const fs::path dir = ensure_out_dir(out);
        write_file_bytes(dir / "gradcheck.json", json);
    }
    std::cout << json;
    return report.passed ? 0 : 1;
}

int cmd_heatmap(const std::string& bundle_path, const std::string& question_path,
                const std::string& out) {
    const EmbeddingBundle bundle = load_bundle(bundle_path);
    const QuestionRecord question = load_question(question_path);
    const std::vector<double> heat = relevance_heatmap(bundle, question);
    const fs::path dir = ensure_out_dir(out);
    write_pgm(dir / "heatmap.pgm", render_heatmap(bundle, heat));
    std::cout << "wrote heatmap.pgm to " << dir.string() << "\n";
    return 0;
}

int cmd_rates(const std::string& data_dir, const std::string& params_path,
              const std::string& out) {
    const Dataset ds = load_dataset_dir(data_dir, false);
    const SelectorParams params = load_params_json(params_path);
    std::string csv = "slide_id";
    for (std::size_t j = 0; j < ds.prompts.m_prompts; ++j) {
        csv += ",rate_" + std::to_string(j);
    }
    csv += '\n';
    for (const SlideCase& slide : ds.slides) {
        const TissuePartition part = segment(slide.bundle, ds.prompts);
        const std::vector<double> rates =
            group_rates(part, slide.question, params);
        csv += slide.bundle.slide_id;
        for (std::size_t j = 0; j < rates.size(); ++j) {
            csv += ',';
            if (part.group_valid(j)) {
                csv += fmt_double(rates[j]);
            }
        }
        csv += '\n';
    }
    const fs::path dir = ensure_out_dir(out);
    write_file_bytes(dir / "rates.csv", csv);
    std::cout << "wrote rates.csv to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"HistoSelect: question-guided, tissue-aware patch selection "
                 "over slide embedding bundles"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate synthetic slides from a spec JSON");
    std::string gen_spec, gen_out;
    std::size_t gen_count = 1;
    gen->add_option("--spec", gen_spec, "SyntheticSpec JSON file")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of slides");

    // segment
    auto* seg = app.add_subcommand("segment", "tissue segmentation for one slide");
    std::string seg_bundle, seg_prompts, seg_out;
    seg->add_option("--bundle", seg_bundle, "slide HSB1 file")->required();
    seg->add_option("--prompts", seg_prompts, "prompt bank HSB1 file")->required();
    seg->add_option("--out", seg_out, "output directory")->required();

    // select
    auto* sel = app.add_subcommand("select", "hierarchical selection for one slide");
    std::string sel_bundle, sel_prompts, sel_question, sel_params, sel_out;
    double sel_budget = 0.0;
    bool sel_absolute = false;
    sel->add_option("--bundle", sel_bundle)->required();
    sel->add_option("--prompts", sel_prompts)->required();
    sel->add_option("--question", sel_question)->required();
    sel->add_option("--params", sel_params, "trained params JSON (zeros if absent)");
    auto* sel_budget_opt =
        sel->add_option("--budget", sel_budget, "token cap, fraction of N");
    sel->add_flag("--absolute", sel_absolute, "treat --budget as a raw count");
    sel->add_option("--out", sel_out)->required();

    // train
    auto* tr = app.add_subcommand("train", "train selectors and proxy head");
    std::string tr_data, tr_out, tr_optimizer = "adam", tr_strategy = "learned";
    TrainConfig tr_cfg;
    double tr_budget = 0.0;
    bool tr_absolute = false;
    tr->add_option("--data", tr_data, "directory produced by gen")->required();
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--iters", tr_cfg.iters);
    tr->add_option("--lr", tr_cfg.learning_rate);
    tr->add_option("--seed", tr_cfg.seed);
    tr->add_option("--hidden", tr_cfg.hidden_dim);
    tr->add_option("--optimizer", tr_optimizer, "sgd|adam");
    tr->add_option("--strategy", tr_strategy, "learned|random");
    auto* tr_budget_opt = tr->add_option("--budget", tr_budget, "token cap fraction");
    tr->add_flag("--absolute", tr_absolute);
    tr->add_option("--warmup", tr_cfg.schedule.warmup_iters);
    tr->add_option("--beta-g", tr_cfg.schedule.beta_g_final);
    tr->add_option("--beta-p", tr_cfg.schedule.beta_p_final);

    // bench
    auto* be = app.add_subcommand("bench", "retrieval F1 benchmark across strategies");
    std::string be_data, be_params, be_out;
    std::vector<std::string> be_strategies;
    std::vector<double> be_budgets;
    std::size_t be_trials = 100;
    std::uint64_t be_seed = 0;
    be->add_option("--data", be_data)->required();
    be->add_option("--strategies", be_strategies, "comma list")
        ->required()
        ->delimiter(',');
    be->add_option("--budgets", be_budgets, "comma list of fractions")
        ->required()
        ->delimiter(',');
    be->add_option("--trials", be_trials, "random-strategy trials");
    be->add_option("--seed", be_seed);
    be->add_option("--params", be_params, "params JSON for the learned strategy");
    be->add_option("--out", be_out)->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
    oracle::GradCheckConfig gc_config;
    std::string gc_out;
    gc->add_option("--seeds", gc_config.seeds);
    gc->add_option("--grid-rows", gc_config.grid_rows);
    gc->add_option("--grid-cols", gc_config.grid_cols);
    gc->add_option("--tissues", gc_config.m_tissues);
    gc->add_option("--dim", gc_config.dim);
    gc->add_option("--classes", gc_config.n_classes);
    gc->add_option("--hidden", gc_config.hidden_dim);
    gc->add_option("--step", gc_config.step);
    gc->add_option("--tol", gc_config.tolerance);
    gc->add_option("--seed", gc_config.base_seed);
    gc->add_option("--out", gc_out, "directory for gradcheck.json");

    // heatmap
    auto* hm = app.add_subcommand("heatmap", "question-patch relevance heatmap");
    std::string hm_bundle, hm_question, hm_out;
    hm->add_option("--bundle", hm_bundle)->required();
    hm->add_option("--question", hm_question)->required();
    hm->add_option("--out", hm_out)->required();

    // rates
    auto* ra = app.add_subcommand("rates", "per-question group sampling-rate vectors");
    std::string ra_data, ra_params, ra_out;
    ra->add_option("--data", ra_data)->required();
    ra->add_option("--params", ra_params)->required();
    ra->add_option("--out", ra_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(gen_spec, gen_out, gen_count);
        }
        if (seg->parsed()) {
            return cmd_segment(seg_bundle, seg_prompts, seg_out);
        }
        if (sel->parsed()) {
            return cmd_select(sel_bundle, sel_prompts, sel_question, sel_params,
                              sel_budget, sel_absolute, sel_budget_opt->count() > 0,
                              sel_out);
        }
        if (tr->parsed()) {
            if (tr_optimizer == "sgd") {
                tr_cfg.optimizer = Optimizer::sgd;
            } else if (tr_optimizer == "adam") {
                tr_cfg.optimizer = Optimizer::adam;
            } else {
                throw ValidationError("--optimizer must be sgd or adam");
            }
            if (tr_strategy == "random") {
                tr_cfg.strategy = SelectionStrategy::random;
            } else if (tr_strategy == "learned") {
                tr_cfg.strategy = SelectionStrategy::learned;
            } else {
                throw ValidationError("--strategy must be learned or random");
            }
            tr_cfg.cap = make_cap(tr_budget, tr_absolute, tr_budget_opt->count() > 0);
            return cmd_train(tr_data, tr_out, tr_cfg);
        }
        if (be->parsed()) {
            return cmd_bench(be_data, be_strategies, be_budgets, be_trials,
                             be_seed, be_params, be_out);
        }
        if (gc->parsed()) {
            return cmd_gradcheck(gc_config, gc_out);
        }
        if (hm->parsed()) {
            return cmd_heatmap(hm_bundle, hm_question, hm_out);
        }
        if (ra->parsed()) {
            return cmd_rates(ra_data, ra_params, ra_out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("histoselect");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) {
        argv.push_back(s.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace histoselect::cli
