#include "tsdrd/analysis.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <thread>

#include "tsdrd/prob.hpp"
#include "tsdrd/rng.hpp"
#include "tsdrd/svg.hpp"

namespace tsdrd {

namespace {

namespace fs = std::filesystem;

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

// Per-seed derived streams; keeps datasets, teacher, source model and run
// independent but reproducible.
constexpr std::uint64_t kStreamTeacher = 10;
constexpr std::uint64_t kStreamSource = 20;

}  // namespace

EvalResult evaluate(const ForwardFn& forward_fn, const LabeledDataset& eval_set) {
  if (eval_set.size() == 0) throw std::runtime_error("evaluate: empty eval set");
  Matrix logits = forward_fn(eval_set.features);
  if (logits.rows != eval_set.size()) {
    throw std::runtime_error("evaluate: forward returned wrong batch size");
  }
  EvalResult out;
  out.per_class_counts.assign(static_cast<std::size_t>(eval_set.classes), 0);
  long hits = 0;
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const auto pred = argmax_lowest(logits.row(b));
    ++out.per_class_counts[pred];
    if (static_cast<int>(pred) == eval_set.labels[b]) ++hits;
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(eval_set.size());
  return out;
}

double prediction_jsd(const ForwardFn& model_a, const ForwardFn& model_b,
                      const LabeledDataset& eval_set) {
  if (eval_set.size() == 0) throw std::runtime_error("prediction_jsd: empty eval set");
  Matrix pa = softmax_rows(model_a(eval_set.features));
  Matrix pb = softmax_rows(model_b(eval_set.features));
  if (!pa.same_shape(pb)) {
    throw std::runtime_error("prediction_jsd: model output shapes differ");
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < pa.rows; ++b) acc += jsd(pa.row(b), pb.row(b));
  return acc / static_cast<double>(pa.rows);
}

void parallel_for_indexed(int jobs, std::size_t count,
                          const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(jobs), count));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= count) break;
          fn(i);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double pearson_correlation(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::runtime_error("pearson_correlation: need two same-length series");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw std::runtime_error("pearson_correlation: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

TeacherModel make_run_teacher(const BenchmarkScenario& scenario,
                              const Benchmark& bench, const TrainConfig& cfg,
                              std::uint64_t seed) {
  TeacherModel teacher = pretrain_teacher(bench.vil, cfg.embed_dim, cfg.tau,
                                          derive_seed(seed, kStreamTeacher));
  auto eval = evaluate(
      [&](const Matrix& x) { return teacher_forward(teacher, x); }, bench.target);
  if (eval.accuracy < scenario.teacher_floor) {
    std::cerr << "warning: teacher zero-shot accuracy " << eval.accuracy
              << " below scenario floor " << scenario.teacher_floor
              << " (seed " << seed << ")\n";
  }
  return teacher;
}

namespace {

std::vector<int> student_arch(const TrainConfig& cfg, const Benchmark& bench) {
  std::vector<int> arch;
  arch.push_back(static_cast<int>(bench.target.features.cols));
  for (int h : cfg.hidden) arch.push_back(h);
  arch.push_back(bench.target.classes);
  return arch;
}

DualRunReport dual_run_for_seed(const BenchmarkScenario& scenario,
                                const TrainConfig& base, std::uint64_t seed,
                                int source_pretrain_epochs) {
  TrainConfig cfg = base;
  cfg.seed = seed;
  cfg.start_mode = "random";
  cfg.source_checkpoint.clear();

  Benchmark bench = make_benchmark(scenario, seed);
  TeacherModel teacher = make_run_teacher(scenario, bench, cfg, seed);
  MlpModel source_model =
      pretrain_source_model(bench.source, student_arch(cfg, bench),
                            source_pretrain_epochs, derive_seed(seed, kStreamSource),
                            cfg.lr_student, cfg.momentum, cfg.batch_size);

  // Per-epoch predictive distributions on the eval set, epoch 0 included.
  auto capture = [&](std::vector<Matrix>& into) {
    return [&into, &bench](int, const MlpModel& student, const TeacherModel&) {
      into.push_back(softmax_rows(forward(student, bench.target.features)));
    };
  };

  std::vector<Matrix> probs_random, probs_source;
  RunResult run_random = run_tsdrd(cfg, bench.target.features, teacher,
                                   bench.target, capture(probs_random));
  RunResult run_source = run_tsdrd(cfg, bench.target.features, teacher,
                                   bench.target, capture(probs_source),
                                   &source_model);

  DualRunReport report;
  report.seed = seed;
  const std::size_t epochs = probs_random.size();  // total_epochs + 1
  report.prediction_jsd_per_epoch.resize(epochs);
  report.acc_random_start.resize(epochs);
  report.acc_source_start.resize(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    double acc_jsd = 0.0;
    long hit_r = 0, hit_s = 0;
    for (std::size_t b = 0; b < bench.target.size(); ++b) {
      acc_jsd += jsd(probs_random[e].row(b), probs_source[e].row(b));
      if (static_cast<int>(argmax_lowest(probs_random[e].row(b))) ==
          bench.target.labels[b]) {
        ++hit_r;
      }
      if (static_cast<int>(argmax_lowest(probs_source[e].row(b))) ==
          bench.target.labels[b]) {
        ++hit_s;
      }
    }
    const double inv = 1.0 / static_cast<double>(bench.target.size());
    report.prediction_jsd_per_epoch[e] = acc_jsd * inv;
    report.acc_random_start[e] = static_cast<double>(hit_r) * inv;
    report.acc_source_start[e] = static_cast<double>(hit_s) * inv;
  }
  report.baseline_jsd = report.prediction_jsd_per_epoch.front();
  report.final_jsd = report.prediction_jsd_per_epoch.back();
  report.final_gap =
      std::abs(report.acc_random_start.back() - report.acc_source_start.back());

  const auto c = static_cast<std::size_t>(bench.target.classes);
  report.final_counts_random.assign(c, 0);
  report.final_counts_source.assign(c, 0);
  const Matrix& last_r = probs_random.back();
  const Matrix& last_s = probs_source.back();
  for (std::size_t b = 0; b < bench.target.size(); ++b) {
    ++report.final_counts_random[argmax_lowest(last_r.row(b))];
    ++report.final_counts_source[argmax_lowest(last_s.row(b))];
  }
  double l1 = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    l1 += std::abs(static_cast<double>(report.final_counts_random[k] -
                                       report.final_counts_source[k]));
  }
  report.counts_l1 = l1;
  return report;
}

}  // namespace

Hypothesis1Report hypothesis1_experiment(const BenchmarkScenario& scenario,
                                         const TrainConfig& cfg,
                                         const std::vector<std::uint64_t>& seeds,
                                         int jobs, int source_pretrain_epochs) {
  if (seeds.empty()) throw std::runtime_error("hypothesis1: no seeds given");
  Hypothesis1Report report;
  report.per_seed.resize(seeds.size());
  parallel_for_indexed(jobs, seeds.size(), [&](std::size_t i) {
    report.per_seed[i] =
        dual_run_for_seed(scenario, cfg, seeds[i], source_pretrain_epochs);
  });
  const double inv = 1.0 / static_cast<double>(seeds.size());
  for (const auto& r : report.per_seed) {
    report.mean_final_gap += r.final_gap * inv;
    report.mean_final_jsd += r.final_jsd * inv;
    report.mean_baseline_jsd += r.baseline_jsd * inv;
    report.mean_counts_l1 += r.counts_l1 * inv;
  }
  return report;
}

RegionStudyReport denoised_region_experiment(const BenchmarkScenario& scenario,
                                             const TrainConfig& cfg) {
  Benchmark bench = make_benchmark(scenario, cfg.seed);
  TeacherModel teacher = make_run_teacher(scenario, bench, cfg, cfg.seed);
  RunResult run = run_tsdrd(cfg, bench.target.features, teacher, bench.target);

  RegionStudyReport report;
  report.epochs = run.metrics;

  std::vector<double> gains, jsds;
  double min_margin = 1.0;
  for (const auto& rec : report.epochs) {
    if (rec.epoch <= cfg.warm_up_epochs) continue;
    double margin =
        rec.region_acc - std::max(rec.teacher_acc, rec.student_acc);
    min_margin = std::min(min_margin, margin);
    gains.push_back(margin);
    jsds.push_back(rec.noise_jsd);
  }
  if (gains.size() < 2) {
    throw std::runtime_error(
        "denoised_region_experiment: need at least 2 post-warm-up epochs");
  }
  report.min_post_warmup_margin = min_margin;
  report.gain_jsd_correlation = pearson_correlation(jsds, gains);
  return report;
}

AblationReport ablation_runner(const BenchmarkScenario& scenario,
                               const TrainConfig& base,
                               const std::vector<std::uint64_t>& seeds,
                               int jobs, int source_pretrain_epochs) {
  if (seeds.empty()) throw std::runtime_error("ablation_runner: no seeds given");

  struct Toggle {
    std::string label;
    std::function<void(TrainConfig&)> apply;
    bool source_start = false;
  };
  std::vector<Toggle> toggles = {
      {"wo_l_pl", [](TrainConfig& c) { c.flags.use_l_pl = false; }, false},
      {"wo_l_mu", [](TrainConfig& c) { c.flags.use_l_mu = false; }, false},
      {"wo_l_en", [](TrainConfig& c) { c.flags.use_l_en = false; }, false},
      {"wo_region", [](TrainConfig& c) { c.flags.region_fusion = false; }, false},
      {"wo_prompt_tuning",
       [](TrainConfig& c) { c.flags.prompt_tuning = false; }, false},
      {"wo_warm_up", [](TrainConfig& c) { c.warm_up_epochs = 0; }, false},
      {"source_start", [](TrainConfig&) {}, true},
      {"full", [](TrainConfig&) {}, false},
  };

  // One task per (toggle, seed); results keyed by index for determinism.
  const std::size_t n_tasks = toggles.size() * seeds.size();
  std::vector<double> final_acc(n_tasks, 0.0);
  parallel_for_indexed(jobs, n_tasks, [&](std::size_t task) {
    const std::size_t ti = task / seeds.size();
    const std::size_t si = task % seeds.size();
    TrainConfig cfg = base;
    cfg.seed = seeds[si];
    cfg.start_mode = "random";
    cfg.source_checkpoint.clear();
    toggles[ti].apply(cfg);

    Benchmark bench = make_benchmark(scenario, cfg.seed);
    TeacherModel teacher = make_run_teacher(scenario, bench, cfg, cfg.seed);
    const MlpModel* start = nullptr;
    MlpModel source_model;
    if (toggles[ti].source_start) {
      source_model = pretrain_source_model(
          bench.source, student_arch(cfg, bench), source_pretrain_epochs,
          derive_seed(cfg.seed, kStreamSource), cfg.lr_student, cfg.momentum,
          cfg.batch_size);
      start = &source_model;
    }
    RunResult run =
        run_tsdrd(cfg, bench.target.features, teacher, bench.target, {}, start);
    final_acc[task] = run.metrics.back().student_acc;
  });

  AblationReport report;
  double full_acc = 0.0;
  for (std::size_t ti = 0; ti < toggles.size(); ++ti) {
    double mean = 0.0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      mean += final_acc[ti * seeds.size() + si];
    }
    mean /= static_cast<double>(seeds.size());
    if (toggles[ti].label == "full") full_acc = mean;
    report.rows.push_back({toggles[ti].label, mean, 0.0});
  }
  for (auto& row : report.rows) row.delta_vs_full = row.final_accuracy - full_acc;
  return report;
}

std::vector<SweepPoint> sweep_runner(const BenchmarkScenario& scenario,
                                     const TrainConfig& base,
                                     const SweepGrid& grid,
                                     const std::vector<std::uint64_t>& seeds,
                                     int jobs) {
  if (seeds.empty()) throw std::runtime_error("sweep_runner: no seeds given");
  std::vector<SweepPoint> points;
  for (double a : grid.alphas) {
    for (double g : grid.gammas) {
      points.push_back({a, g, base.beta, base.warm_up_epochs, 0.0});
    }
  }
  for (double b : grid.betas) {
    for (int n : grid.warmups) {
      points.push_back({base.alpha, base.gamma, b, n, 0.0});
    }
  }
  if (points.empty()) throw std::runtime_error("sweep_runner: empty grid");

  const std::size_t n_tasks = points.size() * seeds.size();
  std::vector<double> acc(n_tasks, 0.0);
  parallel_for_indexed(jobs, n_tasks, [&](std::size_t task) {
    const std::size_t pi = task / seeds.size();
    const std::size_t si = task % seeds.size();
    TrainConfig cfg = base;
    cfg.seed = seeds[si];
    cfg.alpha = points[pi].alpha;
    cfg.gamma = points[pi].gamma;
    cfg.beta = points[pi].beta;
    cfg.warm_up_epochs = std::min(points[pi].warm_up, cfg.total_epochs);
    Benchmark bench = make_benchmark(scenario, cfg.seed);
    TeacherModel teacher = make_run_teacher(scenario, bench, cfg, cfg.seed);
    RunResult run = run_tsdrd(cfg, bench.target.features, teacher, bench.target);
    acc[task] = run.metrics.back().student_acc;
  });

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    double mean = 0.0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      mean += acc[pi * seeds.size() + si];
    }
    points[pi].mean_accuracy = mean / static_cast<double>(seeds.size());
  }
  return points;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

void emit_run_report(const std::vector<MetricsRecord>& records, int classes,
                     const std::string& out_dir) {
  if (records.empty()) throw std::runtime_error("emit_run_report: no records");
  ensure_dir(out_dir);
  save_metrics_csv(records, classes, out_dir + "/metrics.csv");

  SvgSeries student{"student", "#1f77b4", {}};
  SvgSeries teacher{"teacher", "#d62728", {}};
  SvgSeries region{"region", "#2ca02c", {}};
  SvgSeries noise{"noise_jsd", "#9467bd", {}};
  for (const auto& r : records) {
    student.values.push_back(r.student_acc);
    teacher.values.push_back(r.teacher_acc);
    region.values.push_back(r.region_acc);
    noise.values.push_back(r.noise_jsd);
  }
  write_line_chart_svg(out_dir + "/accuracy.svg", "accuracy per epoch", "epoch",
                       {student, teacher, region});
  write_line_chart_svg(out_dir + "/noise_jsd.svg", "noise JSD per epoch",
                       "epoch", {noise});
}

void emit_hypothesis1_report(const Hypothesis1Report& report,
                             const std::string& out_dir) {
  if (report.per_seed.empty()) {
    throw std::runtime_error("emit_hypothesis1_report: no records");
  }
  ensure_dir(out_dir);
  for (const auto& r : report.per_seed) {
    const std::string seed_dir = out_dir + "/" + std::to_string(r.seed);
    ensure_dir(seed_dir);
    auto out = open_out(seed_dir + "/metrics.csv");
    out << "epoch,acc_random_start,acc_source_start,prediction_jsd\n";
    for (std::size_t e = 0; e < r.prediction_jsd_per_epoch.size(); ++e) {
      out << e << ',' << fmt17(r.acc_random_start[e]) << ','
          << fmt17(r.acc_source_start[e]) << ','
          << fmt17(r.prediction_jsd_per_epoch[e]) << '\n';
    }
    auto counts = open_out(seed_dir + "/final_counts.csv");
    counts << "class,count_random_start,count_source_start\n";
    for (std::size_t k = 0; k < r.final_counts_random.size(); ++k) {
      counts << k << ',' << r.final_counts_random[k] << ','
             << r.final_counts_source[k] << '\n';
    }

    SvgSeries acc_r{"random start", "#1f77b4", r.acc_random_start};
    SvgSeries acc_s{"source start", "#d62728", r.acc_source_start};
    SvgSeries pj{"prediction JSD", "#2ca02c", r.prediction_jsd_per_epoch};
    write_line_chart_svg(out_dir + "/convergence_" + std::to_string(r.seed) + ".svg",
                         "paired-start accuracy and JSD", "epoch",
                         {acc_r, acc_s, pj});
  }
  auto out = open_out(out_dir + "/summary.csv");
  out << "seed,baseline_jsd,final_jsd,final_gap,counts_l1\n";
  for (const auto& r : report.per_seed) {
    out << r.seed << ',' << fmt17(r.baseline_jsd) << ',' << fmt17(r.final_jsd)
        << ',' << fmt17(r.final_gap) << ',' << fmt17(r.counts_l1) << '\n';
  }
  out << "mean," << fmt17(report.mean_baseline_jsd) << ','
      << fmt17(report.mean_final_jsd) << ',' << fmt17(report.mean_final_gap)
      << ',' << fmt17(report.mean_counts_l1) << '\n';
}

void emit_region_study_report(const RegionStudyReport& report, int classes,
                              const std::string& out_dir) {
  if (report.epochs.empty()) {
    throw std::runtime_error("emit_region_study_report: no records");
  }
  ensure_dir(out_dir);
  save_metrics_csv(report.epochs, classes, out_dir + "/metrics.csv");
  auto out = open_out(out_dir + "/summary.csv");
  out << "gain_jsd_correlation,min_post_warmup_margin\n";
  out << fmt17(report.gain_jsd_correlation) << ','
      << fmt17(report.min_post_warmup_margin) << '\n';

  SvgSeries student{"student", "#1f77b4", {}};
  SvgSeries teacher{"teacher", "#d62728", {}};
  SvgSeries region{"region", "#2ca02c", {}};
  SvgSeries noise{"noise_jsd", "#9467bd", {}};
  for (const auto& r : report.epochs) {
    student.values.push_back(r.student_acc);
    teacher.values.push_back(r.teacher_acc);
    region.values.push_back(r.region_acc);
    noise.values.push_back(r.noise_jsd);
  }
  write_line_chart_svg(out_dir + "/region_gain.svg",
                       "region vs individual models", "epoch",
                       {student, teacher, region, noise});
}

void emit_ablation_report(const AblationReport& report,
                          const std::string& out_dir) {
  if (report.rows.empty()) throw std::runtime_error("emit_ablation_report: no rows");
  ensure_dir(out_dir);
  auto out = open_out(out_dir + "/summary.csv");
  out << "config,final_accuracy,delta_vs_full\n";
  for (const auto& row : report.rows) {
    out << row.label << ',' << fmt17(row.final_accuracy) << ','
        << fmt17(row.delta_vs_full) << '\n';
  }
}

void emit_sweep_report(const std::vector<SweepPoint>& points,
                       const std::string& out_dir) {
  if (points.empty()) throw std::runtime_error("emit_sweep_report: no points");
  ensure_dir(out_dir);
  auto out = open_out(out_dir + "/summary.csv");
  out << "alpha,gamma,beta,warm_up_epochs,mean_accuracy\n";
  for (const auto& p : points) {
    out << fmt17(p.alpha) << ',' << fmt17(p.gamma) << ',' << fmt17(p.beta) << ','
        << p.warm_up << ',' << fmt17(p.mean_accuracy) << '\n';
  }
}

}  // namespace tsdrd
