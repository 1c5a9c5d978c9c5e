#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfl/config.hpp"
#include "sfl/svg.hpp"
#include "sfl/trainer.hpp"

namespace sfl {

using ordered_json = nlohmann::ordered_json;

// Dataset, desk classifier, and SFL+ rank table shared by every seed of an
// experiment. The classifier and table are derived from data_seed so that a
// seed sweep's members stay comparable.
struct ExperimentContext {
  Dataset dataset;
  std::optional<DeskClassifier> classifier;
  std::optional<RankTable> rank_table;
  std::vector<std::size_t> train_rows;
  double dataset_seconds = 0.0;
  double classifier_seconds = 0.0;
};

inline ExperimentContext prepare_experiment(const RunConfig& cfg) {
  ExperimentContext ctx;
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.dataset == "benchmark") {
    ctx.dataset = make_dataset(default_benchmark(), cfg.data_seed);
  } else {
    ctx.dataset = read_dataset_csv(cfg.dataset);
  }
  ctx.dataset_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto t1 = std::chrono::steady_clock::now();
  if (cfg.classifier_epochs > 0 && ctx.dataset.class_count >= 2)
    ctx.classifier = train_desk_classifier(ctx.dataset, cfg.classifier_epochs, cfg.data_seed);
  ctx.classifier_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

  if (cfg.trainer.retention_ratio) {
    const std::vector<double> scores = per_class_gaussian_scores(ctx.dataset);
    ctx.dataset = instance_select(ctx.dataset, scores, *cfg.trainer.retention_ratio);
  }

  ctx.train_rows = ctx.dataset.train_indices();
  if (ctx.classifier) {
    // rank over the training split itself, in dataset order
    const std::vector<double> all_probs = gt_class_probabilities(*ctx.classifier, ctx.dataset);
    std::vector<double> probs;
    std::vector<int> labels;
    for (std::size_t row : ctx.train_rows) {
      probs.push_back(all_probs[row]);
      labels.push_back(ctx.dataset.y[row]);
    }
    ctx.rank_table = build_rank_table(probs, labels);
  }
  return ctx;
}

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<std::pair<int, MetricsReport>> series;
  int best_epoch = -1;
  MetricsReport best;
  double seconds = 0.0;
  RunArtifacts artifacts;  // kept for downstream analysis/plots
};

// Best checkpoint = minimum FID over the evaluation series.
inline int best_fid_index(const std::vector<std::pair<int, MetricsReport>>& series) {
  int best = -1;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (best < 0 || series[i].second.fid < series[static_cast<std::size_t>(best)].second.fid)
      best = static_cast<int>(i);
  return best;
}

struct RunSummary {
  RunConfig config;
  std::vector<SeedResult> seeds;
  MetricsReport median_best, min_best, max_best;
  std::size_t failed = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Get>
inline void aggregate_field(const std::vector<SeedResult>& seeds, Get get, double& med,
                            double& lo, double& hi) {
  std::vector<double> vals;
  for (const SeedResult& s : seeds)
    if (s.ok) vals.push_back(get(s.best));
  med = median(vals);
  lo = vals.empty() ? med : *std::min_element(vals.begin(), vals.end());
  hi = vals.empty() ? med : *std::max_element(vals.begin(), vals.end());
}

}  // namespace detail

inline void aggregate_summary(RunSummary& summary) {
  auto agg = [&](auto get, double MetricsReport::* field) {
    double med, lo, hi;
    detail::aggregate_field(summary.seeds, get, med, lo, hi);
    summary.median_best.*field = med;
    summary.min_best.*field = lo;
    summary.max_best.*field = hi;
  };
  agg([](const MetricsReport& r) { return r.fid; }, &MetricsReport::fid);
  agg([](const MetricsReport& r) { return r.is; }, &MetricsReport::is);
  agg([](const MetricsReport& r) { return r.precision; }, &MetricsReport::precision);
  agg([](const MetricsReport& r) { return r.recall; }, &MetricsReport::recall);
  agg([](const MetricsReport& r) { return r.density; }, &MetricsReport::density);
  agg([](const MetricsReport& r) { return r.coverage; }, &MetricsReport::coverage);
  summary.failed = 0;
  for (const SeedResult& s : summary.seeds)
    if (!s.ok) ++summary.failed;
}

// One full training run for one seed; artifacts stay in memory.
inline SeedResult run_seed(const RunConfig& cfg, const ExperimentContext& ctx,
                           std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;
  TrainerConfig tc = cfg.trainer;
  tc.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    result.artifacts = train(tc, ctx.dataset,
                             ctx.rank_table ? &*ctx.rank_table : nullptr,
                             ctx.classifier ? &*ctx.classifier : nullptr);
    result.series = result.artifacts.metrics;
    const int bi = best_fid_index(result.series);
    if (bi >= 0) {
      result.best_epoch = result.series[static_cast<std::size_t>(bi)].first;
      result.best = result.series[static_cast<std::size_t>(bi)].second;
    }
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline RunSummary run_experiment(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                 const ExperimentContext& ctx) {
  require(!seeds.empty(), "run_experiment: need at least one seed");
  RunSummary summary;
  summary.config = cfg;
  for (std::uint64_t seed : seeds) summary.seeds.push_back(run_seed(cfg, ctx, seed));
  aggregate_summary(summary);
  return summary;
}

// --- output emission -----------------------------------------------------------

namespace detail {

inline ordered_json metrics_json(const MetricsReport& r) {
  ordered_json j;
  if (std::isnan(r.is)) j["is"] = nullptr;
  else j["is"] = r.is;
  j["fid"] = r.fid;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["density"] = r.density;
  j["coverage"] = r.coverage;
  j["n_real"] = r.n_real;
  j["n_fake"] = r.n_fake;
  j["k"] = r.k;
  return j;
}

inline ordered_json config_json(const RunConfig& cfg) {
  ordered_json j;
  j["method"] = method_name(cfg.trainer.method);
  j["loss"] = loss_name(cfg.trainer.loss);
  j["disc_head"] = variant_name(cfg.trainer.disc_variant);
  j["batch"] = cfg.trainer.batch;
  j["epochs"] = cfg.trainer.e_max;
  j["iters_per_epoch"] = cfg.trainer.n_max;
  j["latent_dim"] = cfg.trainer.latent_dim;
  j["lr_d"] = cfg.trainer.alpha_d;
  j["lr_g"] = cfg.trainer.alpha_g;
  j["d_steps"] = cfg.trainer.d_steps;
  j["nu"] = cfg.trainer.nu;
  if (cfg.trainer.topk_fraction) j["topk_fraction"] = *cfg.trainer.topk_fraction;
  else j["topk_fraction"] = nullptr;
  if (cfg.trainer.retention_ratio) j["retention_ratio"] = *cfg.trainer.retention_ratio;
  else j["retention_ratio"] = nullptr;
  j["eval_every"] = cfg.trainer.eval_every;
  j["n_eval"] = cfg.trainer.n_eval;
  j["metric_k"] = cfg.trainer.metric_k;
  j["dataset"] = cfg.dataset;
  j["data_seed"] = cfg.data_seed;
  j["classifier_epochs"] = cfg.classifier_epochs;
  return j;
}

}  // namespace detail

inline ordered_json summary_json(const RunSummary& summary) {
  ordered_json j;
  j["config"] = detail::config_json(summary.config);
  j["seeds"] = ordered_json::array();
  for (const SeedResult& s : summary.seeds) {
    ordered_json js;
    js["seed"] = s.seed;
    js["status"] = s.ok ? "ok" : "failed";
    if (!s.ok) js["error"] = s.error;
    if (s.ok && s.best_epoch >= 0) {
      js["best_epoch"] = s.best_epoch;
      js["best"] = detail::metrics_json(s.best);
    }
    ordered_json series = ordered_json::array();
    for (const auto& [epoch, r] : s.series) {
      ordered_json row = detail::metrics_json(r);
      row["epoch"] = epoch;
      series.push_back(row);
    }
    js["series"] = series;
    j["seeds"].push_back(js);
  }
  j["failed_seeds"] = summary.failed;
  j["median_best"] = detail::metrics_json(summary.median_best);
  j["min_best"] = detail::metrics_json(summary.min_best);
  j["max_best"] = detail::metrics_json(summary.max_best);
  return j;
}

// Per-run artifacts: diagnostics.csv, metrics.csv, checkpoints/, snapshots/.
inline void write_run_outputs(const std::filesystem::path& dir, const RunArtifacts& art,
                              const Dataset& ds, std::size_t snapshot_points = 512) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "snapshots");
  {
    std::ofstream os(dir / "diagnostics.csv");
    os << diagnostics_csv(art.diagnostics);
  }
  {
    std::ofstream os(dir / "metrics.csv");
    os << metrics_csv(art.metrics);
  }
  // real sample for the scatter background
  std::vector<std::size_t> held = ds.heldout_indices();
  if (held.size() > snapshot_points) held.resize(snapshot_points);
  const Matrix real = ds.gather(held);
  std::vector<int> real_labels;
  for (std::size_t i : held) real_labels.push_back(ds.y[i]);

  for (const CheckpointSnapshot& ck : art.checkpoints) {
    char name[64];
    std::snprintf(name, sizeof(name), "epoch_%04d", ck.epoch);
    {
      std::ofstream os(dir / "checkpoints" / (std::string(name) + ".ckpt"));
      os << "sfl-checkpoint 1\n";
      os << "epoch " << ck.epoch << "\n";
      save_generator(os, ck.gen);
      save_discriminator(os, ck.disc);
    }
    Rng rng(0xf1de0000u + static_cast<std::uint64_t>(ck.epoch));
    Matrix z(snapshot_points, ck.gen.latent_dim());
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
    std::vector<int> y(snapshot_points);
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = rng.uniform_int(static_cast<int>(ck.gen.class_count()));
    const LabeledBatch fake = generate(ck.gen, z, y);
    write_scatter_svg(dir / "snapshots" / (std::string(name) + ".svg"), real, real_labels,
                      fake.x, y, std::string("generated vs real, ") + name);
  }
}

inline void write_summary_files(const std::filesystem::path& dir, const RunSummary& summary) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "summary.json");
    os << summary_json(summary).dump(2) << "\n";
  }
  ordered_json timing;
  timing["phases"] = ordered_json::object();
  for (const SeedResult& s : summary.seeds)
    timing["phases"]["train_seed_" + std::to_string(s.seed)] = s.seconds;
  std::ofstream os(dir / "timing.json");
  os << timing.dump(2) << "\n";
}

// --- method comparison and nu sweep ---------------------------------------------

struct ComparisonRow {
  std::string label;
  RunSummary summary;
};

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "method,fid,is,precision,recall,density,coverage,failed_seeds\n";
  char buf[40];
  auto put = [&](double v) {
    if (std::isnan(v)) return std::string();
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const ComparisonRow& row : rows) {
    const MetricsReport& m = row.summary.median_best;
    os << row.label << "," << put(m.fid) << "," << put(m.is) << "," << put(m.precision) << ","
       << put(m.recall) << "," << put(m.density) << "," << put(m.coverage) << ","
       << row.summary.failed << "\n";
  }
  return os.str();
}

// Identical data and seeds across methods; emits the comparison table, one
// scatter per method and checkpoint, and the FID-vs-epoch curve.
inline std::vector<ComparisonRow> compare_methods(const RunConfig& base,
                                                  const std::vector<Method>& methods,
                                                  const std::vector<std::uint64_t>& seeds,
                                                  const std::filesystem::path& outdir) {
  require(methods.size() >= 2, "compare: need at least two methods");
  namespace fs = std::filesystem;
  fs::create_directories(outdir / "snapshots");

  RunConfig probe = base;
  if (std::find(methods.begin(), methods.end(), Method::SflPlus) != methods.end())
    require(probe.classifier_epochs > 0, "compare: sfl_plus requires classifier_epochs >= 1");
  const ExperimentContext ctx = prepare_experiment(probe);

  std::vector<ComparisonRow> rows;
  std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>> fid_series;
  for (Method m : methods) {
    RunConfig cfg = base;
    cfg.trainer.method = m;
    RunSummary summary = run_experiment(cfg, seeds, ctx);
    const fs::path mdir = outdir / method_name(m);
    write_summary_files(mdir, summary);
    for (const SeedResult& s : summary.seeds) {
      if (!s.ok) continue;
      write_run_outputs(mdir / ("seed_" + std::to_string(s.seed)), s.artifacts, ctx.dataset);
    }
    // snapshots for the first healthy seed
    for (const SeedResult& s : summary.seeds) {
      if (!s.ok) continue;
      std::vector<std::pair<int, double>> fid_points;
      for (const auto& [epoch, r] : s.series) fid_points.emplace_back(epoch, r.fid);
      fid_series.emplace_back(method_name(m), fid_points);
      std::vector<std::size_t> held = ctx.dataset.heldout_indices();
      if (held.size() > 512) held.resize(512);
      const Matrix real = ctx.dataset.gather(held);
      std::vector<int> real_labels;
      for (std::size_t i : held) real_labels.push_back(ctx.dataset.y[i]);
      for (const CheckpointSnapshot& ck : s.artifacts.checkpoints) {
        Rng rng(0x5caff01du + static_cast<std::uint64_t>(ck.epoch));
        Matrix z(512, ck.gen.latent_dim());
        for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
        std::vector<int> y(512);
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = rng.uniform_int(static_cast<int>(ck.gen.class_count()));
        const LabeledBatch fake = generate(ck.gen, z, y);
        char name[96];
        std::snprintf(name, sizeof(name), "%s_epoch_%04d.svg", method_name(m), ck.epoch);
        write_scatter_svg(outdir / "snapshots" / name, real, real_labels, fake.x, y,
                          std::string(method_name(m)) + " epoch " + std::to_string(ck.epoch));
      }
      break;
    }
    rows.push_back(ComparisonRow{method_name(m), std::move(summary)});
  }
  {
    std::ofstream os(outdir / "comparison.csv");
    os << comparison_csv(rows);
  }
  write_curve_svg(outdir / "fid_vs_epoch.svg", fid_series, "FID over training", "FID");
  return rows;
}

inline std::vector<ComparisonRow> sweep_nu(const RunConfig& base, const std::vector<double>& nus,
                                           const std::vector<std::uint64_t>& seeds,
                                           const std::filesystem::path& outdir) {
  require(!nus.empty(), "sweep: need at least one nu");
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  const ExperimentContext ctx = prepare_experiment(base);
  std::vector<ComparisonRow> rows;
  std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>> fid_series;
  for (double nu : nus) {
    require(nu >= 0.0 && nu <= 1.0, "sweep: nu out of [0,1]");
    RunConfig cfg = base;
    cfg.trainer.nu = nu;
    char label[32];
    std::snprintf(label, sizeof(label), "nu_%g", nu);
    RunSummary summary = run_experiment(cfg, seeds, ctx);
    write_summary_files(outdir / label, summary);
    for (const SeedResult& s : summary.seeds) {
      if (!s.ok) continue;
      std::vector<std::pair<int, double>> fid_points;
      for (const auto& [epoch, r] : s.series) fid_points.emplace_back(epoch, r.fid);
      fid_series.emplace_back(label, fid_points);
      break;
    }
    rows.push_back(ComparisonRow{label, std::move(summary)});
  }
  {
    std::ofstream os(outdir / "sweep.csv");
    os << comparison_csv(rows);
  }
  write_curve_svg(outdir / "fid_vs_epoch.svg", fid_series, "FID over training (nu sweep)", "FID");
  return rows;
}

}  // namespace sfl
