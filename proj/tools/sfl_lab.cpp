// sfl-lab: conditional-GAN training laboratory with selective focusing.
//
// Subcommands:
//   train    one training run from a config file
//   score    metric suite over two sample files
//   compare  several methods on identical data and seeds
//   sweep    maximum-focusing-rate sweep

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfl/experiment.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRunFailure = 3;

struct SampleFile {
  sfl::Matrix x;
  std::vector<int> labels;
};

// One point per row; the final column is a class label, -1 when unlabeled.
SampleFile read_samples_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read sample file: " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.find_first_not_of("0123456789+-.eE, \t\r") != std::string::npos)
      continue;  // header
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (...) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number '" + tok +
                                 "'");
      }
    }
    if (vals.size() < 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": need at least one coordinate and a label");
    labels.push_back(static_cast<int>(vals.back()));
    vals.pop_back();
    if (!rows.empty() && rows.front().size() != vals.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no samples");
  SampleFile out;
  out.x = sfl::Matrix(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out.x(i, j) = rows[i][j];
  out.labels = std::move(labels);
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    seeds.push_back(std::stoull(tok));
  }
  if (seeds.empty()) throw sfl::ConfigError("empty seed list");
  return seeds;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    vals.push_back(std::stod(tok));
  }
  if (vals.empty()) throw sfl::ConfigError("empty value list");
  return vals;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, bool seed_given,
              const std::string& out) {
  sfl::RunConfig cfg = sfl::parse_config(config_path);
  if (seed_given) cfg.trainer.seed = seed;
  const sfl::ExperimentContext ctx = sfl::prepare_experiment(cfg);
  sfl::RunSummary summary = sfl::run_experiment(cfg, {cfg.trainer.seed}, ctx);
  const std::filesystem::path dir(out);
  sfl::write_summary_files(dir, summary);
  if (!summary.seeds.front().ok) {
    std::cerr << "run failed: " << summary.seeds.front().error << "\n";
    return kExitRunFailure;
  }
  sfl::write_run_outputs(dir, summary.seeds.front().artifacts, ctx.dataset);
  std::cout << sfl::summary_json(summary)["median_best"].dump(2) << "\n";
  std::cout << "outputs written to " << dir.string() << "\n";
  return 0;
}

int cmd_score(const std::string& real_path, const std::string& fake_path, std::size_t k,
              const std::string& classifier_path) {
  const SampleFile real = read_samples_csv(real_path);
  const SampleFile fake = read_samples_csv(fake_path);
  sfl::Matrix probs;
  const sfl::Matrix* probs_ptr = nullptr;
  if (!classifier_path.empty()) {
    std::ifstream is(classifier_path);
    if (!is) throw std::runtime_error("cannot read classifier: " + classifier_path);
    const sfl::DeskClassifier clf = sfl::load_classifier(is);
    probs = sfl::classifier_probs(clf, fake.x);
    probs_ptr = &probs;
  }
  const sfl::MetricsReport r = sfl::compute_metrics(real.x, fake.x, k, probs_ptr);
  std::cout << sfl::ordered_json{{"is", std::isnan(r.is) ? sfl::ordered_json(nullptr)
                                                         : sfl::ordered_json(r.is)},
                                 {"fid", r.fid},
                                 {"precision", r.precision},
                                 {"recall", r.recall},
                                 {"density", r.density},
                                 {"coverage", r.coverage},
                                 {"n_real", r.n_real},
                                 {"n_fake", r.n_fake},
                                 {"k", r.k}}
                   .dump(2)
            << "\n";
  char buf[40];
  auto put = [&](double v) {
    if (std::isnan(v)) return std::string();
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::cout << put(r.is) << "," << put(r.fid) << "," << put(r.precision) << "," << put(r.recall)
            << "," << put(r.density) << "," << put(r.coverage) << "," << r.n_real << ","
            << r.n_fake << "," << r.k << "\n";
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& methods_csv,
                const std::string& seeds_csv, const std::string& out) {
  sfl::RunConfig cfg = sfl::parse_config(config_path);
  std::vector<sfl::Method> methods;
  {
    std::stringstream ss(methods_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      methods.push_back(sfl::method_from_name(tok));  // throws on unknown tag
    }
  }
  if (methods.size() < 2) throw sfl::ConfigError("compare: need at least two methods");
  const std::vector<std::uint64_t> seeds =
      seeds_csv.empty() ? std::vector<std::uint64_t>{cfg.trainer.seed} : parse_seed_list(seeds_csv);
  const auto rows = sfl::compare_methods(cfg, methods, seeds, out);
  std::cout << sfl::comparison_csv(rows);
  std::size_t failed = 0;
  for (const auto& row : rows) failed += row.summary.failed;
  return failed == rows.size() * seeds.size() ? kExitRunFailure : 0;
}

int cmd_sweep(const std::string& config_path, const std::string& nus_csv,
              const std::string& seeds_csv, const std::string& out) {
  sfl::RunConfig cfg = sfl::parse_config(config_path);
  const std::vector<double> nus = parse_double_list(nus_csv);
  for (double nu : nus)
    if (nu < 0.0 || nu > 1.0) throw sfl::ConfigError("sweep: nu must lie in [0,1]");
  const std::vector<std::uint64_t> seeds =
      seeds_csv.empty() ? std::vector<std::uint64_t>{cfg.trainer.seed} : parse_seed_list(seeds_csv);
  const auto rows = sfl::sweep_nu(cfg, nus, seeds, out);
  std::cout << sfl::comparison_csv(rows);
  std::size_t failed = 0;
  for (const auto& row : rows) failed += row.summary.failed;
  return failed == rows.size() * seeds.size() ? kExitRunFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sfl-lab: selective focusing learning on synthetic conditional data"};
  app.require_subcommand(1);
  app.footer(sfl::config_help());

  std::string config_path, out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto* train = app.add_subcommand("train", "one training run");
  train->add_option("--config", config_path, "config file")->required();
  auto* seed_opt = train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out_dir, "output directory");

  std::string real_path, fake_path, classifier_path;
  std::size_t k = 3;
  auto* score = app.add_subcommand("score", "metric suite over two sample files");
  score->add_option("--real", real_path, "real samples CSV")->required();
  score->add_option("--fake", fake_path, "generated samples CSV")->required();
  score->add_option("--k", k, "manifold neighbor count (3 or 5)");
  score->add_option("--classifier", classifier_path, "desk classifier checkpoint for IS");

  std::string methods_csv, seeds_csv;
  auto* compare = app.add_subcommand("compare", "methods side by side");
  compare->add_option("--config", config_path, "config file")->required();
  compare->add_option("--methods", methods_csv, "comma-separated method tags")->required();
  compare->add_option("--seeds", seeds_csv, "comma-separated seeds");
  compare->add_option("--out", out_dir, "output directory");

  std::string nus_csv;
  auto* sweep = app.add_subcommand("sweep", "maximum focusing rate sweep");
  sweep->add_option("--config", config_path, "config file")->required();
  sweep->add_option("--nu", nus_csv, "comma-separated nu values")->required();
  sweep->add_option("--seeds", seeds_csv, "comma-separated seeds");
  sweep->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  try {
    if (app.got_subcommand(train)) return cmd_train(config_path, seed, seed_given, out_dir);
    if (app.got_subcommand(score)) return cmd_score(real_path, fake_path, k, classifier_path);
    if (app.got_subcommand(compare)) return cmd_compare(config_path, methods_csv, seeds_csv, out_dir);
    if (app.got_subcommand(sweep)) return cmd_sweep(config_path, nus_csv, seeds_csv, out_dir);
  } catch (const sfl::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRunFailure;
  }
  return 0;
}
