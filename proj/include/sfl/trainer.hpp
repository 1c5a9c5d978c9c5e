#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sfl/data.hpp"
#include "sfl/gan.hpp"
#include "sfl/metrics.hpp"
#include "sfl/schedule.hpp"
#include "sfl/selection.hpp"

namespace sfl {

enum class Method { Marginal, Conditional, Joint, Sfl, SflPlus };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Marginal: return "marginal";
    case Method::Conditional: return "conditional";
    case Method::Joint: return "joint";
    case Method::Sfl: return "sfl";
    case Method::SflPlus: return "sfl_plus";
  }
  return "joint";
}

inline Method method_from_name(const std::string& name) {
  if (name == "marginal") return Method::Marginal;
  if (name == "conditional") return Method::Conditional;
  if (name == "joint") return Method::Joint;
  if (name == "sfl") return Method::Sfl;
  if (name == "sfl_plus") return Method::SflPlus;
  throw std::invalid_argument("unknown method: " + name);
}

struct TrainerConfig {
  std::size_t batch = 128;
  int e_max = 200;
  int n_max = 30;  // iterations per epoch
  std::size_t latent_dim = 2;
  double alpha_d = 2e-3;
  double alpha_g = 1e-3;
  int d_steps = 1;
  LossKind loss = LossKind::Hinge;
  Method method = Method::Joint;
  DiscVariant disc_variant = DiscVariant::Approx;
  double nu = 0.5;
  std::optional<double> topk_fraction;
  std::optional<double> retention_ratio;  // curation happens before train()
  std::uint64_t seed = 1;
  int eval_every = 10;
  std::size_t n_eval = 2000;
  std::size_t metric_k = 3;

  void validate() const {
    require(batch >= 1, "TrainerConfig: batch must be >= 1");
    require(e_max >= 0, "TrainerConfig: epochs must be >= 0");
    require(n_max >= 1, "TrainerConfig: iterations per epoch must be >= 1");
    require(alpha_d > 0.0 && alpha_g > 0.0, "TrainerConfig: learning rates must be positive");
    require(d_steps >= 1, "TrainerConfig: d_steps must be >= 1");
    require(nu >= 0.0 && nu <= 1.0, "TrainerConfig: nu out of [0,1]");
    if (topk_fraction)
      require(*topk_fraction > 0.0 && *topk_fraction <= 1.0,
              "TrainerConfig: topk_fraction out of (0,1]");
    if (retention_ratio)
      require(*retention_ratio > 0.0 && *retention_ratio <= 1.0,
              "TrainerConfig: retention_ratio out of (0,1]");
    require(eval_every >= 1, "TrainerConfig: eval_every must be >= 1");
  }
};

// --- diagnostics -------------------------------------------------------------

struct PoolStats {
  std::optional<double> mean, var;  // population variance
};

inline PoolStats pool_stats(const std::vector<double>& values,
                            const std::vector<std::size_t>& pool) {
  PoolStats s;
  if (pool.empty()) return s;
  double m = 0.0;
  for (std::size_t i : pool) m += values[i];
  m /= static_cast<double>(pool.size());
  double v = 0.0;
  for (std::size_t i : pool) v += (values[i] - m) * (values[i] - m);
  v /= static_cast<double>(pool.size());
  s.mean = m;
  s.var = v;
  return s;
}

// Mean(D(real)) - Mean(D(fake)) split into the marginal and conditional
// shares, reported separately for the selected and unselected pools.
struct DistinguishingPower {
  std::optional<double> cond_selected, marg_selected;
  std::optional<double> cond_unselected, marg_unselected;
};

namespace detail {
inline std::optional<double> pool_gap(const std::vector<double>& real,
                                      const std::vector<std::size_t>& real_pool,
                                      const std::vector<double>& fake,
                                      const std::vector<std::size_t>& fake_pool) {
  if (real_pool.empty() || fake_pool.empty()) return std::nullopt;
  double mr = 0.0, mf = 0.0;
  for (std::size_t i : real_pool) mr += real[i];
  for (std::size_t i : fake_pool) mf += fake[i];
  return mr / static_cast<double>(real_pool.size()) - mf / static_cast<double>(fake_pool.size());
}
}  // namespace detail

inline DistinguishingPower distinguishing_power(const DiscOutput& real, const DiscOutput& fake,
                                                const SelectionSplit& real_split,
                                                const SelectionSplit& fake_split) {
  DistinguishingPower dp;
  dp.cond_selected = detail::pool_gap(real.conditional, real_split.selected, fake.conditional,
                                      fake_split.selected);
  dp.marg_selected =
      detail::pool_gap(real.marginal, real_split.selected, fake.marginal, fake_split.selected);
  dp.cond_unselected = detail::pool_gap(real.conditional, real_split.complement, fake.conditional,
                                        fake_split.complement);
  dp.marg_unselected = detail::pool_gap(real.marginal, real_split.complement, fake.marginal,
                                        fake_split.complement);
  return dp;
}

// Convenience overload: one split applied to both pools.
inline DistinguishingPower distinguishing_power(const DiscOutput& real, const DiscOutput& fake,
                                                const SelectionSplit& split) {
  return distinguishing_power(real, fake, split, split);
}

struct EpochDiagnostics {
  int epoch = 0;
  double f = 0.0;
  double loss_d = 0.0, loss_g = 0.0;
  PoolStats dc_selected_real, dc_selected_fake;
  PoolStats dc_unselected_real, dc_unselected_fake;
  DistinguishingPower dp;
};

// --- selective steps ---------------------------------------------------------

enum class Channel { Total, Marginal, Conditional };

namespace detail {

// Samples route to the conditional channel when selected, and to the method's
// base channel otherwise.
inline Channel base_channel(Method m) {
  switch (m) {
    case Method::Marginal: return Channel::Marginal;
    case Method::Conditional: return Channel::Conditional;
    default: return Channel::Total;
  }
}

inline std::vector<double> mixed_scores(const DiscOutput& out, const SelectionSplit& split,
                                        Channel base) {
  std::vector<double> s(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (base) {
      case Channel::Total: s[i] = out.total[i]; break;
      case Channel::Marginal: s[i] = out.marginal[i]; break;
      case Channel::Conditional: s[i] = out.conditional[i]; break;
    }
  }
  for (std::size_t i : split.selected) s[i] = out.conditional[i];
  return s;
}

// Scatter per-sample score gradients to the channel each sample was routed
// through.
struct ChannelSeeds {
  std::vector<double> total, marginal, conditional;
};

inline ChannelSeeds route_seeds(const std::vector<double>& dscore, const SelectionSplit& split,
                                Channel base) {
  const std::size_t n = dscore.size();
  ChannelSeeds seeds;
  seeds.total.assign(n, 0.0);
  seeds.marginal.assign(n, 0.0);
  seeds.conditional.assign(n, 0.0);
  std::vector<std::uint8_t> sel(n, 0);
  for (std::size_t i : split.selected) sel[i] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (sel[i]) {
      seeds.conditional[i] = dscore[i];
    } else {
      switch (base) {
        case Channel::Total: seeds.total[i] = dscore[i]; break;
        case Channel::Marginal: seeds.marginal[i] = dscore[i]; break;
        case Channel::Conditional: seeds.conditional[i] = dscore[i]; break;
      }
    }
  }
  return seeds;
}

inline SelectionSplit select_pool(const std::vector<double>& d_conditional, Method method,
                                  std::size_t k) {
  const bool selective = method == Method::Sfl || method == Method::SflPlus;
  return top_k_split(d_conditional, selective ? k : 0);
}

}  // namespace detail

struct DiscStep {
  DiscGrads grads;  // gradients of the discriminator's maximization objective
  double loss = 0.0;
  SelectionSplit real_split, fake_split;
  DiscOutput real_out, fake_out;
};

// One selective discriminator step's gradients (Adam not applied).
// Selected samples contribute through the conditional score, the complement
// through the method's base score; the adversarial loss weights every sample
// by 1/B of its pool.
inline DiscStep discriminator_step_gradients(const DiscParams& disc, const LabeledBatch& real,
                                             const LabeledBatch& fake, double f_rate,
                                             Method method, LossKind kind,
                                             const RankTable* table = nullptr,
                                             const std::vector<std::size_t>* real_positions =
                                                 nullptr) {
  DiscStep step;
  DiscTrace tr_real, tr_fake;
  step.real_out = discriminate_traced(disc, real, tr_real);
  step.fake_out = discriminate_traced(disc, fake, tr_fake);

  const std::size_t k_real = static_cast<std::size_t>(
      std::floor(static_cast<double>(real.size()) * f_rate));
  const std::size_t k_fake = static_cast<std::size_t>(
      std::floor(static_cast<double>(fake.size()) * f_rate));
  if (method == Method::SflPlus) {
    require(table != nullptr && real_positions != nullptr,
            "discriminator step: sfl_plus needs a rank table");
    step.real_split = sfl_plus_real_mask(*table, *real_positions, f_rate);
  } else {
    step.real_split = detail::select_pool(step.real_out.conditional, method, k_real);
  }
  step.fake_split = detail::select_pool(step.fake_out.conditional, method, k_fake);

  const Channel base = detail::base_channel(method);
  const std::vector<double> s_real = detail::mixed_scores(step.real_out, step.real_split, base);
  const std::vector<double> s_fake = detail::mixed_scores(step.fake_out, step.fake_split, base);
  const LossResult loss = loss_discriminator(s_real, s_fake, kind);
  step.loss = loss.value;

  // ascent on the value function: seed with the negated loss gradients
  std::vector<double> up_real(loss.dreal.size()), up_fake(loss.dfake.size());
  for (std::size_t i = 0; i < up_real.size(); ++i) up_real[i] = -loss.dreal[i];
  for (std::size_t i = 0; i < up_fake.size(); ++i) up_fake[i] = -loss.dfake[i];
  const detail::ChannelSeeds seeds_r = detail::route_seeds(up_real, step.real_split, base);
  const detail::ChannelSeeds seeds_f = detail::route_seeds(up_fake, step.fake_split, base);

  DiscGrads g_real = disc_backward(disc, tr_real, seeds_r.total, seeds_r.marginal,
                                   seeds_r.conditional);
  const DiscGrads g_fake = disc_backward(disc, tr_fake, seeds_f.total, seeds_f.marginal,
                                         seeds_f.conditional);
  g_real.phi.add(g_fake.phi);
  g_real.psi.add(g_fake.psi);
  if (disc.variant == DiscVariant::Approx) {
    add_in_place(g_real.dv, g_fake.dv);
  } else {
    add_in_place(g_real.dv_p, g_fake.dv_p);
    add_in_place(g_real.dv_g, g_fake.dv_g);
  }
  step.grads = std::move(g_real);
  return step;
}

struct GenStep {
  GenGrads grads;  // gradients of the generator loss (descent direction)
  double loss = 0.0;
  SelectionSplit split;
  DiscOutput out;
  std::size_t zeroed = 0;  // samples silenced by the top-k filter
};

// One selective generator step's gradients. Generated samples always select
// by their conditional score; the optional top-k filter silences the samples
// with the lowest total scores.
inline GenStep generator_step_gradients(const DiscParams& disc, const GeneratorParams& gen,
                                        const Matrix& z, const std::vector<int>& y,
                                        double f_rate, Method method, LossKind kind,
                                        std::optional<double> topk_fraction = std::nullopt) {
  GenStep step;
  GenTrace gtr = generate_traced(gen, z, y);
  const LabeledBatch fake{gtr.output(), y};
  DiscTrace dtr;
  step.out = discriminate_traced(disc, fake, dtr);

  const std::size_t b = fake.size();
  const std::size_t k = static_cast<std::size_t>(std::floor(static_cast<double>(b) * f_rate));
  step.split = detail::select_pool(step.out.conditional, method, k);

  const Channel base = detail::base_channel(method);
  const std::vector<double> scores = detail::mixed_scores(step.out, step.split, base);
  const GenLossResult loss = loss_generator(scores, kind);
  step.loss = loss.value;

  std::vector<double> dscore = loss.dfake;
  if (topk_fraction) {
    const std::size_t keep = static_cast<std::size_t>(
        std::floor(static_cast<double>(b) * *topk_fraction));
    const SelectionSplit filter = topk_generated_filter(step.out.total, keep);
    for (std::size_t i : filter.complement) dscore[i] = 0.0;
    step.zeroed = filter.complement.size();
  }

  const detail::ChannelSeeds seeds = detail::route_seeds(dscore, step.split, base);
  const DiscGrads dg = disc_backward(disc, dtr, seeds.total, seeds.marginal, seeds.conditional);
  step.grads = generator_backward(gen, gtr, dg.dinput);
  return step;
}

// --- optimizers over the composite parameter sets ------------------------------

struct DiscOptimizer {
  AdamState state;

  static DiscOptimizer init(const DiscParams& disc, AdamConfig cfg) {
    DiscOptimizer opt;
    std::vector<const Matrix*> params = parameter_list(disc.phi);
    for (const Matrix* p : parameter_list(disc.psi)) params.push_back(p);
    if (disc.variant == DiscVariant::Approx) {
      params.push_back(&disc.v);
    } else {
      params.push_back(&disc.v_p);
      params.push_back(&disc.v_g);
    }
    opt.state = AdamState::for_params(params, cfg);
    return opt;
  }

  void apply(DiscParams& disc, const DiscGrads& grads, bool ascent) {
    std::vector<Matrix*> params = parameter_list(disc.phi);
    for (Matrix* p : parameter_list(disc.psi)) params.push_back(p);
    std::vector<const Matrix*> gs = gradient_list(grads.phi);
    for (const Matrix* g : gradient_list(grads.psi)) gs.push_back(g);
    if (disc.variant == DiscVariant::Approx) {
      params.push_back(&disc.v);
      gs.push_back(&grads.dv);
    } else {
      params.push_back(&disc.v_p);
      params.push_back(&disc.v_g);
      gs.push_back(&grads.dv_p);
      gs.push_back(&grads.dv_g);
    }
    adam_step_params(params, gs, state, ascent);
  }
};

struct GenOptimizer {
  AdamState state;

  static GenOptimizer init(const GeneratorParams& gen, AdamConfig cfg) {
    GenOptimizer opt;
    std::vector<const Matrix*> params{&gen.embedding};
    for (const Matrix* p : parameter_list(gen.body)) params.push_back(p);
    opt.state = AdamState::for_params(params, cfg);
    return opt;
  }

  void apply(GeneratorParams& gen, const GenGrads& grads, bool ascent) {
    std::vector<Matrix*> params{&gen.embedding};
    for (Matrix* p : parameter_list(gen.body)) params.push_back(p);
    std::vector<const Matrix*> gs{&grads.dembedding};
    for (const Matrix* g : gradient_list(grads.body)) gs.push_back(g);
    adam_step_params(params, gs, state, ascent);
  }
};

// One ascent Adam update of the discriminator (Adam realizes the + step of
// the selective update rule).
inline DiscStep sfl_discriminator_step(DiscParams& disc, DiscOptimizer& opt,
                                       const LabeledBatch& real, const LabeledBatch& fake,
                                       double f_rate, Method method, LossKind kind,
                                       const RankTable* table = nullptr,
                                       const std::vector<std::size_t>* real_positions = nullptr) {
  DiscStep step = discriminator_step_gradients(disc, real, fake, f_rate, method, kind, table,
                                               real_positions);
  if (!std::isfinite(step.loss))
    throw NumericError("sfl_discriminator_step: non-finite loss");
  opt.apply(disc, step.grads, /*ascent=*/true);
  return step;
}

// One descent Adam update of the generator.
inline GenStep sfl_generator_step(DiscParams& disc, GeneratorParams& gen, GenOptimizer& opt,
                                  const Matrix& z, const std::vector<int>& y, double f_rate,
                                  Method method, LossKind kind,
                                  std::optional<double> topk_fraction = std::nullopt) {
  GenStep step = generator_step_gradients(disc, gen, z, y, f_rate, method, kind, topk_fraction);
  if (!std::isfinite(step.loss)) throw NumericError("sfl_generator_step: non-finite loss");
  opt.apply(gen, step.grads, /*ascent=*/false);
  return step;
}

// --- the training loop ---------------------------------------------------------

struct CheckpointSnapshot {
  int epoch = 0;
  GeneratorParams gen;
  DiscParams disc;
};

struct RunArtifacts {
  std::vector<EpochDiagnostics> diagnostics;
  std::vector<std::pair<int, MetricsReport>> metrics;
  std::vector<CheckpointSnapshot> checkpoints;
  GeneratorParams final_gen;
  DiscParams final_disc;
  std::vector<double> epoch_seconds;
};

// Desk architecture: generator [z | 8-dim class embed] -> 64 -> 64 -> 2,
// discriminator phi 2 -> 64 -> 64 -> 16 (leaky relu), psi 16 -> 1,
// class embeddings of width 16.
inline GeneratorParams make_generator(std::size_t classes, std::size_t latent_dim, Rng& rng) {
  GeneratorParams gen;
  const std::size_t embed_dim = 8;
  gen.embedding = Matrix(classes, embed_dim);
  const double stddev = std::sqrt(2.0 / static_cast<double>(embed_dim));
  for (std::size_t i = 0; i < gen.embedding.size(); ++i)
    gen.embedding.data()[i] = stddev * rng.normal();
  gen.body = DenseNet::make({latent_dim + embed_dim, 64, 64, 2},
                            {Activation::Relu, Activation::Relu, Activation::Identity}, rng);
  return gen;
}

inline DiscParams make_discriminator(std::size_t classes, DiscVariant variant, Rng& rng) {
  DiscParams disc;
  disc.phi = DenseNet::make({2, 64, 64, 16},
                            {Activation::LeakyRelu, Activation::LeakyRelu, Activation::LeakyRelu},
                            rng);
  disc.psi = DenseNet::make({16, 1}, {Activation::Identity}, rng);
  disc.variant = variant;
  const std::size_t fd = 16;
  const double stddev = std::sqrt(2.0 / static_cast<double>(fd));
  auto init_embed = [&](Matrix& m) {
    m = Matrix(classes, fd);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  };
  if (variant == DiscVariant::Approx) {
    init_embed(disc.v);
  } else {
    init_embed(disc.v_p);
    init_embed(disc.v_g);
  }
  return disc;
}

namespace detail {

class BatchCursor {
 public:
  BatchCursor(std::size_t n, Rng rng) : order_(n), rng_(rng), pos_(n) {
    std::iota(order_.begin(), order_.end(), 0);
  }

  // next `count` positions into the training subset, reshuffling as needed
  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ >= order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_;
};

inline Matrix sample_latents(Rng& rng, std::size_t n, std::size_t dim) {
  Matrix z(n, dim);
  for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  return z;
}

inline std::vector<int> sample_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = rng.uniform_int(static_cast<int>(classes));
  return y;
}

}  // namespace detail

// Full SFL training run. Deterministic per config.seed. The rank table is
// required for sfl_plus; the classifier, when given, provides IS at each
// metric checkpoint.
inline RunArtifacts train(const TrainerConfig& cfg, const Dataset& ds,
                          const RankTable* rank_table = nullptr,
                          const DeskClassifier* classifier = nullptr) {
  cfg.validate();
  require(ds.size() > 0, "train: empty dataset");
  if (cfg.method == Method::SflPlus)
    require(rank_table != nullptr, "train: sfl_plus requires a rank table");

  const std::vector<std::size_t> train_rows = ds.train_indices();
  require(!train_rows.empty(), "train: no training rows");
  const std::size_t classes = ds.class_count;

  Rng root(cfg.seed);
  Rng init_g = root.split(0);
  Rng init_d = root.split(1);
  Rng order_rng = root.split(2);
  Rng z_rng = root.split(3);
  Rng label_rng = root.split(4);
  const Rng eval_root = root.split(5);

  RunArtifacts art;
  art.final_gen = make_generator(classes, cfg.latent_dim, init_g);
  art.final_disc = make_discriminator(classes, cfg.disc_variant, init_d);
  GeneratorParams& gen = art.final_gen;
  DiscParams& disc = art.final_disc;

  DiscOptimizer d_opt = DiscOptimizer::init(disc, AdamConfig{cfg.alpha_d, 0.0, 0.999, 1e-8});
  GenOptimizer g_opt = GenOptimizer::init(gen, AdamConfig{cfg.alpha_g, 0.0, 0.999, 1e-8});

  const FocusSchedule sched = FocusSchedule::make(cfg.nu, std::max(1, cfg.e_max));
  detail::BatchCursor cursor(train_rows.size(), order_rng);

  const Matrix heldout_x = ds.gather(ds.heldout_indices());

  auto evaluate = [&](int epoch) {
    art.checkpoints.push_back(CheckpointSnapshot{epoch, gen, disc});
    if (heldout_x.rows() <= cfg.metric_k || cfg.n_eval <= cfg.metric_k) return;
    // identical eval latents, labels, and held-out subset at every
    // checkpoint, so the metric series compares models, not eval draws
    Rng eval_rng = eval_root.split(0);
    const std::size_t n_fake = cfg.n_eval;
    const Matrix z = detail::sample_latents(eval_rng, n_fake, cfg.latent_dim);
    const std::vector<int> y = detail::sample_labels(eval_rng, n_fake, classes);
    const LabeledBatch fake = generate(gen, z, y);
    Matrix real = heldout_x;
    if (real.rows() > cfg.n_eval) {
      std::vector<std::size_t> rows(heldout_x.rows());
      std::iota(rows.begin(), rows.end(), 0);
      eval_rng.shuffle(rows);
      rows.resize(cfg.n_eval);
      Matrix sub(rows.size(), heldout_x.cols());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < heldout_x.cols(); ++j) sub(i, j) = heldout_x(rows[i], j);
      real = std::move(sub);
    }
    Matrix probs;
    const Matrix* probs_ptr = nullptr;
    if (classifier) {
      probs = classifier_probs(*classifier, fake.x);
      probs_ptr = &probs;
    }
    art.metrics.emplace_back(epoch, compute_metrics(real, fake.x, cfg.metric_k, probs_ptr));
  };

  evaluate(0);

  for (int epoch = 1; epoch <= cfg.e_max; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double f_rate = sched.focusing_rate(epoch);
    DiscStep last_d;
    GenStep last_g;
    for (int iter = 0; iter < cfg.n_max; ++iter) {
      for (int s = 0; s < cfg.d_steps; ++s) {
        const std::vector<std::size_t> positions = cursor.next(cfg.batch);
        std::vector<std::size_t> rows(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i) rows[i] = train_rows[positions[i]];
        LabeledBatch real;
        real.x = ds.gather(rows);
        real.y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) real.y[i] = ds.y[rows[i]];

        const Matrix z = detail::sample_latents(z_rng, cfg.batch, cfg.latent_dim);
        const std::vector<int> yf = detail::sample_labels(label_rng, cfg.batch, classes);
        const LabeledBatch fake = generate(gen, z, yf);
        last_d = sfl_discriminator_step(disc, d_opt, real, fake, f_rate, cfg.method, cfg.loss,
                                        rank_table, &positions);
      }
      const Matrix z = detail::sample_latents(z_rng, cfg.batch, cfg.latent_dim);
      const std::vector<int> yg = detail::sample_labels(label_rng, cfg.batch, classes);
      last_g = sfl_generator_step(disc, gen, g_opt, z, yg, f_rate, cfg.method, cfg.loss,
                                  cfg.topk_fraction);
    }

    EpochDiagnostics diag;
    diag.epoch = epoch;
    diag.f = f_rate;
    diag.loss_d = last_d.loss;
    diag.loss_g = last_g.loss;
    diag.dc_selected_real = pool_stats(last_d.real_out.conditional, last_d.real_split.selected);
    diag.dc_selected_fake = pool_stats(last_d.fake_out.conditional, last_d.fake_split.selected);
    diag.dc_unselected_real =
        pool_stats(last_d.real_out.conditional, last_d.real_split.complement);
    diag.dc_unselected_fake =
        pool_stats(last_d.fake_out.conditional, last_d.fake_split.complement);
    diag.dp = distinguishing_power(last_d.real_out, last_d.fake_out, last_d.real_split,
                                   last_d.fake_split);
    art.diagnostics.push_back(diag);
    art.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    if (epoch % cfg.eval_every == 0 || epoch == cfg.e_max) evaluate(epoch);
  }
  return art;
}

// Checkpoint-time diagnostic used for the self-diagnosis claims: pools are the
// top-`fraction` of each side by conditional score.
struct DcDiagnostics {
  double var_selected_real = 0.0;
  double var_selected_fake = 0.0;
  DistinguishingPower dp;
  std::optional<double> cond_share_selected;  // conditional fraction of the selected-pool gap
};

inline DcDiagnostics evaluate_dc_diagnostics(const DiscParams& disc, const LabeledBatch& real,
                                             const LabeledBatch& fake, double fraction) {
  const DiscOutput out_r = discriminate(disc, real);
  const DiscOutput out_f = discriminate(disc, fake);
  const std::size_t k_r = static_cast<std::size_t>(
      std::floor(static_cast<double>(real.size()) * fraction));
  const std::size_t k_f = static_cast<std::size_t>(
      std::floor(static_cast<double>(fake.size()) * fraction));
  const SelectionSplit sr = top_k_split(out_r.conditional, k_r);
  const SelectionSplit sf = top_k_split(out_f.conditional, k_f);
  DcDiagnostics d;
  d.var_selected_real = pool_stats(out_r.conditional, sr.selected).var.value_or(0.0);
  d.var_selected_fake = pool_stats(out_f.conditional, sf.selected).var.value_or(0.0);
  d.dp = distinguishing_power(out_r, out_f, sr, sf);
  if (d.dp.cond_selected && d.dp.marg_selected) {
    const double total = *d.dp.cond_selected + *d.dp.marg_selected;
    if (total != 0.0) d.cond_share_selected = *d.dp.cond_selected / total;
  }
  return d;
}

// --- diagnostics CSV -----------------------------------------------------------

inline std::string format_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

inline std::string diagnostics_csv(const std::vector<EpochDiagnostics>& rows) {
  std::ostringstream os;
  os << "epoch,F,loss_D,loss_G,dc_var_selected_real,dc_var_selected_fake,"
        "dp_cond_selected,dp_marg_selected,dp_cond_unselected,dp_marg_unselected\n";
  char buf[40];
  for (const EpochDiagnostics& d : rows) {
    os << d.epoch << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", d.f);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", d.loss_d);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", d.loss_g);
    os << buf << ",";
    os << format_cell(d.dc_selected_real.var) << ",";
    os << format_cell(d.dc_selected_fake.var) << ",";
    os << format_cell(d.dp.cond_selected) << ",";
    os << format_cell(d.dp.marg_selected) << ",";
    os << format_cell(d.dp.cond_unselected) << ",";
    os << format_cell(d.dp.marg_unselected) << "\n";
  }
  return os.str();
}

inline std::string metrics_csv(const std::vector<std::pair<int, MetricsReport>>& rows) {
  std::ostringstream os;
  os << "epoch,is,fid,precision,recall,density,coverage,n_real,n_fake,k\n";
  char buf[40];
  auto put = [&](double v) {
    if (std::isnan(v)) return std::string();
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& [epoch, r] : rows) {
    os << epoch << "," << put(r.is) << "," << put(r.fid) << "," << put(r.precision) << ","
       << put(r.recall) << "," << put(r.density) << "," << put(r.coverage) << "," << r.n_real
       << "," << r.n_fake << "," << r.k << "\n";
  }
  return os.str();
}

}  // namespace sfl
