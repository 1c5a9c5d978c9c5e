#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sfl/nn.hpp"

namespace sfl {

enum class LossKind { Bce, Hinge };
enum class DiscVariant { Approx, Exact };

inline const char* loss_name(LossKind k) { return k == LossKind::Bce ? "bce" : "hinge"; }
inline const char* variant_name(DiscVariant v) { return v == DiscVariant::Approx ? "approx" : "exact"; }

struct LabeledBatch {
  Matrix x;            // N x data_dim
  std::vector<int> y;  // class labels

  std::size_t size() const { return x.rows(); }
};

// --- generator -------------------------------------------------------------

struct GeneratorParams {
  Matrix embedding;  // C x embed_dim, one row per class
  DenseNet body;     // maps [z | embed(y)] -> data space

  std::size_t class_count() const { return embedding.rows(); }
  std::size_t embed_dim() const { return embedding.cols(); }
  std::size_t latent_dim() const { return body.input_dim() - embedding.cols(); }
  std::size_t data_dim() const { return body.output_dim(); }
};

struct GenTrace {
  ForwardTrace body;
  std::vector<int> y;
  std::size_t latent_dim = 0;

  const Matrix& output() const { return body.output(); }
};

inline void check_labels(const std::vector<int>& y, std::size_t class_count) {
  for (int label : y)
    require(label >= 0 && static_cast<std::size_t>(label) < class_count,
            "label out of range: " + std::to_string(label));
}

inline GenTrace generate_traced(const GeneratorParams& gen, const Matrix& z,
                                const std::vector<int>& y) {
  require(z.rows() == y.size(), "generate: z rows must match label count");
  require(z.cols() == gen.latent_dim(), "generate: latent width mismatch");
  check_labels(y, gen.class_count());
  Matrix input(z.rows(), gen.latent_dim() + gen.embed_dim());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double* row = input.row_ptr(i);
    const double* zrow = z.row_ptr(i);
    for (std::size_t j = 0; j < z.cols(); ++j) row[j] = zrow[j];
    const double* erow = gen.embedding.row_ptr(static_cast<std::size_t>(y[i]));
    for (std::size_t j = 0; j < gen.embed_dim(); ++j) row[z.cols() + j] = erow[j];
  }
  GenTrace tr;
  tr.body = forward(gen.body, input);
  tr.y = y;
  tr.latent_dim = gen.latent_dim();
  return tr;
}

inline LabeledBatch generate(const GeneratorParams& gen, const Matrix& z,
                             const std::vector<int>& y) {
  GenTrace tr = generate_traced(gen, z, y);
  return LabeledBatch{tr.body.output(), y};
}

struct GenGrads {
  GradientSet body;
  Matrix dembedding;  // C x embed_dim
};

// Backprop d(loss)/d(sample) through the generator body and label embedding.
inline GenGrads generator_backward(const GeneratorParams& gen, const GenTrace& tr,
                                   const Matrix& upstream) {
  GenGrads g;
  g.body = backward(gen.body, tr.body, upstream);
  g.dembedding = Matrix(gen.embedding.rows(), gen.embedding.cols());
  for (std::size_t i = 0; i < tr.y.size(); ++i) {
    double* erow = g.dembedding.row_ptr(static_cast<std::size_t>(tr.y[i]));
    const double* drow = g.body.dinput.row_ptr(i);
    for (std::size_t j = 0; j < gen.embed_dim(); ++j) erow[j] += drow[tr.latent_dim + j];
  }
  return g;
}

// --- projection discriminator ------------------------------------------------

struct DiscParams {
  DenseNet phi;  // data -> feature vector
  DenseNet psi;  // feature -> scalar (marginal head)
  DiscVariant variant = DiscVariant::Approx;
  Matrix v;          // approx: C x feature_dim
  Matrix v_p, v_g;   // exact: two C x feature_dim embeddings

  std::size_t class_count() const {
    return variant == DiscVariant::Approx ? v.rows() : v_p.rows();
  }
  std::size_t feature_dim() const { return phi.output_dim(); }

  void validate() const {
    phi.validate();
    psi.validate();
    require(psi.input_dim() == phi.output_dim(), "disc: psi does not read phi features");
    require(psi.output_dim() == 1, "disc: psi must be scalar");
    if (variant == DiscVariant::Approx) {
      require(v.cols() == feature_dim(), "disc: embedding width != feature dim");
    } else {
      require(v_p.cols() == feature_dim() && v_g.cols() == feature_dim(),
              "disc: embedding width != feature dim");
      require(v_p.rows() == v_g.rows(), "disc: exact variant needs matching embeddings");
    }
  }
};

// Per-sample scores. total = marginal + conditional from the same forward pass.
struct DiscOutput {
  std::vector<double> total, marginal, conditional;

  std::size_t size() const { return total.size(); }
};

struct DiscTrace {
  ForwardTrace phi;
  ForwardTrace psi;
  std::vector<int> y;
  Matrix softmax_p, softmax_g;  // exact variant only, N x C
};

namespace detail {
// row softmax of logits s (max-shifted); also returns logsumexp per row
inline void row_softmax(const Matrix& logits, Matrix& soft, std::vector<double>& lse) {
  soft = Matrix(logits.rows(), logits.cols());
  lse.assign(logits.rows(), 0.0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* srow = logits.row_ptr(i);
    double mx = srow[0];
    for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, srow[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) sum += std::exp(srow[j] - mx);
    lse[i] = mx + std::log(sum);
    double* orow = soft.row_ptr(i);
    for (std::size_t j = 0; j < logits.cols(); ++j) orow[j] = std::exp(srow[j] - lse[i]);
  }
}
}  // namespace detail

inline DiscOutput discriminate_traced(const DiscParams& disc, const LabeledBatch& batch,
                                      DiscTrace& tr) {
  check_labels(batch.y, disc.class_count());
  tr.phi = forward(disc.phi, batch.x);
  const Matrix& f = tr.phi.output();
  if (!f.all_finite()) throw NumericError("discriminate: non-finite feature output");
  tr.psi = forward(disc.psi, f);
  tr.y = batch.y;

  const std::size_t n = batch.size();
  DiscOutput out;
  out.total.resize(n);
  out.marginal.resize(n);
  out.conditional.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.marginal[i] = tr.psi.output()(i, 0);

  if (disc.variant == DiscVariant::Approx) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* vrow = disc.v.row_ptr(static_cast<std::size_t>(batch.y[i]));
      const double* frow = f.row_ptr(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < f.cols(); ++j) acc += vrow[j] * frow[j];
      out.conditional[i] = acc;
    }
  } else {
    // logits under each embedding; conditional term is the log-likelihood
    // ratio with both normalization constants kept
    Matrix sp = matmul_nt(f, disc.v_p);
    Matrix sg = matmul_nt(f, disc.v_g);
    std::vector<double> lse_p, lse_g;
    detail::row_softmax(sp, tr.softmax_p, lse_p);
    detail::row_softmax(sg, tr.softmax_g, lse_g);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(batch.y[i]);
      out.conditional[i] = (sp(i, c) - sg(i, c)) - (lse_p[i] - lse_g[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.total[i] = out.marginal[i] + out.conditional[i];
  return out;
}

inline DiscOutput discriminate(const DiscParams& disc, const LabeledBatch& batch) {
  DiscTrace tr;
  return discriminate_traced(disc, batch, tr);
}

struct DiscGrads {
  GradientSet phi, psi;
  Matrix dv, dv_p, dv_g;
  Matrix dinput;  // d loss / d x, N x data_dim
};

// Backprop from per-sample upstream gradients on each score channel.
// An upstream on `total` feeds both heads, by the decomposition.
inline DiscGrads disc_backward(const DiscParams& disc, const DiscTrace& tr,
                               const std::vector<double>& up_total,
                               const std::vector<double>& up_marginal,
                               const std::vector<double>& up_conditional) {
  const std::size_t n = tr.y.size();
  require(up_total.size() == n && up_marginal.size() == n && up_conditional.size() == n,
          "disc_backward: upstream sizes mismatch");
  const Matrix& f = tr.phi.output();
  const std::size_t fd = f.cols();

  std::vector<double> g_cond(n), g_marg(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_cond[i] = up_conditional[i] + up_total[i];
    g_marg[i] = up_marginal[i] + up_total[i];
  }

  DiscGrads out;

  Matrix psi_up(n, 1);
  for (std::size_t i = 0; i < n; ++i) psi_up(i, 0) = g_marg[i];
  out.psi = backward(disc.psi, tr.psi, psi_up);

  Matrix df = out.psi.dinput;  // N x feature_dim, marginal head contribution

  if (disc.variant == DiscVariant::Approx) {
    out.dv = Matrix(disc.v.rows(), disc.v.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(tr.y[i]);
      const double g = g_cond[i];
      const double* frow = f.row_ptr(i);
      double* dvrow = out.dv.row_ptr(c);
      const double* vrow = disc.v.row_ptr(c);
      double* dfrow = df.row_ptr(i);
      for (std::size_t j = 0; j < fd; ++j) {
        dvrow[j] += g * frow[j];
        dfrow[j] += g * vrow[j];
      }
    }
  } else {
    const std::size_t classes = disc.v_p.rows();
    out.dv_p = Matrix(classes, fd);
    out.dv_g = Matrix(classes, fd);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(tr.y[i]);
      const double g = g_cond[i];
      const double* frow = f.row_ptr(i);
      double* dfrow = df.row_ptr(i);
      // label-row term
      for (std::size_t j = 0; j < fd; ++j) {
        out.dv_p.row_ptr(c)[j] += g * frow[j];
        out.dv_g.row_ptr(c)[j] -= g * frow[j];
        dfrow[j] += g * (disc.v_p.row_ptr(c)[j] - disc.v_g.row_ptr(c)[j]);
      }
      // normalization constants: d lse_p / d v_p[k] = softmax_p[k] * f
      for (std::size_t k = 0; k < classes; ++k) {
        const double wp = g * tr.softmax_p(i, k);
        const double wg = g * tr.softmax_g(i, k);
        double* dvp = out.dv_p.row_ptr(k);
        double* dvg = out.dv_g.row_ptr(k);
        const double* vp = disc.v_p.row_ptr(k);
        const double* vg = disc.v_g.row_ptr(k);
        for (std::size_t j = 0; j < fd; ++j) {
          dvp[j] -= wp * frow[j];
          dvg[j] += wg * frow[j];
          dfrow[j] -= wp * vp[j];
          dfrow[j] += wg * vg[j];
        }
      }
    }
  }

  out.phi = backward(disc.phi, tr.phi, df);
  out.dinput = out.phi.dinput;
  return out;
}

// --- adversarial losses ------------------------------------------------------

namespace detail {
inline double softplus(double x) {  // log(1 + e^x), overflow-safe
  return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0);
}
inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
}  // namespace detail

struct LossResult {
  double value = 0.0;
  std::vector<double> dreal, dfake;  // d(loss)/d(score), mean factor included
};

inline LossResult loss_discriminator(const std::vector<double>& real,
                                     const std::vector<double>& fake, LossKind kind) {
  require(!real.empty() && !fake.empty(), "loss_discriminator: empty score list");
  LossResult r;
  r.dreal.resize(real.size());
  r.dfake.resize(fake.size());
  const double nr = static_cast<double>(real.size());
  const double nf = static_cast<double>(fake.size());
  double acc_r = 0.0, acc_f = 0.0;
  if (kind == LossKind::Bce) {
    for (std::size_t i = 0; i < real.size(); ++i) {
      acc_r += detail::softplus(-real[i]);
      r.dreal[i] = (detail::sigmoid(real[i]) - 1.0) / nr;
    }
    for (std::size_t i = 0; i < fake.size(); ++i) {
      acc_f += detail::softplus(fake[i]);
      r.dfake[i] = detail::sigmoid(fake[i]) / nf;
    }
  } else {
    for (std::size_t i = 0; i < real.size(); ++i) {
      acc_r += std::max(0.0, 1.0 - real[i]);
      r.dreal[i] = (real[i] < 1.0 ? -1.0 : 0.0) / nr;
    }
    for (std::size_t i = 0; i < fake.size(); ++i) {
      acc_f += std::max(0.0, 1.0 + fake[i]);
      r.dfake[i] = (fake[i] > -1.0 ? 1.0 : 0.0) / nf;
    }
  }
  r.value = acc_r / nr + acc_f / nf;
  return r;
}

struct GenLossResult {
  double value = 0.0;
  std::vector<double> dfake;
};

inline GenLossResult loss_generator(const std::vector<double>& fake, LossKind kind) {
  require(!fake.empty(), "loss_generator: empty score list");
  GenLossResult r;
  r.dfake.resize(fake.size());
  const double n = static_cast<double>(fake.size());
  double acc = 0.0;
  if (kind == LossKind::Bce) {  // non-saturating
    for (std::size_t i = 0; i < fake.size(); ++i) {
      acc += detail::softplus(-fake[i]);
      r.dfake[i] = (detail::sigmoid(fake[i]) - 1.0) / n;
    }
    r.value = acc / n;
  } else {
    for (std::size_t i = 0; i < fake.size(); ++i) {
      acc += fake[i];
      r.dfake[i] = -1.0 / n;
    }
    r.value = -acc / n;
  }
  return r;
}

// --- checkpoint io -----------------------------------------------------------

inline void save_generator(std::ostream& os, const GeneratorParams& gen) {
  os << "generator\n";
  write_matrix(os, gen.embedding);
  save_densenet(os, gen.body);
}

inline GeneratorParams load_generator(std::istream& is) {
  expect_token(is, "generator");
  GeneratorParams gen;
  gen.embedding = read_matrix(is);
  gen.body = load_densenet(is);
  return gen;
}

inline void save_discriminator(std::ostream& os, const DiscParams& disc) {
  os << "discriminator " << variant_name(disc.variant) << "\n";
  save_densenet(os, disc.phi);
  save_densenet(os, disc.psi);
  if (disc.variant == DiscVariant::Approx) {
    write_matrix(os, disc.v);
  } else {
    write_matrix(os, disc.v_p);
    write_matrix(os, disc.v_g);
  }
}

inline DiscParams load_discriminator(std::istream& is) {
  expect_token(is, "discriminator");
  std::string variant;
  if (!(is >> variant)) throw std::runtime_error("checkpoint: bad discriminator header");
  DiscParams disc;
  disc.variant = variant == "approx" ? DiscVariant::Approx : DiscVariant::Exact;
  disc.phi = load_densenet(is);
  disc.psi = load_densenet(is);
  if (disc.variant == DiscVariant::Approx) {
    disc.v = read_matrix(is);
  } else {
    disc.v_p = read_matrix(is);
    disc.v_g = read_matrix(is);
  }
  disc.validate();
  return disc;
}

}  // namespace sfl
