#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfl/matrix.hpp"
#include "sfl/rng.hpp"

namespace sfl {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { Identity, Relu, LeakyRelu, Tanh };

inline constexpr double kLeakySlope = 0.2;

inline double apply_activation(Activation act, double z) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::LeakyRelu: return z > 0.0 ? z : kLeakySlope * z;
    case Activation::Tanh: return std::tanh(z);
  }
  return z;
}

// derivative given pre-activation z and activation value a
inline double activation_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyRelu: return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::Tanh: return 1.0 - a * a;
  }
  return 1.0;
}

inline const char* activation_name(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + name);
}

struct DenseLayer {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
  Activation act = Activation::Identity;
};

struct DenseNet {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().w.rows(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().w.cols(); }

  // dims = {d0, d1, ..., dL}; acts has one entry per layer.
  // He-initialized weights, zero biases.
  static DenseNet make(const std::vector<std::size_t>& dims,
                       const std::vector<Activation>& acts, Rng& rng) {
    require(dims.size() >= 2, "DenseNet::make: need at least one layer");
    require(acts.size() == dims.size() - 1, "DenseNet::make: one activation per layer");
    DenseNet net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      DenseLayer layer;
      layer.w = Matrix(dims[l], dims[l + 1]);
      const double stddev = std::sqrt(2.0 / static_cast<double>(dims[l]));
      for (std::size_t i = 0; i < layer.w.size(); ++i) layer.w.data()[i] = stddev * rng.normal();
      layer.b = Matrix(1, dims[l + 1]);
      layer.act = acts[l];
      net.layers.push_back(std::move(layer));
    }
    return net;
  }

  void validate() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const DenseLayer& layer = layers[l];
      require(layer.b.rows() == 1 && layer.b.cols() == layer.w.cols(),
              "DenseNet: bias shape mismatch at layer " + std::to_string(l));
      if (l + 1 < layers.size())
        require(layer.w.cols() == layers[l + 1].w.rows(),
                "DenseNet: layers " + std::to_string(l) + "," + std::to_string(l + 1) +
                    " do not compose");
      if (!layer.w.all_finite() || !layer.b.all_finite())
        throw NumericError("DenseNet: non-finite parameters at layer " + std::to_string(l));
    }
  }
};

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;   // z per layer
  std::vector<Matrix> post;  // a per layer

  const Matrix& output() const { return post.empty() ? input : post.back(); }
};

inline ForwardTrace forward(const DenseNet& net, const Matrix& batch) {
  require(batch.cols() == net.input_dim(), "forward: batch width does not match input dim");
  ForwardTrace tr;
  tr.input = batch;
  const Matrix* cur = &tr.input;
  for (const DenseLayer& layer : net.layers) {
    Matrix z = matmul(*cur, layer.w);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double* zrow = z.row_ptr(i);
      const double* brow = layer.b.row_ptr(0);
      for (std::size_t j = 0; j < z.cols(); ++j) zrow[j] += brow[j];
    }
    Matrix a(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.size(); ++i) a.data()[i] = apply_activation(layer.act, z.data()[i]);
    tr.pre.push_back(std::move(z));
    tr.post.push_back(std::move(a));
    cur = &tr.post.back();
  }
  return tr;
}

struct GradientSet {
  std::vector<Matrix> dw, db;  // parallel to layers
  Matrix dinput;

  static GradientSet zeros_like(const DenseNet& net) {
    GradientSet g;
    for (const DenseLayer& layer : net.layers) {
      g.dw.emplace_back(layer.w.rows(), layer.w.cols());
      g.db.emplace_back(1, layer.b.cols());
    }
    return g;
  }

  void add(const GradientSet& o) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
      add_in_place(dw[l], o.dw[l]);
      add_in_place(db[l], o.db[l]);
    }
    if (!dinput.empty() && !o.dinput.empty()) add_in_place(dinput, o.dinput);
  }
};

// Gradients of the scalar loss whose output-gradient is `upstream`,
// w.r.t. every parameter and the input.
inline GradientSet backward(const DenseNet& net, const ForwardTrace& tr, const Matrix& upstream) {
  require(!net.layers.empty(), "backward: empty net");
  require(upstream.same_shape(tr.output()), "backward: upstream shape does not match output");
  GradientSet g;
  g.dw.resize(net.layers.size());
  g.db.resize(net.layers.size());
  Matrix delta = upstream;  // d loss / d a_l
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const DenseLayer& layer = net.layers[li];
    Matrix dz(delta.rows(), delta.cols());
    const Matrix& z = tr.pre[li];
    const Matrix& a = tr.post[li];
    for (std::size_t i = 0; i < dz.size(); ++i)
      dz.data()[i] = delta.data()[i] * activation_grad(layer.act, z.data()[i], a.data()[i]);
    const Matrix& a_prev = (li == 0) ? tr.input : tr.post[li - 1];
    g.dw[li] = matmul_tn(a_prev, dz);
    g.db[li] = column_sums(dz);
    delta = matmul_nt(dz, layer.w);
  }
  g.dinput = std::move(delta);
  return g;
}

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long step = 0;
  std::vector<Matrix> m, v;  // congruent with the parameter list

  static AdamState for_params(const std::vector<const Matrix*>& params, AdamConfig cfg) {
    AdamState st;
    st.cfg = cfg;
    for (const Matrix* p : params) {
      st.m.emplace_back(p->rows(), p->cols());
      st.v.emplace_back(p->rows(), p->cols());
    }
    return st;
  }
};

// One Adam update over an ordered parameter list. ascent=true negates the
// gradient direction, so the step climbs the function whose gradient is given.
inline void adam_step_params(const std::vector<Matrix*>& params,
                             const std::vector<const Matrix*>& grads, AdamState& st,
                             bool ascent) {
  require(params.size() == grads.size() && params.size() == st.m.size(),
          "adam_step_params: parameter/gradient/state lists differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(params[i]->same_shape(*grads[i]), "adam_step_params: gradient shape mismatch");
    if (!grads[i]->all_finite())
      throw NumericError("adam_step_params: non-finite gradient in block " + std::to_string(i));
  }
  st.step += 1;
  const double c1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    const double* gptr = grads[i]->data();
    double* m = st.m[i].data();
    double* v = st.v[i].data();
    const std::size_t n = params[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      const double g = ascent ? -gptr[j] : gptr[j];
      m[j] = st.cfg.beta1 * m[j] + (1.0 - st.cfg.beta1) * g;
      v[j] = st.cfg.beta2 * v[j] + (1.0 - st.cfg.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= st.cfg.alpha * mhat / (std::sqrt(vhat) + st.cfg.eps);
    }
  }
}

inline std::vector<Matrix*> parameter_list(DenseNet& net) {
  std::vector<Matrix*> out;
  for (DenseLayer& layer : net.layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

inline std::vector<const Matrix*> parameter_list(const DenseNet& net) {
  std::vector<const Matrix*> out;
  for (const DenseLayer& layer : net.layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

inline std::vector<const Matrix*> gradient_list(const GradientSet& g) {
  std::vector<const Matrix*> out;
  for (std::size_t l = 0; l < g.dw.size(); ++l) {
    out.push_back(&g.dw[l]);
    out.push_back(&g.db[l]);
  }
  return out;
}

inline AdamState adam_init(const DenseNet& net, AdamConfig cfg) {
  return AdamState::for_params(parameter_list(net), cfg);
}

inline void adam_step(DenseNet& net, const GradientSet& grads, AdamState& st, bool ascent) {
  for (std::size_t l = 0; l < grads.dw.size(); ++l)
    if (!grads.dw[l].all_finite() || !grads.db[l].all_finite())
      throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(l));
  adam_step_params(parameter_list(net), gradient_list(grads), st, ascent);
}

// --- gradient check ------------------------------------------------------

// Scalar probe: sum of all network outputs.
inline double probe_loss(const DenseNet& net, const Matrix& batch) {
  const ForwardTrace tr = forward(net, batch);
  double s = 0.0;
  for (std::size_t i = 0; i < tr.output().size(); ++i) s += tr.output().data()[i];
  return s;
}

inline double max_rel_error(const GradientSet& analytic, const GradientSet& numeric) {
  double worst = 0.0;
  auto upd = [&](double a, double n) {
    const double err = std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-8});
    if (err > worst) worst = err;
  };
  for (std::size_t l = 0; l < analytic.dw.size(); ++l) {
    for (std::size_t i = 0; i < analytic.dw[l].size(); ++i)
      upd(analytic.dw[l].data()[i], numeric.dw[l].data()[i]);
    for (std::size_t i = 0; i < analytic.db[l].size(); ++i)
      upd(analytic.db[l].data()[i], numeric.db[l].data()[i]);
  }
  return worst;
}

inline GradientSet numeric_gradients(DenseNet net, const Matrix& batch, double h) {
  GradientSet g = GradientSet::zeros_like(net);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto probe_param = [&](Matrix& param, Matrix& grad) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + h;
        const double up = probe_loss(net, batch);
        param.data()[i] = saved - h;
        const double dn = probe_loss(net, batch);
        param.data()[i] = saved;
        grad.data()[i] = (up - dn) / (2.0 * h);
      }
    };
    probe_param(net.layers[l].w, g.dw[l]);
    probe_param(net.layers[l].b, g.db[l]);
  }
  return g;
}

// Max relative disagreement between analytic backprop and central differences.
inline double grad_check(const DenseNet& net, const Matrix& batch, double h) {
  require(h > 0.0, "grad_check: h must be positive");
  const ForwardTrace tr = forward(net, batch);
  const Matrix ones(tr.output().rows(), tr.output().cols(), 1.0);
  const GradientSet analytic = backward(net, tr, ones);
  const GradientSet numeric = numeric_gradients(net, batch, h);
  return max_rel_error(analytic, numeric);
}

// --- checkpoint io --------------------------------------------------------
// Text format with hexfloat values; round-trips bit-exactly.

inline void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  os << buf;
}

inline double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("checkpoint: unexpected end of stream");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw std::runtime_error("checkpoint: bad numeric token '" + tok + "'");
  return v;
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
  os << "matrix " << m.rows() << " " << m.cols() << "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << " ";
      write_double(os, m(i, j));
    }
    os << "\n";
  }
}

inline void expect_token(std::istream& is, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want)
    throw std::runtime_error("checkpoint: expected '" + want + "', got '" + tok + "'");
}

inline Matrix read_matrix(std::istream& is) {
  expect_token(is, "matrix");
  std::size_t rows = 0, cols = 0;
  if (!(is >> rows >> cols)) throw std::runtime_error("checkpoint: bad matrix header");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = read_double(is);
  return m;
}

inline void save_densenet(std::ostream& os, const DenseNet& net) {
  os << "densenet " << net.layers.size() << "\n";
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    os << "layer " << l << " " << activation_name(net.layers[l].act) << "\n";
    write_matrix(os, net.layers[l].w);
    write_matrix(os, net.layers[l].b);
  }
}

inline DenseNet load_densenet(std::istream& is) {
  expect_token(is, "densenet");
  std::size_t count = 0;
  if (!(is >> count)) throw std::runtime_error("checkpoint: bad densenet header");
  DenseNet net;
  for (std::size_t l = 0; l < count; ++l) {
    expect_token(is, "layer");
    std::size_t idx = 0;
    std::string act;
    if (!(is >> idx >> act)) throw std::runtime_error("checkpoint: bad layer header");
    DenseLayer layer;
    layer.act = activation_from_name(act);
    layer.w = read_matrix(is);
    layer.b = read_matrix(is);
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

}  // namespace sfl
