// Test-only oracles, independent of the library paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sfl/gan.hpp"
#include "sfl/matrix.hpp"
#include "sfl/nn.hpp"

namespace oracle {

// Straight-line re-computation of a dense forward pass, one neuron at a time.
inline sfl::Matrix straight_line_forward(const sfl::DenseNet& net, const sfl::Matrix& batch) {
  sfl::Matrix cur = batch;
  for (const sfl::DenseLayer& layer : net.layers) {
    sfl::Matrix next(cur.rows(), layer.w.cols());
    for (std::size_t i = 0; i < cur.rows(); ++i) {
      for (std::size_t j = 0; j < layer.w.cols(); ++j) {
        double z = layer.b(0, j);
        for (std::size_t k = 0; k < layer.w.rows(); ++k) z += cur(i, k) * layer.w(k, j);
        next(i, j) = sfl::apply_activation(layer.act, z);
      }
    }
    cur = next;
  }
  return cur;
}

// Central finite differences of an arbitrary scalar function over an ordered
// parameter list.
inline std::vector<sfl::Matrix> fd_gradients(const std::vector<sfl::Matrix*>& params,
                                             const std::function<double()>& scalar, double h) {
  std::vector<sfl::Matrix> grads;
  for (sfl::Matrix* p : params) {
    sfl::Matrix g(p->rows(), p->cols());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->data()[i];
      p->data()[i] = saved + h;
      const double up = scalar();
      p->data()[i] = saved - h;
      const double dn = scalar();
      p->data()[i] = saved;
      g.data()[i] = (up - dn) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double max_rel_error(const std::vector<sfl::Matrix>& a, const std::vector<sfl::Matrix>& b) {
  double worst = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m)
    for (std::size_t i = 0; i < a[m].size(); ++i) {
      const double x = a[m].data()[i], y = b[m].data()[i];
      const double err = std::fabs(x - y) / std::max({std::fabs(x), std::fabs(y), 1e-8});
      worst = std::max(worst, err);
    }
  return worst;
}

// Like max_rel_error, but an exactly-cancelled analytic gradient compared
// against bare finite-difference rounding noise counts as agreement.
inline double max_rel_error_fd(const std::vector<sfl::Matrix>& analytic,
                               const std::vector<sfl::Matrix>& numeric) {
  double worst = 0.0;
  for (std::size_t m = 0; m < analytic.size(); ++m)
    for (std::size_t i = 0; i < analytic[m].size(); ++i) {
      const double a = analytic[m].data()[i], n = numeric[m].data()[i];
      if (a == 0.0 && std::fabs(n) < 1e-9) continue;
      const double err = std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-8});
      worst = std::max(worst, err);
    }
  return worst;
}

inline double max_abs_diff(const std::vector<sfl::Matrix>& a, const std::vector<sfl::Matrix>& b) {
  double worst = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m)
    for (std::size_t i = 0; i < a[m].size(); ++i)
      worst = std::max(worst, std::fabs(a[m].data()[i] - b[m].data()[i]));
  return worst;
}

// O(N*M*N) brute-force precision/recall/density/coverage with closed balls.
struct BruteMetrics {
  double precision, recall, density, coverage;
};

inline double kth_nn_sq(const sfl::Matrix& pts, std::size_t i, std::size_t k) {
  std::vector<double> d;
  for (std::size_t j = 0; j < pts.rows(); ++j) {
    if (j == i) continue;
    double acc = 0.0;
    for (std::size_t c = 0; c < pts.cols(); ++c) {
      const double t = pts(i, c) - pts(j, c);
      acc += t * t;
    }
    d.push_back(acc);
  }
  std::sort(d.begin(), d.end());
  return d[k - 1];
}

inline BruteMetrics brute_prdc(const sfl::Matrix& real, const sfl::Matrix& fake, std::size_t k) {
  const std::size_t n = real.rows(), m = fake.rows(), dim = real.cols();
  std::vector<double> r_real(n), r_fake(m);
  for (std::size_t i = 0; i < n; ++i) r_real[i] = kth_nn_sq(real, i, k);
  for (std::size_t j = 0; j < m; ++j) r_fake[j] = kth_nn_sq(fake, j, k);
  auto d2 = [&](const sfl::Matrix& a, std::size_t i, const sfl::Matrix& b, std::size_t j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double t = a(i, c) - b(j, c);
      acc += t * t;
    }
    return acc;
  };
  std::size_t p_hits = 0, r_hits = 0, pairs = 0, covered = 0;
  for (std::size_t j = 0; j < m; ++j) {
    bool in = false;
    for (std::size_t i = 0; i < n; ++i)
      if (d2(fake, j, real, i) <= r_real[i]) in = true;
    if (in) ++p_hits;
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool in = false;
    for (std::size_t j = 0; j < m; ++j)
      if (d2(real, i, fake, j) <= r_fake[j]) in = true;
    if (in) ++r_hits;
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < m; ++j)
      if (d2(fake, j, real, i) <= r_real[i]) {
        ++pairs;
        any = true;
      }
    if (any) ++covered;
  }
  BruteMetrics out;
  out.precision = static_cast<double>(p_hits) / static_cast<double>(m);
  out.recall = static_cast<double>(r_hits) / static_cast<double>(n);
  out.density = static_cast<double>(pairs) / (static_cast<double>(k) * static_cast<double>(m));
  out.coverage = static_cast<double>(covered) / static_cast<double>(n);
  return out;
}

// Distance of the fixture from every finite-difference hazard: hinge-kink
// clearance of all score channels and relu-kink clearance of every
// pre-activation.
inline double fd_fixture_margin(const sfl::DiscOutput& out_r, const sfl::DiscOutput& out_f,
                                const sfl::DiscTrace& tr_r, const sfl::DiscTrace& tr_f) {
  double margin = 1e9;
  for (const sfl::DiscOutput* out : {&out_r, &out_f})
    for (const auto* ch : {&out->total, &out->marginal, &out->conditional})
      for (double s : *ch)
        margin = std::min({margin, std::fabs(s - 1.0), std::fabs(s + 1.0)});
  for (const sfl::DiscTrace* tr : {&tr_r, &tr_f})
    for (const sfl::ForwardTrace* ft : {&tr->phi, &tr->psi})
      for (const sfl::Matrix& z : ft->pre)
        for (std::size_t i = 0; i < z.size(); ++i)
          margin = std::min(margin, std::fabs(z.data()[i]));
  return margin;
}

inline double min_nonzero_magnitude(const std::vector<sfl::Matrix>& mats) {
  double smallest = 1e9;
  for (const sfl::Matrix& m : mats)
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double a = std::fabs(m.data()[i]);
      if (a > 0.0) smallest = std::min(smallest, a);
    }
  return smallest;
}

inline sfl::Matrix random_matrix(sfl::Rng& rng, std::size_t rows, std::size_t cols,
                                 double scale = 1.0) {
  sfl::Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline std::vector<sfl::Matrix*> disc_param_ptrs(sfl::DiscParams& disc) {
  std::vector<sfl::Matrix*> params = sfl::parameter_list(disc.phi);
  for (sfl::Matrix* p : sfl::parameter_list(disc.psi)) params.push_back(p);
  if (disc.variant == sfl::DiscVariant::Approx) {
    params.push_back(&disc.v);
  } else {
    params.push_back(&disc.v_p);
    params.push_back(&disc.v_g);
  }
  return params;
}

inline std::vector<sfl::Matrix> disc_grad_values(const sfl::DiscGrads& g, sfl::DiscVariant v) {
  std::vector<sfl::Matrix> out;
  for (std::size_t l = 0; l < g.phi.dw.size(); ++l) {
    out.push_back(g.phi.dw[l]);
    out.push_back(g.phi.db[l]);
  }
  for (std::size_t l = 0; l < g.psi.dw.size(); ++l) {
    out.push_back(g.psi.dw[l]);
    out.push_back(g.psi.db[l]);
  }
  if (v == sfl::DiscVariant::Approx) {
    out.push_back(g.dv);
  } else {
    out.push_back(g.dv_p);
    out.push_back(g.dv_g);
  }
  return out;
}

}  // namespace oracle
