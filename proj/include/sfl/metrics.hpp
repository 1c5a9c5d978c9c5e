#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sfl/matrix.hpp"
#include "sfl/nn.hpp"

namespace sfl {

struct GaussianSummary {
  std::vector<double> mean;
  Matrix cov;  // symmetric PSD

  std::size_t dim() const { return mean.size(); }
};

// Sample mean and unbiased covariance (divisor N-1), exactly symmetric.
inline GaussianSummary gaussian_fit(const Matrix& features) {
  require(features.rows() >= 2, "gaussian_fit: need at least 2 samples");
  const std::size_t n = features.rows(), d = features.cols();
  GaussianSummary g;
  g.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) g.mean[j] += features(i, j);
  for (std::size_t j = 0; j < d; ++j) g.mean[j] /= static_cast<double>(n);
  g.cov = Matrix(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += (features(i, a) - g.mean[a]) * (features(i, b) - g.mean[b]);
      const double v = acc / static_cast<double>(n - 1);
      g.cov(a, b) = v;
      g.cov(b, a) = v;
    }
  return g;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline void symmetric_eigen(Matrix a, Matrix& vecs, std::vector<double>& vals) {
  const std::size_t n = a.rows();
  require(a.cols() == n, "symmetric_eigen: matrix not square");
  vecs = Matrix::identity(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) scale = std::max(scale, std::fabs(a.data()[i]));
  if (scale == 0.0) scale = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * scale * scale) {
      vals.resize(n);
      for (std::size_t i = 0; i < n; ++i) vals[i] = a(i, i);
      return;
    }
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = vecs(i, p), viq = vecs(i, q);
          vecs(i, p) = c * vip - s * viq;
          vecs(i, q) = s * vip + c * viq;
        }
      }
  }
  throw NumericError("symmetric_eigen: no convergence after 100 sweeps");
}

namespace detail {
// Q diag(f(lambda)) Q^T for a symmetric PSD input; eigenvalues slightly below
// zero (> -1e-10) are clamped.
template <typename F>
inline Matrix symmetric_apply(const Matrix& a, F&& f) {
  Matrix q;
  std::vector<double> lam;
  symmetric_eigen(a, q, lam);
  for (double& l : lam) {
    if (l < 0.0 && l > -1e-10) l = 0.0;
    l = f(l);
  }
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += q(i, k) * lam[k] * q(j, k);
      out(i, j) = acc;
    }
  return out;
}
}  // namespace detail

// Frechet distance between two Gaussians:
// |m - m_w|^2 + Tr(C + C_w - 2 (C C_w)^{1/2}).
// The matrix square root is taken through the symmetric congruence
// C^{1/2} C_w C^{1/2}, whose trace-sqrt equals Tr((C C_w)^{1/2}).
inline double fid(const GaussianSummary& a, const GaussianSummary& b) {
  require(a.dim() == b.dim(), "fid: dimension mismatch");
  const std::size_t d = a.dim();
  double dist2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = a.mean[i] - b.mean[i];
    dist2 += t * t;
  }
  const Matrix sa = detail::symmetric_apply(a.cov, [](double l) { return std::sqrt(std::max(0.0, l)); });
  Matrix m = matmul(matmul(sa, b.cov), sa);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = avg;
      m(j, i) = avg;
    }
  Matrix q;
  std::vector<double> lam;
  symmetric_eigen(m, q, lam);
  double tr_sqrt = 0.0;
  for (double l : lam) tr_sqrt += std::sqrt(std::max(0.0, l));
  double tr_a = 0.0, tr_b = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    tr_a += a.cov(i, i);
    tr_b += b.cov(i, i);
  }
  return dist2 + tr_a + tr_b - 2.0 * tr_sqrt;
}

// --- nearest-neighbor manifolds ---------------------------------------------

// Exact per-point distance to the k-th nearest neighbor, excluding the point
// itself. Membership tests use the squared radius so they reproduce the same
// comparisons as a brute-force pass.
struct ManifoldIndex {
  Matrix points;
  std::size_t k = 0;
  std::vector<double> radius;     // NND_k
  std::vector<double> radius_sq;  // NND_k^2 as selected from squared distances
};

inline ManifoldIndex build_manifold(const Matrix& points, std::size_t k) {
  require(k >= 1, "build_manifold: k must be >= 1");
  require(points.rows() > k, "build_manifold: need more points than k");
  const std::size_t n = points.rows(), d = points.cols();
  ManifoldIndex idx;
  idx.points = points;
  idx.k = k;
  idx.radius.resize(n);
  idx.radius_sq.resize(n);
  std::vector<double> dists;
  dists.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dists.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.push_back(squared_distance(points.row_ptr(i), points.row_ptr(j), d));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    idx.radius_sq[i] = dists[k - 1];
    idx.radius[i] = std::sqrt(dists[k - 1]);
  }
  return idx;
}

// Precision: fraction of fake points inside some real-point ball.
// Recall: fraction of real points inside some fake-point ball.
inline std::pair<double, double> precision_recall(const Matrix& real, const Matrix& fake,
                                                  std::size_t k) {
  require(real.cols() == fake.cols(), "precision_recall: dimension mismatch");
  const ManifoldIndex mr = build_manifold(real, k);
  const ManifoldIndex mf = build_manifold(fake, k);
  const std::size_t n = real.rows(), m = fake.rows(), d = real.cols();
  std::size_t in_real = 0;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (squared_distance(fake.row_ptr(j), real.row_ptr(i), d) <= mr.radius_sq[i]) {
        ++in_real;
        break;
      }
    }
  }
  std::size_t in_fake = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (squared_distance(real.row_ptr(i), fake.row_ptr(j), d) <= mf.radius_sq[j]) {
        ++in_fake;
        break;
      }
    }
  }
  return {static_cast<double>(in_real) / static_cast<double>(m),
          static_cast<double>(in_fake) / static_cast<double>(n)};
}

// Density: ball-membership count normalized by k*M.
// Coverage: fraction of real points whose ball contains some fake point.
inline std::pair<double, double> density_coverage(const Matrix& real, const Matrix& fake,
                                                  std::size_t k) {
  require(real.cols() == fake.cols(), "density_coverage: dimension mismatch");
  const ManifoldIndex mr = build_manifold(real, k);
  const std::size_t n = real.rows(), m = fake.rows(), d = real.cols();
  std::size_t pairs = 0;
  std::vector<std::uint8_t> covered(n, 0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (squared_distance(fake.row_ptr(j), real.row_ptr(i), d) <= mr.radius_sq[i]) {
        ++pairs;
        covered[i] = 1;
      }
    }
  }
  std::size_t cov = 0;
  for (std::uint8_t c : covered) cov += c;
  return {static_cast<double>(pairs) / (static_cast<double>(k) * static_cast<double>(m)),
          static_cast<double>(cov) / static_cast<double>(n)};
}

// IS = exp(E_x KL(p(y|x) || p(y))), with p(y) the row mean and 0 log 0 := 0.
inline double inception_score(const Matrix& probs) {
  require(probs.rows() >= 1 && probs.cols() >= 1, "inception_score: empty matrix");
  const std::size_t m = probs.rows(), c = probs.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      require(probs(i, j) >= 0.0, "inception_score: negative probability");
      sum += probs(i, j);
    }
    require(std::fabs(sum - 1.0) <= 1e-8, "inception_score: row does not sum to 1");
  }
  std::vector<double> marginal(c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) marginal[j] += probs(i, j);
  for (std::size_t j = 0; j < c; ++j) marginal[j] /= static_cast<double>(m);
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double kl = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = probs(i, j);
      if (p > 0.0) kl += p * (std::log(p) - std::log(marginal[j]));
    }
    kl_sum += kl;
  }
  return std::exp(kl_sum / static_cast<double>(m));
}

struct MetricsReport {
  double is = std::numeric_limits<double>::quiet_NaN();
  double fid = 0.0;
  double precision = 0.0, recall = 0.0;
  double density = 0.0, coverage = 0.0;
  std::size_t n_real = 0, n_fake = 0, k = 0;
};

// Full metric suite over raw sample coordinates; IS is filled in when the
// fake samples' class-probability rows are supplied.
inline MetricsReport compute_metrics(const Matrix& real, const Matrix& fake, std::size_t k,
                                     const Matrix* fake_probs = nullptr) {
  MetricsReport r;
  r.n_real = real.rows();
  r.n_fake = fake.rows();
  r.k = k;
  r.fid = fid(gaussian_fit(real), gaussian_fit(fake));
  const auto pr = precision_recall(real, fake, k);
  r.precision = pr.first;
  r.recall = pr.second;
  const auto dc = density_coverage(real, fake, k);
  r.density = dc.first;
  r.coverage = dc.second;
  if (fake_probs) r.is = inception_score(*fake_probs);
  return r;
}

}  // namespace sfl
