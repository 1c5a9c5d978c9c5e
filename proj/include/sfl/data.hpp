#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "sfl/nn.hpp"

namespace sfl {

struct Mode {
  std::array<double, 2> mean{};
  std::array<double, 4> cov{};  // row-major 2x2
  double weight = 1.0;
};

struct ClassSpec {
  std::vector<Mode> modes;
  std::size_t samples = 0;
};

struct MixtureSpec {
  std::vector<ClassSpec> classes;

  std::size_t class_count() const { return classes.size(); }
  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const ClassSpec& c : classes) n += c.samples;
    return n;
  }

  void validate() const {
    require(!classes.empty(), "MixtureSpec: no classes");
    for (const ClassSpec& c : classes) {
      require(!c.modes.empty(), "MixtureSpec: class without modes");
      double wsum = 0.0;
      for (const Mode& m : c.modes) {
        wsum += m.weight;
        require(m.weight >= 0.0, "MixtureSpec: negative mode weight");
        require(std::fabs(m.cov[1] - m.cov[2]) < 1e-12, "MixtureSpec: covariance not symmetric");
        require(m.cov[0] >= 0.0 && m.cov[3] >= 0.0, "MixtureSpec: negative variance");
        const double det = m.cov[0] * m.cov[3] - m.cov[1] * m.cov[2];
        require(det >= -1e-12, "MixtureSpec: covariance not PSD");
      }
      require(std::fabs(wsum - 1.0) < 1e-9, "MixtureSpec: mode weights must sum to 1");
    }
  }
};

struct Dataset {
  Matrix x;  // N x 2
  std::vector<int> y;
  std::vector<int> mode_id;               // index of the generating mode within its class
  std::vector<std::uint8_t> heldout;      // split tag
  std::size_t class_count = 0;

  std::size_t size() const { return x.rows(); }

  std::vector<std::size_t> train_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
      if (!heldout[i]) idx.push_back(i);
    return idx;
  }

  std::vector<std::size_t> heldout_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
      if (heldout[i]) idx.push_back(i);
    return idx;
  }

  Matrix gather(const std::vector<std::size_t>& idx) const {
    Matrix out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(idx[i], j);
    return out;
  }
};

namespace detail {
// lower Cholesky factor of a 2x2 PSD covariance; degenerate axes collapse to 0
inline std::array<double, 4> chol2(const std::array<double, 4>& cov) {
  std::array<double, 4> l{};
  l[0] = std::sqrt(std::max(0.0, cov[0]));
  if (l[0] > 0.0) {
    l[2] = cov[2] / l[0];
    l[3] = std::sqrt(std::max(0.0, cov[3] - l[2] * l[2]));
  } else {
    require(std::fabs(cov[2]) < 1e-12, "chol2: degenerate covariance with cross term");
    l[2] = 0.0;
    l[3] = std::sqrt(std::max(0.0, cov[3]));
  }
  return l;
}
}  // namespace detail

// Samples each class from its mode mixture; the last 10% of each class is the
// held-out split. Deterministic per seed.
inline Dataset make_dataset(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.total_samples();
  Dataset ds;
  ds.class_count = spec.class_count();
  ds.x = Matrix(n, 2);
  ds.y.resize(n);
  ds.mode_id.resize(n);
  ds.heldout.assign(n, 0);

  Rng root(seed);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const ClassSpec& cls = spec.classes[c];
    Rng rng = root.split(c);
    std::vector<std::array<double, 4>> chols;
    for (const Mode& m : cls.modes) chols.push_back(detail::chol2(m.cov));
    const std::size_t n_held = cls.samples / 10;
    for (std::size_t s = 0; s < cls.samples; ++s, ++row) {
      const double u = rng.uniform();
      std::size_t m = 0;
      double acc = 0.0;
      for (; m + 1 < cls.modes.size(); ++m) {
        acc += cls.modes[m].weight;
        if (u < acc) break;
      }
      const double n0 = rng.normal();
      const double n1 = rng.normal();
      const auto& l = chols[m];
      ds.x(row, 0) = cls.modes[m].mean[0] + l[0] * n0;
      ds.x(row, 1) = cls.modes[m].mean[1] + l[2] * n0 + l[3] * n1;
      ds.y[row] = static_cast<int>(c);
      ds.mode_id[row] = static_cast<int>(m);
      ds.heldout[row] = (s >= cls.samples - n_held) ? 1 : 0;
    }
  }
  return ds;
}

// 8 classes on a ring of radius 4. Each class mixes a dominant mode
// (weight 0.8, sigma 0.15) with a broader satellite offset 1.2 toward the
// center (weight 0.2, sigma 0.4). 2,500 samples per class.
inline MixtureSpec default_benchmark() {
  MixtureSpec spec;
  const std::size_t classes = 8;
  const double radius = 4.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / classes;
    const double cx = std::cos(angle), cy = std::sin(angle);
    ClassSpec cls;
    cls.samples = 2500;
    Mode dominant;
    dominant.mean = {radius * cx, radius * cy};
    dominant.cov = {0.15 * 0.15, 0.0, 0.0, 0.15 * 0.15};
    dominant.weight = 0.8;
    Mode satellite;
    satellite.mean = {(radius - 1.2) * cx, (radius - 1.2) * cy};
    satellite.cov = {0.4 * 0.4, 0.0, 0.0, 0.4 * 0.4};
    satellite.weight = 0.2;
    cls.modes = {dominant, satellite};
    spec.classes.push_back(std::move(cls));
  }
  return spec;
}

// --- desk classifier ---------------------------------------------------------

struct DeskClassifier {
  DenseNet body;  // 2 -> 32 -> 32 -> C logits
  int epochs = 0;
  double heldout_accuracy = 0.0;

  std::size_t class_count() const { return body.output_dim(); }
};

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* srow = logits.row_ptr(i);
    double mx = srow[0];
    for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, srow[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) sum += std::exp(srow[j] - mx);
    double* prow = p.row_ptr(i);
    for (std::size_t j = 0; j < logits.cols(); ++j) prow[j] = std::exp(srow[j] - mx) / sum;
  }
  return p;
}

inline Matrix classifier_probs(const DeskClassifier& clf, const Matrix& x) {
  return softmax_rows(forward(clf.body, x).output());
}

inline DeskClassifier train_desk_classifier(const Dataset& ds, int epochs, std::uint64_t seed) {
  require(ds.class_count >= 2, "train_desk_classifier: need at least 2 classes");
  Rng root(seed);
  Rng init = root.split(0);
  Rng order = root.split(1);

  DeskClassifier clf;
  clf.body = DenseNet::make({2, 32, 32, ds.class_count},
                            {Activation::Relu, Activation::Relu, Activation::Identity}, init);
  AdamState opt = adam_init(clf.body, AdamConfig{1e-3, 0.9, 0.999, 1e-8});

  std::vector<std::size_t> train = ds.train_indices();
  const std::size_t batch = std::min<std::size_t>(128, train.size());
  for (int e = 0; e < epochs; ++e) {
    order.shuffle(train);
    for (std::size_t start = 0; start + batch <= train.size(); start += batch) {
      std::vector<std::size_t> idx(train.begin() + start, train.begin() + start + batch);
      const Matrix xb = ds.gather(idx);
      ForwardTrace tr = forward(clf.body, xb);
      const Matrix p = softmax_rows(tr.output());
      double loss = 0.0;
      Matrix dlogits(p.rows(), p.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t gt = static_cast<std::size_t>(ds.y[idx[i]]);
        loss -= std::log(std::max(p(i, gt), 1e-300));
        for (std::size_t j = 0; j < p.cols(); ++j)
          dlogits(i, j) = (p(i, j) - (j == gt ? 1.0 : 0.0)) / static_cast<double>(idx.size());
      }
      loss /= static_cast<double>(idx.size());
      if (!std::isfinite(loss)) throw NumericError("train_desk_classifier: loss diverged");
      GradientSet g = backward(clf.body, tr, dlogits);
      adam_step(clf.body, g, opt, /*ascent=*/false);
    }
  }
  clf.epochs = epochs;

  std::vector<std::size_t> eval = ds.heldout_indices();
  if (eval.empty()) eval = ds.train_indices();
  const Matrix pe = classifier_probs(clf, ds.gather(eval));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < pe.cols(); ++j)
      if (pe(i, j) > pe(i, arg)) arg = j;
    if (arg == static_cast<std::size_t>(ds.y[eval[i]])) ++hits;
  }
  clf.heldout_accuracy = static_cast<double>(hits) / static_cast<double>(eval.size());
  return clf;
}

// Softmax probability assigned to each sample's ground-truth class.
inline std::vector<double> gt_class_probabilities(const DeskClassifier& clf, const Dataset& ds) {
  const Matrix p = classifier_probs(clf, ds.x);
  std::vector<double> probs(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    probs[i] = p(i, static_cast<std::size_t>(ds.y[i]));
  return probs;
}

inline void save_classifier(std::ostream& os, const DeskClassifier& clf) {
  os << "deskclassifier " << clf.epochs << " ";
  write_double(os, clf.heldout_accuracy);
  os << "\n";
  save_densenet(os, clf.body);
}

inline DeskClassifier load_classifier(std::istream& is) {
  expect_token(is, "deskclassifier");
  DeskClassifier clf;
  if (!(is >> clf.epochs)) throw std::runtime_error("checkpoint: bad classifier header");
  clf.heldout_accuracy = read_double(is);
  clf.body = load_densenet(is);
  return clf;
}

// --- csv io ------------------------------------------------------------------

inline void write_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "x1,x2,label,mode_id,split\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", ds.x(i, 0), ds.x(i, 1));
    os << buf << "," << ds.y[i] << "," << ds.mode_id[i] << ","
       << (ds.heldout[i] ? "heldout" : "train") << "\n";
  }
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::vector<std::array<double, 2>> pts;
  std::vector<int> labels, modes;
  std::vector<std::uint8_t> held;
  int max_label = -1;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("x1,", 0) == 0) continue;
    std::array<double, 2> p{};
    int label = 0, mode = 0;
    char split[16] = {0};
    const int got = std::sscanf(line.c_str(), "%lf,%lf,%d,%d,%15s", &p[0], &p[1], &label, &mode, split);
    if (got < 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad dataset row");
    pts.push_back(p);
    labels.push_back(label);
    modes.push_back(mode);
    held.push_back(std::string(split) == "heldout" ? 1 : 0);
    max_label = std::max(max_label, label);
  }
  require(!pts.empty(), "read_dataset_csv: empty dataset");
  Dataset ds;
  ds.class_count = static_cast<std::size_t>(max_label + 1);
  ds.x = Matrix(pts.size(), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ds.x(i, 0) = pts[i][0];
    ds.x(i, 1) = pts[i][1];
  }
  ds.y = std::move(labels);
  ds.mode_id = std::move(modes);
  ds.heldout = std::move(held);
  return ds;
}

}  // namespace sfl
