#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "sfl/data.hpp"
#include "sfl/matrix.hpp"
#include "sfl/metrics.hpp"

namespace sfl {

// Partition of batch indices: the k selected samples and the rest.
struct SelectionSplit {
  std::vector<std::size_t> selected;    // ascending
  std::vector<std::size_t> complement;  // ascending
  std::size_t k = 0;
};

// Indices of the k largest scores; ties break toward the lowest index.
inline SelectionSplit top_k_split(const std::vector<double>& scores, std::size_t k) {
  require(k <= scores.size(), "top_k_split: k out of range");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<std::uint8_t> mark(scores.size(), 0);
  for (std::size_t i = 0; i < k; ++i) mark[order[i]] = 1;
  SelectionSplit split;
  split.k = k;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (mark[i] ? split.selected : split.complement).push_back(i);
  return split;
}

// Ranking operator: stable ascending argsort. Applying the returned
// permutation to `values` yields a non-decreasing sequence.
inline std::vector<std::size_t> rank(const std::vector<double>& values) {
  require(!values.empty(), "rank: empty input");
  for (double v : values)
    if (std::isnan(v)) throw std::invalid_argument("rank: NaN in input");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  return order;
}

// Per-class ranking of samples by ground-truth-class probability,
// with within-class percentiles in [0, 1]. Singleton classes get 1.0.
struct RankTable {
  std::vector<std::vector<std::size_t>> per_class;  // ascending by probability
  std::vector<double> percentile;                   // by sample position
  std::vector<double> gt_prob;
  std::vector<int> label;

  std::size_t size() const { return percentile.size(); }
  std::size_t class_count() const { return per_class.size(); }
};

inline RankTable build_rank_table(const std::vector<double>& gt_probs,
                                  const std::vector<int>& labels) {
  require(gt_probs.size() == labels.size(), "build_rank_table: length mismatch");
  for (double p : gt_probs)
    require(p >= 0.0 && p <= 1.0, "build_rank_table: probability out of [0,1]");
  int max_label = -1;
  for (int l : labels) {
    require(l >= 0, "build_rank_table: negative label");
    max_label = std::max(max_label, l);
  }
  RankTable table;
  table.gt_prob = gt_probs;
  table.label = labels;
  table.per_class.resize(static_cast<std::size_t>(max_label + 1));
  table.percentile.assign(gt_probs.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    table.per_class[static_cast<std::size_t>(labels[i])].push_back(i);
  for (auto& members : table.per_class) {
    if (members.empty()) continue;
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return gt_probs[a] < gt_probs[b];
    });
    const std::size_t n = members.size();
    for (std::size_t r = 0; r < n; ++r)
      table.percentile[members[r]] =
          n == 1 ? 1.0 : static_cast<double>(r) / static_cast<double>(n - 1);
  }
  return table;
}

// SFL+ real-sample mask: select iff the within-class percentile reaches
// 1 - F. F = 0 selects nothing.
inline SelectionSplit sfl_plus_real_mask(const RankTable& table,
                                         const std::vector<std::size_t>& positions, double f) {
  require(f >= 0.0 && f <= 1.0, "sfl_plus_real_mask: F out of [0,1]");
  SelectionSplit split;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    require(positions[i] < table.size(), "sfl_plus_real_mask: position absent from table");
    const bool take = f > 0.0 && table.percentile[positions[i]] >= 1.0 - f;
    (take ? split.selected : split.complement).push_back(i);
  }
  split.k = split.selected.size();
  return split;
}

// Top-k filter over generated samples by full discriminator score; gradients
// outside the selection are zeroed by the caller.
inline SelectionSplit topk_generated_filter(const std::vector<double>& d_total, std::size_t k) {
  return top_k_split(d_total, k);
}

// Per-class Gaussian log-likelihood of every sample under a Gaussian fit to
// its class's training rows. Classes with fewer than 2 training rows score
// NaN (kept wholesale by instance_select).
inline std::vector<double> per_class_gaussian_scores(const Dataset& ds) {
  std::vector<double> scores(ds.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (!ds.heldout[i] && ds.y[i] == static_cast<int>(c)) members.push_back(i);
    if (members.size() < 2) continue;
    const GaussianSummary fit = gaussian_fit(ds.gather(members));
    // 2x2 inverse with a small ridge when the fit is singular
    double c00 = fit.cov(0, 0), c01 = fit.cov(0, 1), c11 = fit.cov(1, 1);
    double det = c00 * c11 - c01 * c01;
    if (det < 1e-18) {
      const double ridge = std::max(1e-12, 1e-9 * (c00 + c11));
      c00 += ridge;
      c11 += ridge;
      det = c00 * c11 - c01 * c01;
    }
    const double logdet = std::log(det);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.y[i] != static_cast<int>(c)) continue;
      const double dx = ds.x(i, 0) - fit.mean[0];
      const double dy = ds.x(i, 1) - fit.mean[1];
      const double maha = (c11 * dx * dx - 2.0 * c01 * dx * dy + c00 * dy * dy) / det;
      scores[i] = -0.5 * (maha + logdet) - std::log(2.0 * std::numbers::pi);
    }
  }
  return scores;
}

// Dataset curation: keep the top ceil(RR * n_class) training rows of each
// class by likelihood score. Held-out rows pass through untouched.
inline Dataset instance_select(const Dataset& ds, const std::vector<double>& scores, double rr) {
  require(rr > 0.0 && rr <= 1.0, "instance_select: retention ratio out of (0,1]");
  require(scores.size() == ds.size(), "instance_select: score list length mismatch");
  std::vector<std::uint8_t> keep(ds.size(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.heldout[i]) keep[i] = 1;
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    std::vector<std::size_t> members;
    bool scored = true;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (!ds.heldout[i] && ds.y[i] == static_cast<int>(c)) {
        members.push_back(i);
        if (std::isnan(scores[i])) scored = false;
      }
    if (members.empty()) continue;
    if (!scored || members.size() < 2) {  // kept wholesale
      for (std::size_t i : members) keep[i] = 1;
      continue;
    }
    const std::size_t want = static_cast<std::size_t>(
        std::ceil(rr * static_cast<double>(members.size())));
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] > scores[b];
    });
    for (std::size_t i = 0; i < want && i < members.size(); ++i) keep[members[i]] = 1;
  }
  Dataset out;
  out.class_count = ds.class_count;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (keep[i]) rows.push_back(i);
  out.x = ds.gather(rows);
  for (std::size_t i : rows) {
    out.y.push_back(ds.y[i]);
    out.mode_id.push_back(ds.mode_id[i]);
    out.heldout.push_back(ds.heldout[i]);
  }
  return out;
}

inline void write_rank_table_csv(const std::string& path, const RankTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "dataset_index,class,gt_probability,percentile\n";
  char buf[80];
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g,%.17g", i, table.label[i], table.gt_prob[i],
                  table.percentile[i]);
    os << buf << "\n";
  }
}

}  // namespace sfl
