#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sfl/selection.hpp"

using namespace sfl;

namespace {

std::vector<std::size_t> brute_top_k(const std::vector<double>& scores, std::size_t k) {
  // enumeration under the stated tie rule: lowest index wins
  std::vector<std::size_t> pool(scores.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> picked;
  for (std::size_t round = 0; round < k; ++round) {
    std::size_t best = pool.front();
    for (std::size_t i : pool)
      if (scores[i] > scores[best]) best = i;  // strict: earlier index kept on ties
    picked.push_back(best);
    pool.erase(std::find(pool.begin(), pool.end(), best));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

TEST(TopK, BasicSelection) {
  const SelectionSplit s = top_k_split({0.1, 0.9, 0.5}, 1);
  EXPECT_EQ(s.selected, (std::vector<std::size_t>{1}));
  EXPECT_EQ(s.complement, (std::vector<std::size_t>{0, 2}));
}

TEST(TopK, ZeroKIsDegenerate) {
  const SelectionSplit s = top_k_split({0.1, 0.9, 0.5}, 0);
  EXPECT_TRUE(s.selected.empty());
  EXPECT_EQ(s.complement.size(), 3u);
}

TEST(TopK, TiesBreakTowardLowestIndex) {
  const SelectionSplit s = top_k_split({0.5, 0.5, 0.2}, 1);
  EXPECT_EQ(s.selected, brute_top_k({0.5, 0.5, 0.2}, 1));
  EXPECT_EQ(s.selected.front(), 0u);
}

TEST(TopK, MatchesBruteForceEnumeration) {
  Rng rng(100);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.below(5) * 0.25;  // force ties
    const std::size_t k = rng.below(n + 1);
    EXPECT_EQ(top_k_split(scores, k).selected, brute_top_k(scores, k));
  }
}

TEST(TopK, RejectsOutOfRangeK) {
  EXPECT_THROW(top_k_split({1.0, 2.0}, 3), std::invalid_argument);
}

TEST(TopK, PartitionProperty) {
  Rng rng(101);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.normal();
    const SelectionSplit s = top_k_split(scores, rng.below(n + 1));
    std::vector<std::uint8_t> seen(n, 0);
    for (std::size_t i : s.selected) seen[i]++;
    for (std::size_t i : s.complement) seen[i]++;
    for (std::uint8_t c : seen) EXPECT_EQ(c, 1);
    EXPECT_EQ(s.selected.size(), s.k);
  }
}

TEST(Rank, BasicArgsort) {
  EXPECT_EQ(rank({3.0, 1.0, 2.0}), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Rank, SortedInputIsIdentity) {
  EXPECT_EQ(rank({1.0, 2.0, 3.0}), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Rank, AllEqualKeepsInputOrder) {
  EXPECT_EQ(rank({5.0, 5.0, 5.0}), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Rank, AppliedPermutationIsNonDecreasing) {
  Rng rng(102);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(1 + rng.below(30));
    for (double& x : v) x = rng.below(8) * 0.5;
    const auto pi = rank(v);
    for (std::size_t i = 1; i < pi.size(); ++i) EXPECT_LE(v[pi[i - 1]], v[pi[i]]);
  }
}

TEST(Rank, RejectsNaN) {
  EXPECT_THROW(rank({1.0, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(rank({}), std::invalid_argument);
}

TEST(MonotoneInvariance, TopKAndRankIgnoreMonotoneTransforms) {
  Rng rng(103);
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rng.below(24);
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.uniform(-3.0, 3.0);
    const int kind = rep % 3;
    const double a = 0.5 + rng.uniform();  // positive slope
    const double b = rng.uniform(-2.0, 2.0);
    auto t = [&](double x) {
      if (kind == 0) return a * x + b;
      if (kind == 1) return std::exp(0.5 * x);
      return x * x * x;
    };
    std::vector<double> mapped(n);
    for (std::size_t i = 0; i < n; ++i) mapped[i] = t(scores[i]);
    // the transform must stay strictly increasing on these floats
    std::vector<double> s_sorted = scores;
    std::sort(s_sorted.begin(), s_sorted.end());
    bool strict = true;
    for (std::size_t i = 1; i < n; ++i)
      if (!(t(s_sorted[i - 1]) < t(s_sorted[i]))) strict = false;
    if (!strict) continue;
    ++checked;
    const std::size_t k = rng.below(n + 1);
    EXPECT_EQ(top_k_split(mapped, k).selected, top_k_split(scores, k).selected);
    EXPECT_EQ(rank(mapped), rank(scores));
  }
  EXPECT_GT(checked, 250);
}

TEST(RankTable, TwoSampleClass) {
  const RankTable t = build_rank_table({0.9, 0.1}, {0, 0});
  EXPECT_EQ(t.percentile[0], 1.0);
  EXPECT_EQ(t.percentile[1], 0.0);
}

TEST(RankTable, SingletonClassGetsFullPercentile) {
  const RankTable t = build_rank_table({0.4}, {0});
  EXPECT_EQ(t.percentile[0], 1.0);
}

TEST(RankTable, FourSampleBruteForceRanks) {
  const RankTable t = build_rank_table({0.2, 0.8, 0.5, 0.9}, {0, 0, 0, 0});
  EXPECT_EQ(t.percentile[0], 0.0);
  EXPECT_NEAR(t.percentile[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(t.percentile[2], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(t.percentile[3], 1.0);
}

TEST(RankTable, EmptyClassIsAllowed) {
  const RankTable t = build_rank_table({0.5, 0.6}, {0, 2});  // class 1 empty
  EXPECT_EQ(t.class_count(), 3u);
  EXPECT_TRUE(t.per_class[1].empty());
}

TEST(RankTable, RejectsBadInputs) {
  EXPECT_THROW(build_rank_table({0.5}, {0, 1}), std::invalid_argument);
  EXPECT_THROW(build_rank_table({1.5}, {0}), std::invalid_argument);
}

TEST(SflPlusMask, BoundaryFocusingRates) {
  const RankTable t = build_rank_table({0.2, 0.8, 0.5, 0.9}, {0, 0, 0, 0});
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  EXPECT_TRUE(sfl_plus_real_mask(t, batch, 0.0).selected.empty());
  EXPECT_EQ(sfl_plus_real_mask(t, batch, 1.0).selected.size(), 4u);
}

TEST(SflPlusMask, ThresholdSelectsTopPercentiles) {
  // percentiles land on 0, 1/3, 2/3, 1
  const RankTable t = build_rank_table({0.2, 0.8, 0.5, 0.9}, {0, 0, 0, 0});
  const SelectionSplit s = sfl_plus_real_mask(t, {0, 1, 2, 3}, 0.5);
  EXPECT_EQ(s.selected, (std::vector<std::size_t>{1, 3}));
}

TEST(SflPlusMask, HalfRateSelectsHalfOfEvenClasses) {
  Rng rng(104);
  std::vector<double> probs;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 10; ++i) {
      probs.push_back(rng.uniform());
      labels.push_back(c);
    }
  const RankTable t = build_rank_table(probs, labels);
  std::vector<std::size_t> everyone(probs.size());
  std::iota(everyone.begin(), everyone.end(), 0);
  const SelectionSplit s = sfl_plus_real_mask(t, everyone, 0.5);
  EXPECT_EQ(s.selected.size(), probs.size() / 2);
}

TEST(SflPlusMask, RejectsUnknownPosition) {
  const RankTable t = build_rank_table({0.5}, {0});
  EXPECT_THROW(sfl_plus_real_mask(t, {1}, 0.5), std::invalid_argument);
}

TEST(TopKFilter, FullBudgetIsNoOp) {
  const SelectionSplit s = topk_generated_filter({-3.0, 2.0, 0.0}, 3);
  EXPECT_EQ(s.selected.size(), 3u);
  EXPECT_TRUE(s.complement.empty());
}

TEST(TopKFilter, SelectsByTotalScore) {
  const SelectionSplit s = topk_generated_filter({-3.0, 2.0, 0.0}, 2);
  EXPECT_EQ(s.selected, (std::vector<std::size_t>{1, 2}));
}

namespace {

Dataset tiny_dataset() {
  // class 0: tight cluster plus one far outlier; class 1: spread pair
  Dataset ds;
  ds.class_count = 2;
  ds.x = Matrix::from_rows({{0.0, 0.0},
                            {0.1, 0.0},
                            {0.0, 0.1},
                            {0.05, 0.05},
                            {50.0, 50.0},
                            {5.0, 5.0},
                            {5.5, 5.0},
                            {5.0, 5.5}});
  ds.y = {0, 0, 0, 0, 0, 1, 1, 1};
  ds.mode_id = {0, 0, 0, 0, 0, 0, 0, 0};
  ds.heldout = {0, 0, 0, 0, 0, 0, 0, 0};
  return ds;
}

}  // namespace

TEST(InstanceSelect, FullRetentionIsIdentity) {
  const Dataset ds = tiny_dataset();
  const std::vector<double> scores = per_class_gaussian_scores(ds);
  const Dataset out = instance_select(ds, scores, 1.0);
  EXPECT_EQ(out.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(out.x(i, 0), ds.x(i, 0));
    EXPECT_EQ(out.y[i], ds.y[i]);
  }
}

TEST(InstanceSelect, DropsTheOutlier) {
  const Dataset ds = tiny_dataset();
  const std::vector<double> scores = per_class_gaussian_scores(ds);
  const Dataset out = instance_select(ds, scores, 0.8);
  // ceil(0.8 * 5) = 4 rows of class 0 survive; the outlier goes
  std::size_t class0 = 0;
  bool outlier_present = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.y[i] == 0) ++class0;
    if (out.x(i, 0) == 50.0) outlier_present = true;
  }
  EXPECT_EQ(class0, 4u);
  EXPECT_FALSE(outlier_present);
}

TEST(InstanceSelect, PerClassCountsMatchCeil) {
  Rng rng(105);
  Dataset ds;
  ds.class_count = 3;
  const std::size_t per_class = 13;
  ds.x = Matrix(3 * per_class, 2);
  for (std::size_t i = 0; i < ds.x.size(); ++i) ds.x.data()[i] = rng.normal();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      ds.y.push_back(static_cast<int>(c));
      ds.mode_id.push_back(0);
      ds.heldout.push_back(0);
    }
  const double rr = 0.6;
  const Dataset out = instance_select(ds, per_class_gaussian_scores(ds), rr);
  const std::size_t want = static_cast<std::size_t>(std::ceil(rr * per_class));
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t got = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out.y[i] == static_cast<int>(c)) ++got;
    EXPECT_EQ(got, want);
  }
}

TEST(InstanceSelect, TinyClassesKeptWholesale) {
  Dataset ds;
  ds.class_count = 2;
  ds.x = Matrix::from_rows({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}});
  ds.y = {0, 1, 1};
  ds.mode_id = {0, 0, 0};
  ds.heldout = {0, 0, 0};
  const Dataset out = instance_select(ds, per_class_gaussian_scores(ds), 0.5);
  std::size_t class0 = 0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.y[i] == 0) ++class0;
  EXPECT_EQ(class0, 1u);  // singleton class survives
}

TEST(InstanceSelect, RejectsBadRetention) {
  const Dataset ds = tiny_dataset();
  const std::vector<double> scores = per_class_gaussian_scores(ds);
  EXPECT_THROW(instance_select(ds, scores, 0.0), std::invalid_argument);
  EXPECT_THROW(instance_select(ds, scores, 1.5), std::invalid_argument);
}

TEST(RankTableCsv, WritesAuditColumns) {
  const RankTable t = build_rank_table({0.2, 0.8}, {0, 1});
  const std::string path = ::testing::TempDir() + "rank_table.csv";
  write_rank_table_csv(path, t);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "dataset_index,class,gt_probability,percentile");
  std::string row;
  std::getline(is, row);
  EXPECT_EQ(row.rfind("0,0,", 0), 0u);
}
