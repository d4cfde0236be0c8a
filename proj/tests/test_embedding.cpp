#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ruleids/embedding.hpp"
#include "ruleids/error.hpp"
#include "ruleids/features.hpp"
#include "support/synthetic.hpp"

namespace ruleids {
namespace {

Eigen::MatrixXd random_points(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
  return x;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TEST(PairwiseDistances, SmallExamples) {
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 0, 1, 1, 0;
  Eigen::MatrixXd d = pairwise_sq_dist(x);
  EXPECT_EQ(d(0, 1), 2.0);
  EXPECT_EQ(d(0, 2), 0.0);
  EXPECT_EQ(d(1, 1), 0.0);
  EXPECT_EQ(d, d.transpose());
}

TEST(PairwiseDistances, WorkedBinaryMatrixRows) {
  Eigen::MatrixXd x(3, 7);
  x << 1, 0, 0, 0, 1, 1, 0,  //
      0, 0, 1, 0, 1, 0, 1,   //
      0, 1, 0, 1, 0, 1, 0;
  EXPECT_EQ(pairwise_sq_dist(x)(0, 1), 4.0);
}

TEST(PairwiseDistances, MatchesDirectSum) {
  Eigen::MatrixXd x = random_points(25, 4, 3);
  Eigen::MatrixXd d = pairwise_sq_dist(x);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) EXPECT_NEAR(d(i, j), (x.row(i) - x.row(j)).squaredNorm(), 1e-10);
}

TEST(Affinity, KernelValues) {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, std::sqrt(2.0);
  Eigen::MatrixXd w = compute_affinity(x, 1.0);
  EXPECT_DOUBLE_EQ(w(0, 0), 1.0);
  EXPECT_NEAR(w(0, 1), std::exp(-1.0), 1e-15);  // d² = ε
  EXPECT_NEAR(w(0, 2), std::exp(-2.0), 1e-12);  // d² = 2, ε = 1
  EXPECT_NEAR(std::exp(-1.0), 0.3679, 1e-4);
  EXPECT_NEAR(std::exp(-2.0), 0.1353, 1e-4);
  EXPECT_TRUE((w.array() > 0.0).all() && (w.array() <= 1.0).all());
  EXPECT_THROW(compute_affinity(x, 0.0), TrainError);
}

TEST(EpsilonScan, WeightSumLimits) {
  Eigen::MatrixXd x = random_points(30, 3, 9);
  Eigen::MatrixXd d = pairwise_sq_dist(x);
  EXPECT_NEAR(weight_sum(d, 1e-8), 30.0, 1e-9);
  EXPECT_NEAR(weight_sum(d, 1e12), 900.0, 1e-6);
}

TEST(EpsilonScan, CurveIsMonotoneAndBounded) {
  Eigen::MatrixXd x = random_points(150, 5, 4);
  DiffusionConfig c;
  c.seed = 2;
  EpsilonScan s = scan_epsilon(x, c);
  ASSERT_EQ(s.curve.size(), 41u);
  EXPECT_EQ(s.sample_size, 150u);
  const double n = static_cast<double>(s.sample_size);
  for (std::size_t k = 0; k < s.curve.size(); ++k) {
    EXPECT_GE(s.curve[k].weight_sum, n - 1e-9);
    EXPECT_LE(s.curve[k].weight_sum, n * n + 1e-6);
    if (k) EXPECT_GE(s.curve[k].weight_sum, s.curve[k - 1].weight_sum);
  }
  EXPECT_NEAR(s.curve.front().epsilon, 1e-4 * s.median_sq_distance, 1e-12 * s.median_sq_distance);
  EXPECT_NEAR(s.curve.back().epsilon, 1e4 * s.median_sq_distance, 1e-6 * s.median_sq_distance);
}

TEST(EpsilonScan, ChoosesSteepestLogLogSlope) {
  // Oracle: recompute the central-difference slopes from the returned curve.
  Eigen::MatrixXd x = random_points(120, 3, 6);
  EpsilonScan s = scan_epsilon(x, DiffusionConfig{});
  std::size_t best = 0;
  double best_slope = -1;
  for (std::size_t k = 1; k + 1 < s.curve.size(); ++k) {
    const double slope = std::log(s.curve[k + 1].weight_sum / s.curve[k - 1].weight_sum) /
                         std::log(s.curve[k + 1].epsilon / s.curve[k - 1].epsilon);
    if (slope >= best_slope - 1e-12) {
      best_slope = std::max(best_slope, slope);
      best = k;
    }
  }
  EXPECT_DOUBLE_EQ(s.chosen_epsilon, s.curve[best].epsilon);
}

struct BlobDistances {
  std::vector<double> within, between;
};

BlobDistances blob_distances(const testing::Blobs& b) {
  BlobDistances out;
  const auto n = b.points.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (b.points.row(i) - b.points.row(j)).squaredNorm();
      const bool same = b.membership[static_cast<std::size_t>(i)] == b.membership[static_cast<std::size_t>(j)];
      (same ? out.within : out.between).push_back(d);
    }
  }
  return out;
}

double kernel_mass(const std::vector<double>& sq, double eps) {
  double m = 0;
  for (double d : sq) m += std::exp(-d / eps);
  return m;
}

// The steepest log-log point of L sits in the within-blob rise: within-blob
// pairs already carry weight comparable to the diagonal while between-blob
// pairs carry none. It is below the within-blob median, since
// L = N + M·exp(-d/ε) is steepest where M·exp(-d/ε) ≈ N.
TEST(EpsilonScan, TwoBlobsPickScaleInWithinBlobRise) {
  for (int dims : {2, 20}) {
    auto blobs = testing::two_blobs(50, 50, 12, dims, 10.0, 0.5);
    auto d = blob_distances(blobs);
    EpsilonScan s = scan_epsilon(blobs.points, DiffusionConfig{});
    ASSERT_EQ(s.sample_size, 100u);
    const double within = 2 * kernel_mass(d.within, s.chosen_epsilon);
    const double between = 2 * kernel_mass(d.between, s.chosen_epsilon);
    EXPECT_GT(within, 0.1 * 100) << "dims " << dims;
    EXPECT_LT(within, 0.9 * 2 * d.within.size()) << "dims " << dims;
    EXPECT_LT(between, 1e-6) << "dims " << dims;
    EXPECT_LT(s.chosen_epsilon, median(d.within)) << "dims " << dims;
  }
}

TEST(EpsilonScan, SamplesAtMostConfiguredRows) {
  Eigen::MatrixXd x = random_points(500, 2, 1);
  DiffusionConfig c;
  EXPECT_EQ(scan_epsilon(x, c).sample_size, 200u);
  c.epsilon_sample_size = 50;
  EXPECT_EQ(scan_epsilon(x, c).sample_size, 50u);
}

TEST(EpsilonScan, DuplicateOnlyRowsFail) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 4);
  try {
    embed(x, DiffusionConfig{});
    FAIL() << "expected TrainError";
  } catch (const TrainError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate-only rows"), std::string::npos);
  }
}

TEST(Spectrum, IdentityAffinity) {
  SpectralDecomposition s = spectral_decompose(Eigen::MatrixXd::Identity(3, 3), 30);
  ASSERT_EQ(s.eigenvalues.size(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.eigenvalues(i), 1.0, 1e-12);
}

TEST(Spectrum, TwoByTwoClosedForm) {
  for (double a : {0.1, 0.5, 0.9}) {
    Eigen::MatrixXd w(2, 2);
    w << 1, a, a, 1;
    SpectralDecomposition s = spectral_decompose(w, 30);
    EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-12);
    EXPECT_NEAR(s.eigenvalues(1), (1 - a) / (1 + a), 1e-12);
  }
}

TEST(Spectrum, InvariantsOnRandomData) {
  Eigen::MatrixXd x = random_points(80, 4, 17);
  Eigen::MatrixXd w = compute_affinity(x, 3.0);
  Eigen::MatrixXd ps = symmetric_transition(w);
  EXPECT_LE((ps - ps.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::MatrixXd p = transition_matrix(w);
  EXPECT_LE((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);

  SpectralDecomposition s = spectral_decompose(w, 30);
  ASSERT_EQ(s.eigenvalues.size(), 30);
  EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-8);
  for (int k = 0; k < 30; ++k) {
    EXPECT_LE(std::abs(s.eigenvalues(k)), 1.0 + 1e-10);
    if (k) EXPECT_LE(s.eigenvalues(k), s.eigenvalues(k - 1) + 1e-10);
  }
  // v1 ∝ D^{1/2} 1
  Eigen::VectorXd stationary = s.degrees.cwiseSqrt().normalized();
  EXPECT_GT(std::abs(stationary.dot(s.eigenvectors.col(0))), 1.0 - 1e-8);
  // Eigen-equation residuals and sign convention.
  for (int k = 0; k < 30; ++k) {
    Eigen::VectorXd v = s.eigenvectors.col(k);
    EXPECT_LE((ps * v - s.eigenvalues(k) * v).norm(), 1e-9);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(v(arg), 0.0);
  }
}

TEST(Spectrum, ZeroRowSumRejected) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(0, 0) = 1;
  w(1, 1) = 1;
  EXPECT_THROW(spectral_decompose(w, 3), TrainError);
}

TEST(SelectDimension, Examples) {
  Eigen::VectorXd a(6);
  a << 1, .9, .85, .8, .1, .05;
  EXPECT_EQ(select_dimension(a).dims, 3);
  EXPECT_TRUE(select_dimension(a).gap_found);
  Eigen::VectorXd b(3);
  b << 1, .5, .01;
  EXPECT_EQ(select_dimension(b).dims, 1);
  Eigen::VectorXd c(4);
  c << 1, .5, .5, .5;
  DimensionChoice dc = select_dimension(c);
  EXPECT_EQ(dc.dims, 3);
  EXPECT_FALSE(dc.gap_found);
  Eigen::VectorXd d(2);
  d << 1, .5;
  EXPECT_THROW(select_dimension(d), TrainError);
}

TEST(Embedding, DiffusionDistanceIdentityScaledFullDimension) {
  for (int n : {4, 7, 10}) {
    Eigen::MatrixXd x = random_points(n, 3, static_cast<std::uint64_t>(n));
    DiffusionConfig c;
    c.epsilon = 2.0;
    c.dims = n - 1;
    c.scaled_eigenvectors = true;
    DiffusionResult r = embed(x, c);
    Eigen::MatrixXd w = compute_affinity(x, 2.0);
    Eigen::MatrixXd p = transition_matrix(w);
    Eigen::VectorXd deg = w.rowwise().sum();
    Eigen::VectorXd pi = deg / deg.sum();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double lhs = 0;
        for (int k = 0; k < n; ++k) lhs += std::pow(p(i, k) - p(j, k), 2) / pi(k);
        const double rhs = (r.embedding.coords.row(i) - r.embedding.coords.row(j)).squaredNorm();
        EXPECT_NEAR(lhs, rhs, 1e-8) << "n=" << n << " i=" << i << " j=" << j;
      }
    }
  }
}

TEST(Embedding, CoordinatesAreScaledEigenvectors) {
  Eigen::MatrixXd x = random_points(40, 3, 8);
  DiffusionConfig c;
  c.epsilon = 1.5;
  c.dims = 4;
  DiffusionResult r = embed(x, c);
  ASSERT_EQ(r.embedding.coords.cols(), 4);
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd expected = r.spectrum.eigenvalues(k + 1) * r.spectrum.eigenvectors.col(k + 1);
    EXPECT_LE((r.embedding.coords.col(k) - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Embedding, TwoBlobsSeparatedByFirstCoordinate) {
  auto blobs = testing::two_blobs(50, 50, 5);
  DiffusionResult r = embed(blobs.points, DiffusionConfig{});
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (int i = 0; i < 100; ++i) {
    const int b = blobs.membership[static_cast<std::size_t>(i)];
    lo[b] = std::min(lo[b], r.embedding.coords(i, 0));
    hi[b] = std::max(hi[b], r.embedding.coords(i, 0));
  }
  EXPECT_TRUE(hi[0] < lo[1] || hi[1] < lo[0]) << "[" << lo[0] << "," << hi[0] << "] vs [" << lo[1] << "," << hi[1]
                                              << "]";
}

TEST(Embedding, RowPermutationPermutesCoordinates) {
  Eigen::MatrixXd x = random_points(30, 3, 21);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  Eigen::MatrixXd y(30, 3);
  for (int i = 0; i < 30; ++i) y.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  DiffusionConfig c;
  c.epsilon = 2.0;
  c.dims = 3;
  auto a = embed(x, c).embedding.coords;
  auto b = embed(y, c).embedding.coords;
  for (int i = 0; i < 30; ++i) {
    EXPECT_LE((b.row(i) - a.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Embedding, Preconditions) {
  EXPECT_THROW(embed(random_points(2, 2, 1), DiffusionConfig{}), TrainError);
  DiffusionConfig c;
  c.dims = 50;
  EXPECT_THROW(embed(random_points(10, 2, 1), c), TrainError);
  c.dims.reset();
  c.epsilon = -1.0;
  EXPECT_THROW(embed(random_points(10, 2, 1), c), TrainError);
}

TEST(Embedding, BinaryIrisMatrixRuns) {
  Dataset d = load_dataset(std::string(RULEIDS_DATA_DIR) + "/iris.csv", SourceFormat::csv);
  FeatureSchema s = fit_schema(d, {3, 2});
  DiffusionResult r = embed(binarize(d, s).to_dense(), DiffusionConfig{});
  EXPECT_EQ(r.embedding.coords.rows(), 150);
  EXPECT_GE(r.embedding.dims, 1);
  EXPECT_TRUE(r.scan.has_value());
}

}  // namespace
}  // namespace ruleids
