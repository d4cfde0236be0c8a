#include "ruleids/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <lapacke.h>

#include "ruleids/error.hpp"
#include "ruleids/ingest.hpp"
#include "ruleids/log.hpp"

namespace ruleids {
namespace {

using Index = Eigen::Index;

double median_of(std::vector<double> values) {
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double upper = *mid;
  if (values.size() % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

Eigen::VectorXd row_sums_checked(const Eigen::MatrixXd& affinity) {
  Eigen::VectorXd d = affinity.rowwise().sum();
  for (Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > 0.0)) throw TrainError("affinity row " + std::to_string(i) + " has zero sum");
  }
  return d;
}

}  // namespace

Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& points) {
  const Index n = points.rows();
  Eigen::MatrixXd gram = points * points.transpose();
  Eigen::VectorXd sq = gram.diagonal();
  Eigen::MatrixXd out(n, n);
  for (Index j = 0; j < n; ++j) {
    out(j, j) = 0.0;
    for (Index i = j + 1; i < n; ++i) {
      double d = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

double weight_sum(const Eigen::MatrixXd& sq_dist, double epsilon) {
  return (-sq_dist.array() / epsilon).exp().sum();
}

EpsilonScan scan_epsilon(const Eigen::MatrixXd& points, const DiffusionConfig& config) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw TrainError("epsilon scan needs at least two points");
  const auto& grid = config.epsilon_grid;
  if (!(grid.min_multiplier > 0.0) || !(grid.min_multiplier < grid.max_multiplier) || grid.points < 3) {
    throw TrainError("invalid epsilon grid");
  }

  EpsilonScan scan;
  scan.sample_size = std::min(n, config.epsilon_sample_size);
  auto rows = sample_indices(n, scan.sample_size, config.seed);
  Eigen::MatrixXd sample(static_cast<Index>(rows.size()), points.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sample.row(static_cast<Index>(i)) = points.row(static_cast<Index>(rows[i]));
  }
  Eigen::MatrixXd sq = pairwise_sq_dist(sample);

  std::vector<double> off_diag;
  std::vector<double> positive;
  for (Index j = 0; j < sq.cols(); ++j) {
    for (Index i = j + 1; i < sq.rows(); ++i) {
      off_diag.push_back(sq(i, j));
      if (sq(i, j) > 0.0) positive.push_back(sq(i, j));
    }
  }
  if (positive.empty()) throw TrainError("epsilon scan failed: data has duplicate-only rows");
  scan.median_sq_distance = median_of(off_diag);
  // Heavily duplicated samples can have a zero median; scale by the
  // nonzero distances then.
  double scale = scan.median_sq_distance > 0.0 ? scan.median_sq_distance : median_of(positive);

  const double lo = std::log(grid.min_multiplier * scale);
  const double hi = std::log(grid.max_multiplier * scale);
  for (int k = 0; k < grid.points; ++k) {
    double eps = std::exp(lo + (hi - lo) * k / (grid.points - 1));
    scan.curve.push_back({eps, weight_sum(sq, eps)});
  }

  double best_slope = -1.0;
  std::size_t best = 1;
  for (std::size_t k = 1; k + 1 < scan.curve.size(); ++k) {
    double slope = (std::log(scan.curve[k + 1].weight_sum) - std::log(scan.curve[k - 1].weight_sum)) /
                   (std::log(scan.curve[k + 1].epsilon) - std::log(scan.curve[k - 1].epsilon));
    if (slope >= best_slope) {
      best_slope = slope;
      best = k;
    }
  }
  scan.chosen_epsilon = scan.curve[best].epsilon;
  return scan;
}

void apply_gaussian_kernel(Eigen::MatrixXd& sq_dist, double epsilon) {
  if (!(epsilon > 0.0)) throw TrainError("epsilon must be positive");
  sq_dist = (-sq_dist.array() / epsilon).exp().matrix();
}

Eigen::MatrixXd compute_affinity(const Eigen::MatrixXd& points, double epsilon) {
  Eigen::MatrixXd w = pairwise_sq_dist(points);
  apply_gaussian_kernel(w, epsilon);
  return w;
}

Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& affinity) {
  Eigen::VectorXd d = row_sums_checked(affinity);
  return d.cwiseInverse().asDiagonal() * affinity;
}

Eigen::MatrixXd symmetric_transition(const Eigen::MatrixXd& affinity) {
  Eigen::VectorXd inv_sqrt = row_sums_checked(affinity).cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal();
}

SpectralDecomposition spectral_decompose(Eigen::MatrixXd affinity, int max_pairs) {
  const Index n = affinity.rows();
  if (n == 0 || affinity.cols() != n) throw TrainError("affinity matrix must be square and nonempty");
  if (max_pairs < 1) throw TrainError("need at least one eigenpair");

  SpectralDecomposition out;
  out.degrees = row_sums_checked(affinity);
  Eigen::VectorXd inv_sqrt = out.degrees.cwiseSqrt().cwiseInverse();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) affinity(i, j) *= inv_sqrt(i) * inv_sqrt(j);
  }

  const auto k = static_cast<lapack_int>(std::min<Index>(n, max_pairs));
  const auto ln = static_cast<lapack_int>(n);
  lapack_int found = 0;
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, k);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
  // The matrix is overwritten; only the lower triangle is read.
  lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', ln, affinity.data(), ln, 0.0, 0.0,
                                   ln - k + 1, ln, 0.0, &found, w.data(), z.data(), ln, support.data());
  if (info != 0 || found != k) {
    throw TrainError("symmetric eigensolver failed (info=" + std::to_string(info) + ")");
  }

  out.eigenvalues.resize(k);
  out.eigenvectors.resize(n, k);
  for (lapack_int c = 0; c < k; ++c) {
    const Index src = k - 1 - c;  // LAPACK returns ascending order
    out.eigenvalues(c) = w(src);
    Eigen::VectorXd v = z.col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.eigenvectors.col(c) = v;
  }
  return out;
}

DimensionChoice select_dimension(const Eigen::VectorXd& eigenvalues) {
  const Index k = eigenvalues.size();
  if (k < 3) throw TrainError("dimension selection needs at least three eigenvalues");
  // Gap after each nontrivial eigenvalue λ_2 .. λ_{K-1} (0-based 1 .. K-2).
  double best_gap = -1.0;
  double worst_gap = 0.0;
  int dims = 1;
  for (Index j = 1; j + 1 < k; ++j) {
    double gap = eigenvalues(j) - eigenvalues(j + 1);
    if (j == 1) worst_gap = gap;
    worst_gap = std::min(worst_gap, gap);
    if (gap > best_gap) {
      best_gap = gap;
      dims = static_cast<int>(j);
    }
  }
  if (best_gap - worst_gap <= 1e-12 && k > 3) return {static_cast<int>(k - 1), false};
  return {dims, true};
}

Eigen::MatrixXd diffusion_coordinates(const SpectralDecomposition& spectrum, int dims, bool scaled) {
  const Index k = spectrum.eigenvalues.size();
  if (dims < 1 || dims > k - 1) throw TrainError("embedding dimension out of range");
  const Index n = spectrum.eigenvectors.rows();
  Eigen::MatrixXd coords(n, dims);
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(n);
  if (scaled) {
    double volume = spectrum.degrees.sum();
    row_scale = (spectrum.degrees / volume).cwiseSqrt().cwiseInverse();
  }
  for (Index c = 0; c < dims; ++c) {
    coords.col(c) = spectrum.eigenvalues(c + 1) * row_scale.cwiseProduct(spectrum.eigenvectors.col(c + 1));
  }
  return coords;
}

DiffusionResult embed(const Eigen::MatrixXd& points, const DiffusionConfig& config) {
  const Index n = points.rows();
  if (n < 3) throw TrainError("diffusion map needs at least three points");

  DiffusionResult result;
  if (config.epsilon) {
    if (!(*config.epsilon > 0.0)) throw TrainError("epsilon must be positive");
    result.epsilon = *config.epsilon;
  } else {
    result.scan = scan_epsilon(points, config);
    result.epsilon = result.scan->chosen_epsilon;
  }

  Eigen::MatrixXd w = pairwise_sq_dist(points);
  apply_gaussian_kernel(w, result.epsilon);
  result.spectrum = spectral_decompose(std::move(w), config.max_eigenpairs);

  const auto k = static_cast<int>(result.spectrum.eigenvalues.size());
  if (config.dims) {
    if (*config.dims < 1 || *config.dims > k - 1) {
      throw TrainError("requested " + std::to_string(*config.dims) + " dimensions but only " +
                       std::to_string(k - 1) + " nontrivial eigenpairs are available");
    }
    result.dimension = {*config.dims, true};
  } else {
    result.dimension = select_dimension(result.spectrum.eigenvalues);
    if (!result.dimension.gap_found) {
      log_warning("no eigengap in the diffusion spectrum; keeping " +
                  std::to_string(result.dimension.dims) + " dimensions");
    }
  }
  result.embedding.dims = result.dimension.dims;
  result.embedding.coords =
      diffusion_coordinates(result.spectrum, result.dimension.dims, config.scaled_eigenvectors);
  return result;
}

}  // namespace ruleids
