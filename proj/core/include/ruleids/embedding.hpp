#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace ruleids {

// Log-spaced ε grid, expressed as multiples of the median squared pairwise
// distance of the ε-selection sample.
struct EpsilonGrid {
  double min_multiplier = 1e-4;
  double max_multiplier = 1e4;
  int points = 41;
};

struct DiffusionConfig {
  std::optional<double> epsilon;  // unset: choose from the weight-sum curve
  std::optional<int> dims;        // unset: choose from the eigengap
  std::size_t epsilon_sample_size = 200;
  EpsilonGrid epsilon_grid;
  std::uint64_t seed = 0;
  // Eigenpairs computed before truncation.
  int max_eigenpairs = 30;
  // Use λ·D^{-1/2}v (right eigenvectors of P, scaled to unit norm under the
  // stationary measure) instead of λ·v.
  bool scaled_eigenvectors = false;
};

struct EpsilonPoint {
  double epsilon = 0.0;
  double weight_sum = 0.0;  // L(ε) = Σ_i Σ_j W_ij
};

struct EpsilonScan {
  std::vector<EpsilonPoint> curve;
  double chosen_epsilon = 0.0;
  double median_sq_distance = 0.0;
  std::size_t sample_size = 0;
};

// Leading eigenpairs of the symmetric transition operator
// P̃ = D^{-1/2} W D^{-1/2}, eigenvalues descending.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // one column per eigenvalue
  Eigen::VectorXd degrees;       // row sums of W
};

struct Embedding {
  Eigen::MatrixXd coords;  // N x dims
  int dims = 0;
};

struct DimensionChoice {
  int dims = 0;
  // False when the nontrivial spectrum shows no distinct gap.
  bool gap_found = true;
};

struct DiffusionResult {
  Embedding embedding;
  SpectralDecomposition spectrum;
  std::optional<EpsilonScan> scan;
  double epsilon = 0.0;
  DimensionChoice dimension;
};

// Squared Euclidean distances between rows; symmetric with a zero diagonal.
Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& points);

// Σ_ij exp(-d_ij / ε) over a squared-distance matrix.
double weight_sum(const Eigen::MatrixXd& sq_dist, double epsilon);

// Evaluates L(ε) over the grid on a seeded sample of rows and picks the grid
// point of steepest log-log slope (central differences, ties to larger ε).
// Throws TrainError when every sampled pair is at distance zero.
EpsilonScan scan_epsilon(const Eigen::MatrixXd& points, const DiffusionConfig& config);

// W_ij = exp(-||x_i - x_j||² / ε).
Eigen::MatrixXd compute_affinity(const Eigen::MatrixXd& points, double epsilon);
// In-place kernel over a squared-distance matrix.
void apply_gaussian_kernel(Eigen::MatrixXd& sq_dist, double epsilon);

Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& affinity);
Eigen::MatrixXd symmetric_transition(const Eigen::MatrixXd& affinity);

// Top min(N, max_pairs) eigenpairs of D^{-1/2} W D^{-1/2}. Each eigenvector
// is signed so its largest-magnitude entry is positive. Consumes `affinity`.
SpectralDecomposition spectral_decompose(Eigen::MatrixXd affinity, int max_pairs);

// d = argmax over the nontrivial eigenvalues of λ_{k+1} - λ_{k+2}; without a
// distinct gap (all gaps equal) keeps K-1 components.
DimensionChoice select_dimension(const Eigen::VectorXd& eigenvalues);

// Coordinates built from eigenpairs 2..dims+1 of `spectrum`.
Eigen::MatrixXd diffusion_coordinates(const SpectralDecomposition& spectrum, int dims, bool scaled);

DiffusionResult embed(const Eigen::MatrixXd& points, const DiffusionConfig& config);

}  // namespace ruleids
