#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ruleids {

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
};

struct ClusterModel {
  int k = 0;
  Eigen::MatrixXd centroids;    // k x d
  std::vector<int> assignment;  // 0-based cluster per point
  double inertia = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
  // Inertia after each assignment step of the winning restart.
  std::vector<double> inertia_trace;

  std::vector<std::size_t> cluster_sizes() const;
};

// Lloyd's algorithm with k-means++ seeding; keeps the restart with the lowest
// inertia (earliest restart on ties). Throws TrainError if k < 2 or k > N.
ClusterModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

struct SilhouetteReport {
  std::vector<double> values;        // s(i) per point
  std::vector<double> cluster_means; // by cluster ordinal; 0 for empty clusters
  double mean = 0.0;
};

// Euclidean silhouette. Points in singleton clusters score 0. Throws
// TrainError if fewer than two clusters are populated.
SilhouetteReport silhouette(const Eigen::MatrixXd& points, const std::vector<int>& assignment);

struct KSelection {
  int k = 0;
  std::vector<std::pair<int, double>> curve;  // (k, mean silhouette)
  ClusterModel model;                         // model for the chosen k
};

// Runs kmeans + silhouette for every k in [k_min, k_max] (clamped to N-1) and
// returns the best mean silhouette, smaller k on ties.
KSelection select_k(const Eigen::MatrixXd& points, int k_min, int k_max, std::uint64_t seed,
                    const KMeansOptions& options = {});

// How clusters become the classes that rule extraction learns.
struct LabelingStrategy {
  enum class Kind { largest_is_normal, manual, per_cluster };
  Kind kind = Kind::largest_is_normal;
  // 1-based cluster ordinals considered normal (manual).
  std::vector<int> normal_clusters;
  // manual:auto-prompt: ask on the command line before labeling.
  bool prompt = false;

  // "largest-is-normal", "per-cluster-classes", "manual:4", "manual:2,5",
  // "manual:auto-prompt". Throws std::invalid_argument otherwise.
  static LabelingStrategy parse(std::string_view text);
  std::string to_string() const;
};

inline constexpr std::string_view kNormalClass = "normal";
inline constexpr std::string_view kAttackClass = "attack";

struct ClassLabeling {
  std::vector<std::string> cluster_class;  // by 0-based cluster ordinal
  std::vector<std::string> point_class;
};

// Per-cluster classes are named "1".."k". Throws TrainError for a manual list
// that names a nonexistent cluster.
ClassLabeling label_clusters(const ClusterModel& model, const LabelingStrategy& strategy);

}  // namespace ruleids
