#include "ruleids/clustering.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ruleids/error.hpp"

namespace ruleids {
namespace {

using Index = Eigen::Index;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Row-major copy of a point matrix for tight distance loops.
class PointSet {
 public:
  explicit PointSet(const Eigen::MatrixXd& m)
      : n_(static_cast<std::size_t>(m.rows())), d_(static_cast<std::size_t>(m.cols())), data_(n_ * d_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < d_; ++j) {
        data_[i * d_ + j] = m(static_cast<Index>(i), static_cast<Index>(j));
      }
    }
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  const double* row(std::size_t i) const noexcept { return data_.data() + i * d_; }

  double sq_dist(const double* a, const double* b) const noexcept {
    double s = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      double t = a[j] - b[j];
      s += t * t;
    }
    return s;
  }

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> data_;
};

struct Centroids {
  std::size_t k;
  std::size_t d;
  std::vector<double> data;

  double* row(std::size_t c) { return data.data() + c * d; }
  const double* row(std::size_t c) const { return data.data() + c * d; }
};

// Nearest centroid with ties to the lowest ordinal.
std::pair<int, double> nearest(const PointSet& points, std::size_t i, const Centroids& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.k; ++c) {
    double d = points.sq_dist(points.row(i), centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return {best, best_d};
}

Centroids kmeans_plus_plus(const PointSet& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  Centroids centroids{k, d, std::vector<double>(k * d)};
  auto place = [&](std::size_t c, std::size_t i) { std::copy_n(points.row(i), d, centroids.row(c)); };

  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  place(0, first(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = points.sq_dist(points.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    place(c, pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], points.sq_dist(points.row(i), centroids.row(c)));
  }
  return centroids;
}

ClusterModel lloyd(const PointSet& points, int k, std::uint64_t seed, int max_iterations) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  const auto uk = static_cast<std::size_t>(k);
  std::mt19937_64 rng(seed);
  Centroids centroids = kmeans_plus_plus(points, uk, rng);

  ClusterModel m;
  m.k = k;
  m.seed = seed;
  m.assignment.assign(n, -1);
  std::vector<double> dist(n);

  auto assign = [&] {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto [c, dd] = nearest(points, i, centroids);
      changed = changed || m.assignment[i] != c;
      m.assignment[i] = c;
      dist[i] = dd;
      inertia += dd;
    }
    m.inertia = inertia;
    m.inertia_trace.push_back(inertia);
    return changed;
  };

  bool changed = assign();
  for (int it = 0; changed && it < max_iterations; ++it) {
    std::vector<double> sums(uk * d, 0.0);
    std::vector<std::size_t> counts(uk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(m.assignment[i]);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += points.row(i)[j];
      ++counts[c];
    }
    for (std::size_t c = 0; c < uk; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) centroids.row(c)[j] = sums[c * d + j] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      auto far = std::max_element(dist.begin(), dist.end());
      std::copy_n(points.row(static_cast<std::size_t>(far - dist.begin())), d, centroids.row(c));
      *far = 0.0;
    }
    m.iterations = it + 1;
    changed = assign();
  }

  m.centroids.resize(k, static_cast<Index>(d));
  for (std::size_t c = 0; c < uk; ++c) {
    for (std::size_t j = 0; j < d; ++j) m.centroids(static_cast<Index>(c), static_cast<Index>(j)) = centroids.row(c)[j];
  }
  return m;
}

}  // namespace

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++sizes.at(static_cast<std::size_t>(a));
  return sizes;
}

ClusterModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options) {
  if (k < 2) throw TrainError("k-means needs k >= 2");
  if (k > points.rows()) {
    throw TrainError("k = " + std::to_string(k) + " exceeds the number of points (" +
                     std::to_string(points.rows()) + ")");
  }
  const int restarts = std::max(1, options.restarts);
  const PointSet set(points);
  ClusterModel best;
  for (int r = 0; r < restarts; ++r) {
    ClusterModel m = lloyd(set, k, splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(r))),
                           options.max_iterations);
    if (r == 0 || m.inertia < best.inertia) best = std::move(m);
  }
  best.seed = seed;
  return best;
}

SilhouetteReport silhouette(const Eigen::MatrixXd& points, const std::vector<int>& assignment) {
  const Index n = points.rows();
  if (static_cast<std::size_t>(n) != assignment.size()) {
    throw std::invalid_argument("assignment length differs from point count");
  }
  int k = 0;
  for (int a : assignment) {
    if (a < 0) throw std::invalid_argument("negative cluster ordinal");
    k = std::max(k, a + 1);
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) < 2) {
    throw TrainError("silhouette is undefined for a single cluster");
  }

  const PointSet set(points);
  SilhouetteReport report;
  report.values.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> sum_to(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    const double* xi = set.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < set.size(); ++j) {
      sum_to[static_cast<std::size_t>(assignment[j])] += std::sqrt(set.sq_dist(xi, set.row(j)));
    }
    const auto own = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
    if (sizes[own] <= 1) continue;
    double a = sum_to[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, sum_to[c] / static_cast<double>(sizes[c]));
    }
    double denom = std::max(a, b);
    report.values[static_cast<std::size_t>(i)] = denom > 0.0 ? (b - a) / denom : 0.0;
  }

  report.cluster_means.assign(static_cast<std::size_t>(k), 0.0);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double s = report.values[static_cast<std::size_t>(i)];
    report.cluster_means[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])] += s;
    total += s;
  }
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] > 0) report.cluster_means[c] /= static_cast<double>(sizes[c]);
  }
  report.mean = total / static_cast<double>(n);
  return report;
}

KSelection select_k(const Eigen::MatrixXd& points, int k_min, int k_max, std::uint64_t seed,
                    const KMeansOptions& options) {
  const auto n = static_cast<int>(points.rows());
  k_max = std::min(k_max, n - 1);
  if (k_min < 2 || k_min > k_max) {
    throw TrainError("k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                     "] is empty for " + std::to_string(n) + " points");
  }
  KSelection out;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    ClusterModel m = kmeans(points, k, seed, options);
    double score = -1.0;
    auto sizes = m.cluster_sizes();
    if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) >= 2) {
      score = silhouette(points, m.assignment).mean;
    }
    out.curve.emplace_back(k, score);
    if (score > best) {
      best = score;
      out.k = k;
      out.model = std::move(m);
    }
  }
  return out;
}

LabelingStrategy LabelingStrategy::parse(std::string_view text) {
  LabelingStrategy s;
  if (text == "largest-is-normal") return s;
  if (text == "per-cluster-classes") {
    s.kind = Kind::per_cluster;
    return s;
  }
  constexpr std::string_view manual = "manual:";
  if (text.substr(0, manual.size()) != manual) {
    throw std::invalid_argument("unknown labeling strategy '" + std::string(text) + "'");
  }
  s.kind = Kind::manual;
  std::string_view rest = text.substr(manual.size());
  if (rest == "auto-prompt") {
    s.prompt = true;
    return s;
  }
  while (!rest.empty()) {
    std::size_t comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    int v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size() || v < 1) {
      throw std::invalid_argument("bad cluster ordinal '" + std::string(item) + "'");
    }
    s.normal_clusters.push_back(v);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (s.normal_clusters.empty()) throw std::invalid_argument("manual labeling needs cluster ordinals");
  return s;
}

std::string LabelingStrategy::to_string() const {
  switch (kind) {
    case Kind::largest_is_normal:
      return "largest-is-normal";
    case Kind::per_cluster:
      return "per-cluster-classes";
    case Kind::manual: {
      if (prompt && normal_clusters.empty()) return "manual:auto-prompt";
      std::string out = "manual:";
      for (std::size_t i = 0; i < normal_clusters.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(normal_clusters[i]);
      }
      return out;
    }
  }
  return "largest-is-normal";
}

ClassLabeling label_clusters(const ClusterModel& model, const LabelingStrategy& strategy) {
  ClassLabeling out;
  const auto k = static_cast<std::size_t>(model.k);
  switch (strategy.kind) {
    case LabelingStrategy::Kind::per_cluster:
      for (std::size_t c = 0; c < k; ++c) out.cluster_class.push_back(std::to_string(c + 1));
      break;
    case LabelingStrategy::Kind::largest_is_normal: {
      auto sizes = model.cluster_sizes();
      auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      for (std::size_t c = 0; c < k; ++c) {
        out.cluster_class.emplace_back(c == largest ? kNormalClass : kAttackClass);
      }
      break;
    }
    case LabelingStrategy::Kind::manual:
      if (strategy.normal_clusters.empty()) throw TrainError("manual labeling without cluster ordinals");
      out.cluster_class.assign(k, std::string(kAttackClass));
      for (int c : strategy.normal_clusters) {
        if (c < 1 || static_cast<std::size_t>(c) > k) {
          throw TrainError("manual labeling names cluster " + std::to_string(c) + " but only " +
                           std::to_string(k) + " clusters exist");
        }
        out.cluster_class[static_cast<std::size_t>(c - 1)] = std::string(kNormalClass);
      }
      break;
  }
  out.point_class.reserve(model.assignment.size());
  for (int a : model.assignment) out.point_class.push_back(out.cluster_class.at(static_cast<std::size_t>(a)));
  return out;
}

}  // namespace ruleids
