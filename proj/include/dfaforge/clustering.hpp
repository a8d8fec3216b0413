#pragma once

// Partitioning hidden activations into discrete states.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dfaforge {

// Row-major view over `count` points of dimension `dim`.
struct PointsView {
  std::span<const double> data;
  int dim = 0;

  std::size_t count() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> operator[](std::size_t i) const {
    return data.subspan(i * dim, static_cast<std::size_t>(dim));
  }
};

struct Clustering {
  int k = 0;
  int dim = 0;
  std::vector<double> centroids;  // k x dim
  std::vector<int> assignment;    // cluster id per point, dense in 0..k-1
  // Ids the clusters had before empty ones were dropped (identity if none were).
  std::vector<int> original_ids;
  double inertia = 0.0;
  int iterations = 0;
  // Inertia after each assignment pass; non-increasing for k-means.
  std::vector<double> inertia_history;

  std::span<const double> centroid(int c) const {
    return {centroids.data() + static_cast<std::size_t>(c) * dim, static_cast<std::size_t>(dim)};
  }
};

inline constexpr int kDefaultMaxIters = 300;
inline constexpr std::size_t kSilhouetteCap = 5000;

double squared_distance(std::span<const double> a, std::span<const double> b);

// Nearest centroid for each point, ties to the lowest id. Returns the summed
// squared distances. The serial form is the reference for the parallel one.
double assign_nearest(PointsView points, std::span<const double> centroids, int k,
                      std::span<int> assignment);
double assign_nearest_serial(PointsView points, std::span<const double> centroids, int k,
                             std::span<int> assignment);

int nearest_centroid(std::span<const double> point, std::span<const double> centroids, int k);

// Lloyd iteration from k-means++ seeding. Throws KTooLarge when k exceeds the
// number of distinct points and UsageError for k < 1 or no points.
Clustering kmeans(PointsView points, int k, std::uint64_t seed, int max_iters = kDefaultMaxIters);

// Removes clusters without members and renumbers the rest densely, keeping
// their previous ids in original_ids.
void drop_empty_clusters(Clustering& clustering);

// Mean silhouette coefficient with Euclidean distance. Above `cap` points a
// seeded subsample of `cap` points is scored against itself. Throws
// NeedTwoClusters when fewer than two clusters exist.
double silhouette(PointsView points, const Clustering& clustering, std::uint64_t seed = 0,
                  std::size_t cap = kSilhouetteCap);
double silhouette_serial(PointsView points, const Clustering& clustering,
                         std::uint64_t seed = 0, std::size_t cap = kSilhouetteCap);

// Each coordinate becomes 1 if strictly greater than threshold, else 0; every
// distinct bit pattern is one cluster, numbered in lexicographic pattern order.
Clustering quantize_binary(PointsView points, double threshold = 0.5);

// Bit pattern of one point under quantize_binary, as a '0'/'1' string.
std::string binary_pattern(std::span<const double> point, double threshold = 0.5);

}  // namespace dfaforge
