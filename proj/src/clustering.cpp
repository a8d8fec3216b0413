#include "dfaforge/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "dfaforge/errors.hpp"

namespace dfaforge {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

int nearest_centroid(std::span<const double> point, std::span<const double> centroids, int k) {
  const std::size_t dim = point.size();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    double d = squared_distance(point, centroids.subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double assign_nearest_serial(PointsView points, std::span<const double> centroids, int k,
                             std::span<int> assignment) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.count(); ++i) {
    const int c = nearest_centroid(points[i], centroids, k);
    assignment[i] = c;
    inertia += squared_distance(points[i], centroids.subspan(c * points.dim, points.dim));
  }
  return inertia;
}

double assign_nearest(PointsView points, std::span<const double> centroids, int k,
                      std::span<int> assignment) {
  const auto n = static_cast<std::ptrdiff_t>(points.count());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) assignment[i] = nearest_centroid(points[i], centroids, k);
  // Summed in point order so the result does not depend on the thread count.
  double inertia = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i)
    inertia += squared_distance(points[i],
                                centroids.subspan(assignment[i] * points.dim, points.dim));
  return inertia;
}

namespace {

// True once at least k distinct points are seen.
bool has_distinct(PointsView points, int k) {
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < points.count() && static_cast<int>(seen.size()) < k; ++i) {
    auto p = points[i];
    bool fresh = std::none_of(seen.begin(), seen.end(), [&](std::size_t j) {
      auto q = points[j];
      return std::equal(p.begin(), p.end(), q.begin());
    });
    if (fresh) seen.push_back(i);
  }
  return static_cast<int>(seen.size()) >= k;
}

std::vector<double> kmeanspp_seed(PointsView points, int k, std::mt19937_64& rng) {
  const std::size_t n = points.count();
  const int dim = points.dim;
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * dim);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  auto first = points[pick(rng)];
  centroids.insert(centroids.end(), first.begin(), first.end());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], first);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    double r = unit(rng) * total;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      chosen = i;
      if (r < d2[i]) break;
      r -= d2[i];
    }
    auto p = points[chosen];
    centroids.insert(centroids.end(), p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], p));
  }
  return centroids;
}

}  // namespace

Clustering kmeans(PointsView points, int k, std::uint64_t seed, int max_iters) {
  if (k < 1) throw UsageError("k-means needs k >= 1");
  if (points.count() == 0) throw UsageError("k-means needs at least one point");
  if (!has_distinct(points, k))
    throw KTooLarge("k = " + std::to_string(k) + " exceeds the number of distinct points");

  const std::size_t n = points.count();
  const int dim = points.dim;
  std::mt19937_64 rng(seed);

  Clustering out;
  out.k = k;
  out.dim = dim;
  out.centroids = kmeanspp_seed(points, k, rng);
  out.assignment.assign(n, -1);
  std::vector<int> previous;
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<std::size_t> sizes(k);

  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    previous = out.assignment;
    out.inertia = assign_nearest(points, out.centroids, k, out.assignment);
    out.inertia_history.push_back(out.inertia);
    out.iterations = iter + 1;
    if (out.assignment == previous) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = out.assignment[i];
      ++sizes[c];
      auto p = points[i];
      for (int d = 0; d < dim; ++d) sums[c * dim + d] += p[d];
    }
    // Empty clusters re-seed from the points farthest from their own centroid;
    // a point used for one empty cluster is not reused for another.
    std::vector<double> own_d;
    if (std::count(sizes.begin(), sizes.end(), std::size_t{0}) > 0) {
      own_d.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        own_d[i] = squared_distance(points[i], out.centroid(out.assignment[i]));
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        auto far = static_cast<std::size_t>(
            std::max_element(own_d.begin(), own_d.end()) - own_d.begin());
        own_d[far] = -1.0;
        auto p = points[far];
        std::copy(p.begin(), p.end(), out.centroids.begin() + c * dim);
        continue;
      }
      for (int d = 0; d < dim; ++d)
        out.centroids[c * dim + d] = sums[c * dim + d] / static_cast<double>(sizes[c]);
    }
  }

  drop_empty_clusters(out);
  return out;
}

void drop_empty_clusters(Clustering& cl) {
  std::vector<std::size_t> count(cl.k, 0);
  for (int c : cl.assignment) ++count[c];
  std::vector<int> remap(cl.k, -1);
  std::vector<int> ids;
  std::vector<double> kept;
  for (int c = 0; c < cl.k; ++c) {
    if (count[c] == 0) continue;
    remap[c] = static_cast<int>(ids.size());
    ids.push_back(cl.original_ids.empty() ? c : cl.original_ids[c]);
    auto cen = cl.centroid(c);
    kept.insert(kept.end(), cen.begin(), cen.end());
  }
  if (static_cast<int>(ids.size()) != cl.k) {
    for (int& c : cl.assignment) c = remap[c];
    cl.centroids = std::move(kept);
    cl.k = static_cast<int>(ids.size());
  }
  cl.original_ids = std::move(ids);
}

namespace {

std::vector<std::size_t> silhouette_sample(std::size_t n, std::uint64_t seed, std::size_t cap) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > cap) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// Silhouette value of sample point `i` against the whole sample.
double point_silhouette(PointsView points, const Clustering& cl,
                        const std::vector<std::size_t>& sample,
                        const std::vector<std::size_t>& cluster_sizes, std::size_t i,
                        std::vector<double>& dist_sum) {
  const int own = cl.assignment[sample[i]];
  if (cluster_sizes[own] <= 1) return 0.0;
  std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
  auto p = points[sample[i]];
  for (std::size_t j = 0; j < sample.size(); ++j) {
    if (j == i) continue;
    dist_sum[cl.assignment[sample[j]]] += std::sqrt(squared_distance(p, points[sample[j]]));
  }
  const double a = dist_sum[own] / static_cast<double>(cluster_sizes[own] - 1);
  double b = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cl.k; ++c)
    if (c != own && cluster_sizes[c] > 0)
      b = std::min(b, dist_sum[c] / static_cast<double>(cluster_sizes[c]));
  if (!std::isfinite(b)) return 0.0;
  const double m = std::max(a, b);
  return m > 0.0 ? (b - a) / m : 0.0;
}

void check_silhouette_input(PointsView points, const Clustering& cl) {
  if (cl.k < 2) throw NeedTwoClusters("silhouette needs at least two clusters");
  if (cl.assignment.size() != points.count())
    throw UsageError("clustering does not cover the point set");
}

std::vector<std::size_t> sample_sizes(const Clustering& cl, const std::vector<std::size_t>& sample) {
  std::vector<std::size_t> sizes(cl.k, 0);
  for (std::size_t i : sample) ++sizes[cl.assignment[i]];
  return sizes;
}

}  // namespace

double silhouette_serial(PointsView points, const Clustering& cl, std::uint64_t seed,
                         std::size_t cap) {
  check_silhouette_input(points, cl);
  const auto sample = silhouette_sample(points.count(), seed, cap);
  const auto sizes = sample_sizes(cl, sample);
  std::vector<double> dist_sum(cl.k);
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i)
    total += point_silhouette(points, cl, sample, sizes, i, dist_sum);
  return total / static_cast<double>(sample.size());
}

double silhouette(PointsView points, const Clustering& cl, std::uint64_t seed, std::size_t cap) {
  check_silhouette_input(points, cl);
  const auto sample = silhouette_sample(points.count(), seed, cap);
  const auto sizes = sample_sizes(cl, sample);
  const auto m = static_cast<std::ptrdiff_t>(sample.size());
  std::vector<double> values(sample.size());
#pragma omp parallel
  {
    std::vector<double> dist_sum(cl.k);
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < m; ++i)
      values[i] = point_silhouette(points, cl, sample, sizes, static_cast<std::size_t>(i), dist_sum);
  }
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(sample.size());
}

std::string binary_pattern(std::span<const double> point, double threshold) {
  std::string bits(point.size(), '0');
  for (std::size_t d = 0; d < point.size(); ++d)
    if (point[d] > threshold) bits[d] = '1';
  return bits;
}

Clustering quantize_binary(PointsView points, double threshold) {
  if (points.count() == 0) throw UsageError("quantization needs at least one point");
  const std::size_t n = points.count();
  const int dim = points.dim;

  std::vector<std::string> patterns(n);
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < n; ++i) {
    patterns[i] = binary_pattern(points[i], threshold);
    ids.emplace(patterns[i], 0);
  }
  int next = 0;
  for (auto& [pattern, id] : ids) id = next++;

  Clustering out;
  out.k = next;
  out.dim = dim;
  out.assignment.resize(n);
  out.original_ids.resize(next);
  std::iota(out.original_ids.begin(), out.original_ids.end(), 0);
  out.centroids.assign(static_cast<std::size_t>(next) * dim, 0.0);
  std::vector<std::size_t> sizes(next, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = ids[patterns[i]];
    out.assignment[i] = c;
    ++sizes[c];
    auto p = points[i];
    for (int d = 0; d < dim; ++d) out.centroids[c * dim + d] += p[d];
  }
  for (int c = 0; c < next; ++c)
    for (int d = 0; d < dim; ++d) out.centroids[c * dim + d] /= static_cast<double>(sizes[c]);
  for (std::size_t i = 0; i < n; ++i)
    out.inertia += squared_distance(points[i], out.centroid(out.assignment[i]));
  out.iterations = 1;
  out.inertia_history.push_back(out.inertia);
  return out;
}

}  // namespace dfaforge
