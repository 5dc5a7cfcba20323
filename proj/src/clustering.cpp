#include "emdens/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace emdens {

namespace {

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

Matrix kmeanspp_init(const Matrix& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  Matrix centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = points.row(first(rng));
  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(points, i, centroids, c - 1));
    const double total = d2.sum();
    if (total <= 0.0) {  // all points already on a centroid
      std::uniform_int_distribution<Eigen::Index> any(0, n - 1);
      centroids.row(c) = points.row(any(rng));
      continue;
    }
    std::uniform_real_distribution<double> uni(0.0, total);
    double target = uni(rng);
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        pick = i;
        break;
      }
    }
    centroids.row(c) = points.row(pick);
  }
  return centroids;
}

struct LloydRun {
  std::vector<int> labels;
  Matrix centroids;
  double ssd = 0.0;
  int iterations = 0;
};

LloydRun lloyd(const Matrix& points, int k, int max_iters, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  LloydRun run;
  run.centroids = kmeanspp_init(points, k, rng);
  run.labels.assign(n, 0);
  double prev_ssd = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double ssd = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points, i, run.centroids, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points, i, run.centroids, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.labels[i] != best) {
        run.labels[i] = best;
        changed = true;
      }
      ssd += best_d;
    }

    // repair empty clusters with the point farthest from its centroid
    std::vector<Eigen::Index> size(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) ++size[run.labels[i]];
    for (int c = 0; c < k; ++c) {
      if (size[c] > 0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (size[run.labels[i]] <= 1) continue;
        const double d = sq_dist(points, i, run.centroids, run.labels[i]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --size[run.labels[far]];
      run.labels[far] = c;
      ++size[c];
      changed = true;
    }

    Matrix sums = Matrix::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(run.labels[i]) += points.row(i);
    for (int c = 0; c < k; ++c) run.centroids.row(c) = sums.row(c) / double(size[c]);

    run.iterations = iter + 1;
    if (!changed) break;
    prev_ssd = ssd;
    (void)prev_ssd;
  }

  run.ssd = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    run.ssd += sq_dist(points, i, run.centroids, run.labels[i]);
  return run;
}

}  // namespace

ClusterResult kmeans(const Matrix& points, int k, const KMeansOptions& opts) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw DataError("k must be >= 1");
  if (k > n) throw DataError("k exceeds number of points");
  if (opts.restarts < 1) throw DataError("restarts must be >= 1");

  ClusterResult best;
  best.total_ssd = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(r) * 0x9e3779b97f4a7c15ULL);
    LloydRun run = lloyd(points, k, opts.max_iters, rng);
    if (run.ssd < best.total_ssd) {
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centroids);
      best.total_ssd = run.ssd;
      best.iterations = run.iterations;
    }
  }
  best.seed = opts.seed;
  return best;
}

SilhouetteStats silhouette(const Matrix& points, const std::vector<int>& labels,
                           int subsample_size, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("labels length does not match point count");
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (k < 2) throw NumericError("silhouette undefined for fewer than 2 clusters");

  // subsample must keep every cluster populated; bounded retries
  std::vector<Eigen::Index> sample(n);
  std::iota(sample.begin(), sample.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  if (static_cast<Eigen::Index>(subsample_size) < n) {
    for (int attempt = 0;; ++attempt) {
      std::shuffle(sample.begin(), sample.end(), rng);
      std::vector<bool> seen(k, false);
      for (int i = 0; i < subsample_size; ++i) seen[labels[sample[i]]] = true;
      if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) break;
      if (attempt >= 50)
        throw NumericError("could not draw a subsample covering every cluster");
    }
    sample.resize(subsample_size);
  }

  const auto m = static_cast<Eigen::Index>(sample.size());
  std::vector<Eigen::Index> cluster_size(k, 0);
  for (auto idx : sample) ++cluster_size[labels[idx]];

  std::vector<double> scores;
  scores.reserve(m);
  std::vector<double> sum_d(k);
  for (Eigen::Index a = 0; a < m; ++a) {
    std::fill(sum_d.begin(), sum_d.end(), 0.0);
    const int own = labels[sample[a]];
    for (Eigen::Index b = 0; b < m; ++b) {
      if (a == b) continue;
      sum_d[labels[sample[b]]] += (points.row(sample[a]) - points.row(sample[b])).norm();
    }
    const double intra =
        cluster_size[own] > 1 ? sum_d[own] / double(cluster_size[own] - 1) : 0.0;
    double inter = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own && cluster_size[c] > 0)
        inter = std::min(inter, sum_d[c] / double(cluster_size[c]));
    if (cluster_size[own] == 1) {
      scores.push_back(1.0);  // singleton convention: a = 0
    } else {
      const double denom = std::max(intra, inter);
      scores.push_back(denom > 0 ? (inter - intra) / denom : 0.0);
    }
  }

  SilhouetteStats st;
  st.sample_size = static_cast<int>(scores.size());
  st.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double var = 0.0;
  for (double s : scores) var += (s - st.mean) * (s - st.mean);
  var /= scores.size() > 1 ? double(scores.size() - 1) : 1.0;
  st.stderr_mean = std::sqrt(var / double(scores.size()));
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  auto median_of = [](const std::vector<double>& v) {
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  };
  st.median = median_of(sorted);
  std::vector<double> dev;
  dev.reserve(scores.size());
  for (double s : scores) dev.push_back(std::abs(s - st.median));
  std::sort(dev.begin(), dev.end());
  st.mad = median_of(dev);
  return st;
}

SsdCurve ssd_sweep(const Matrix& points, int k_max, int subsample_size,
                   std::uint64_t seed, const KMeansOptions& base) {
  if (k_max < 3) throw DataError("k_max must be >= 3");
  const Eigen::Index n = points.rows();

  Matrix sub;
  if (static_cast<Eigen::Index>(subsample_size) < n) {
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    sub.resize(subsample_size, points.cols());
    for (int i = 0; i < subsample_size; ++i) sub.row(i) = points.row(idx[i]);
  } else {
    sub = points;
  }

  SsdCurve curve;
  curve.subsample_size = static_cast<int>(sub.rows());
  curve.seed = seed;
  for (int k = 1; k <= k_max; ++k) {
    KMeansOptions opts = base;
    opts.seed = seed + static_cast<std::uint64_t>(k);
    curve.k_values.push_back(k);
    curve.raw_ssd.push_back(kmeans(sub, k, opts).total_ssd);
  }
  const double maxv = *std::max_element(curve.raw_ssd.begin(), curve.raw_ssd.end());
  curve.scaled_ssd.resize(curve.raw_ssd.size());
  for (std::size_t i = 0; i < curve.raw_ssd.size(); ++i)
    curve.scaled_ssd[i] = maxv > 0 ? curve.raw_ssd[i] / maxv : 0.0;
  return curve;
}

std::optional<int> inflection_k(const SsdCurve& curve, double tolerance,
                                InflectionMode mode) {
  const auto& s = curve.scaled_ssd;
  if (s.size() < 4) throw DataError("SSD curve needs at least 4 points");
  // second difference at k = 2 .. k_max-1 (1-based k, 0-based index i = k-1)
  std::vector<double> d2;
  for (std::size_t i = 1; i + 1 < s.size(); ++i)
    d2.push_back(s[i + 1] - 2.0 * s[i] + s[i - 1]);

  if (mode == InflectionMode::Tolerance) {
    for (std::size_t i = 0; i < d2.size(); ++i)
      if (std::abs(d2[i]) <= tolerance) return curve.k_values[i + 1];
    return std::nullopt;
  }
  for (std::size_t i = 0; i < d2.size(); ++i) {
    if (d2[i] == 0.0) return curve.k_values[i + 1];
    if (i + 1 < d2.size() && d2[i] * d2[i + 1] < 0.0) return curve.k_values[i + 1];
  }
  return std::nullopt;
}

void export_ssd_curve_csv(const SsdCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "k,scaled_ssd,raw_ssd\n";
  out.precision(17);
  for (std::size_t i = 0; i < curve.k_values.size(); ++i)
    out << curve.k_values[i] << ',' << curve.scaled_ssd[i] << ',' << curve.raw_ssd[i] << '\n';
}

}  // namespace emdens
