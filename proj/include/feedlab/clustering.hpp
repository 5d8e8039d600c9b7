#pragma once

// k-means with k-means++ seeding, silhouette scores and the elbow rule.
// Points are the rows of a dense matrix.

#include "feedlab/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace feedlab {

struct KMeansOptions {
    int restarts = 20;
    int max_iterations = 300;
    double relative_tolerance = 1e-6;
};

template <typename Scalar>
struct KMeansResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> centroids;  ///< k x d
    std::vector<int> labels;
    Scalar inertia = 0;
    int iterations = 0;
};

namespace detail {

template <typename Derived, typename CentroidMatrix>
typename Derived::Scalar assign_points(const Eigen::MatrixBase<Derived>& points, const CentroidMatrix& centroids,
                                       std::vector<int>& labels) {
    using Scalar = typename Derived::Scalar;
    Scalar inertia = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        Eigen::Index best = 0;
        const Scalar d = (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        inertia += d;
    }
    return inertia;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> seed_plus_plus(
    const Eigen::MatrixBase<Derived>& points, int k, Rng& rng) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = points.rows();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> centroids(k, points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nearest =
        (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const Scalar total = nearest.sum();
        Eigen::Index pick = 0;
        if (total > 0) {
            Scalar target = static_cast<Scalar>(rng.uniform()) * total;
            for (pick = 0; pick < n - 1; ++pick) {
                target -= nearest(pick);
                if (target < 0) break;
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
        }
        centroids.row(c) = points.row(pick);
        nearest = nearest.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
    return centroids;
}

}  // namespace detail

/// Best of `options.restarts` Lloyd runs by inertia.
template <typename Derived>
KMeansResult<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& points, int k, std::uint64_t seed,
                                              const KMeansOptions& options = {}) {
    using Scalar = typename Derived::Scalar;
    if (k < 1) throw std::invalid_argument("k-means needs k >= 1");
    if (points.rows() < k) throw std::invalid_argument("k-means needs at least k points");

    KMeansResult<Scalar> best;
    best.inertia = std::numeric_limits<Scalar>::infinity();
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    const auto n = static_cast<std::size_t>(points.rows());

    for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
        KMeansResult<Scalar> run;
        run.centroids = detail::seed_plus_plus(points, k, rng);
        run.labels.assign(n, 0);
        Scalar previous = detail::assign_points(points, run.centroids, run.labels);
        for (run.iterations = 1; run.iterations <= options.max_iterations; ++run.iterations) {
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sums =
                Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(k, points.cols());
            std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
            for (std::size_t i = 0; i < n; ++i) {
                sums.row(run.labels[i]) += points.row(static_cast<Eigen::Index>(i));
                ++counts[static_cast<std::size_t>(run.labels[i])];
            }
            for (int c = 0; c < k; ++c) {
                if (counts[static_cast<std::size_t>(c)] > 0) {
                    run.centroids.row(c) = sums.row(c) / static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
                } else {
                    // Empty cluster: move it onto the point farthest from its centroid.
                    Eigen::Index far = 0;
                    Scalar far_d = -1;
                    for (std::size_t i = 0; i < n; ++i) {
                        const Scalar d = (points.row(static_cast<Eigen::Index>(i)) -
                                          run.centroids.row(run.labels[i]))
                                             .squaredNorm();
                        if (d > far_d) {
                            far_d = d;
                            far = static_cast<Eigen::Index>(i);
                        }
                    }
                    run.centroids.row(c) = points.row(far);
                }
            }
            run.inertia = detail::assign_points(points, run.centroids, run.labels);
            const Scalar change = std::abs(previous - run.inertia);
            previous = run.inertia;
            if (change <= static_cast<Scalar>(options.relative_tolerance) * std::max(run.inertia, Scalar(1e-300)))
                break;
        }
        run.iterations = std::min(run.iterations, options.max_iterations);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

/// Mean silhouette coefficient. Singleton clusters contribute 0; a single cluster gives 0.
template <typename Derived>
typename Derived::Scalar silhouette_score(const Eigen::MatrixBase<Derived>& points, const std::vector<int>& labels,
                                          int k) {
    using Scalar = typename Derived::Scalar;
    const auto n = static_cast<std::size_t>(points.rows());
    if (labels.size() != n) throw std::invalid_argument("silhouette: label count mismatch");
    if (k < 2 || n < 2) return Scalar(0);

    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (const int l : labels) ++sizes[static_cast<std::size_t>(l)];

    Scalar total = 0;
    std::vector<Scalar> dist_sum(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(dist_sum.begin(), dist_sum.end(), Scalar(0));
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            dist_sum[static_cast<std::size_t>(labels[j])] +=
                (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
        }
        const auto own = static_cast<std::size_t>(labels[i]);
        if (sizes[own] < 2) continue;
        const Scalar a = dist_sum[own] / static_cast<Scalar>(sizes[own] - 1);
        Scalar b = std::numeric_limits<Scalar>::infinity();
        for (std::size_t c = 0; c < dist_sum.size(); ++c) {
            if (c == own || sizes[c] == 0) continue;
            b = std::min(b, dist_sum[c] / static_cast<Scalar>(sizes[c]));
        }
        if (!std::isfinite(b)) continue;
        const Scalar denom = std::max(a, b);
        if (denom > 0) total += (b - a) / denom;
    }
    return total / static_cast<Scalar>(n);
}

/// Elbow of an inertia curve: the interior k of maximum curvature |y''| / (1 + y'^2)^(3/2), with
/// both axes scaled to [0, 1] and derivatives taken as discrete differences. Ties go to the smaller
/// k. Curves with fewer than three points, or flat curves, return their smallest k.
template <typename Scalar>
int elbow_k(const std::map<int, Scalar>& inertia_curve) {
    if (inertia_curve.empty()) throw std::invalid_argument("elbow of an empty curve");
    if (inertia_curve.size() < 3) return inertia_curve.begin()->first;
    // Normalize both axes to [0, 1] so the curvature is scale-free.
    const Scalar k_span = static_cast<Scalar>(inertia_curve.rbegin()->first - inertia_curve.begin()->first);
    Scalar lo = inertia_curve.begin()->second, hi = lo;
    for (const auto& [k, v] : inertia_curve) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) return inertia_curve.begin()->first;
    const auto y = [&](Scalar v) { return (v - lo) / (hi - lo); };
    int best_k = inertia_curve.begin()->first;
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    auto prev = inertia_curve.begin();
    auto mid = std::next(prev);
    for (auto next = std::next(mid); next != inertia_curve.end(); ++prev, ++mid, ++next) {
        const Scalar h1 = static_cast<Scalar>(mid->first - prev->first) / k_span;
        const Scalar h2 = static_cast<Scalar>(next->first - mid->first) / k_span;
        const Scalar d1 = (y(mid->second) - y(prev->second)) / h1;
        const Scalar d2 = (y(next->second) - y(mid->second)) / h2;
        const Scalar second = 2 * (d2 - d1) / (h1 + h2);
        const Scalar slope = (d1 + d2) / 2;
        const Scalar curvature = second / std::pow(1 + slope * slope, Scalar(1.5));
        if (curvature > best) {
            best = curvature;
            best_k = mid->first;
        }
    }
    return best_k;
}

}  // namespace feedlab
