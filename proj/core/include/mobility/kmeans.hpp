#pragma once

#include "mobility/geometry.hpp"
#include "mobility/rng.hpp"
#include "mobility/trajectory.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace mobility {

struct GranularityConfig {
    std::vector<std::int32_t> m_values = {5, 10, 25, 50, 75, 100};
    int kmeans_max_iters = 100;
    double kmeans_tolerance = 1e-8;  // stop when the WCSS improvement falls below this
    int kmeans_restarts = 4;

    void validate() const;
};

struct KMeansModel {
    std::vector<GeoPoint> centroids;  // index = cluster id, ordered by descending size

    std::int32_t m() const { return static_cast<std::int32_t>(centroids.size()); }

    // Nearest centroid, lowest index on ties.
    LocationId assign(const GeoPoint& p) const;
};

struct KMeansFit {
    KMeansModel model;
    std::vector<LocationId> assignment;  // one id per input point
    double wcss = 0.0;
    std::vector<double> wcss_per_iter;   // of the winning restart
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding, best of cfg.kmeans_restarts by
// within-cluster sum of squares. Cluster ids are relabeled by descending
// cluster population so identical data and seed give identical ids.
// Throws if the number of distinct points is below m.
KMeansFit kmeans_fit(std::span<const GeoPoint> points, std::int32_t m,
                     const GranularityConfig& cfg, Rng& rng);

struct AssignedWorld {
    std::map<std::int32_t, KMeansModel> models;                       // per granularity
    std::map<std::string, std::vector<LocationRecord>> user_streams;  // per user, time-ordered
};

// Fits one model per m in cfg.m_values over the pooled points of all users
// and turns every geo record into a LocationRecord carrying all assignments.
AssignedWorld assign_all_granularities(std::span<const GeoRecord> points,
                                       const GranularityConfig& cfg, Rng& rng, int jobs = 1);

}  // namespace mobility
