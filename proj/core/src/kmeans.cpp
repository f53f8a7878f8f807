#include "mobility/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace mobility {
namespace {

struct PointKey {
    std::uint64_t xbits, ybits;
    bool operator==(const PointKey&) const = default;
};

struct PointKeyHash {
    std::size_t operator()(const PointKey& k) const {
        return Rng::mix(k.xbits, k.ybits);
    }
};

PointKey key_of(const GeoPoint& p) {
    PointKey k{};
    std::memcpy(&k.xbits, &p.x, sizeof k.xbits);
    std::memcpy(&k.ybits, &p.y, sizeof k.ybits);
    return k;
}

// Lloyd's iterations are run over distinct points weighted by multiplicity;
// dwell-heavy streams repeat the same coordinates thousands of times and the
// weighted problem has the identical optimum and identical iterates.
struct WeightedPoints {
    std::vector<GeoPoint> pts;
    std::vector<double> weight;
    std::vector<std::uint32_t> origin_to_distinct;  // raw index -> distinct index
    double total_weight = 0.0;
};

WeightedPoints dedup(std::span<const GeoPoint> points) {
    WeightedPoints wp;
    wp.origin_to_distinct.resize(points.size());
    std::unordered_map<PointKey, std::uint32_t, PointKeyHash> seen;
    seen.reserve(points.size() / 4 + 16);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [it, inserted] =
            seen.try_emplace(key_of(points[i]), static_cast<std::uint32_t>(wp.pts.size()));
        if (inserted) {
            wp.pts.push_back(points[i]);
            wp.weight.push_back(0.0);
        }
        wp.weight[it->second] += 1.0;
        wp.origin_to_distinct[i] = it->second;
    }
    wp.total_weight = static_cast<double>(points.size());
    return wp;
}

std::uint32_t nearest_centroid(const GeoPoint& p, std::span<const GeoPoint> centroids) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<GeoPoint> kmeanspp_init(const WeightedPoints& wp, std::int32_t m, Rng& rng) {
    std::vector<GeoPoint> centroids;
    centroids.reserve(m);

    // First centroid proportional to weight.
    double r = rng.uniform01() * wp.total_weight;
    std::size_t first = wp.pts.size() - 1;
    for (std::size_t i = 0; i < wp.pts.size(); ++i) {
        r -= wp.weight[i];
        if (r < 0.0) {
            first = i;
            break;
        }
    }
    centroids.push_back(wp.pts[first]);

    std::vector<double> d2(wp.pts.size());
    for (std::size_t i = 0; i < wp.pts.size(); ++i)
        d2[i] = squared_distance(wp.pts[i], centroids[0]);

    while (static_cast<std::int32_t>(centroids.size()) < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < wp.pts.size(); ++i) total += wp.weight[i] * d2[i];
        std::size_t chosen = wp.pts.size();
        if (total > 0.0) {
            double s = rng.uniform01() * total;
            for (std::size_t i = 0; i < wp.pts.size(); ++i) {
                s -= wp.weight[i] * d2[i];
                if (s < 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        if (chosen == wp.pts.size()) {
            // Floating-point underrun of the sampling sweep: take the first
            // point that is not already a centroid (d2 > 0).
            for (std::size_t i = 0; i < wp.pts.size(); ++i) {
                if (d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
            if (chosen == wp.pts.size()) chosen = wp.pts.size() - 1;
        }
        centroids.push_back(wp.pts[chosen]);
        for (std::size_t i = 0; i < wp.pts.size(); ++i)
            d2[i] = std::min(d2[i], squared_distance(wp.pts[i], centroids.back()));
    }
    return centroids;
}

struct LloydResult {
    std::vector<GeoPoint> centroids;
    std::vector<std::uint32_t> assignment;  // over distinct points
    double wcss = 0.0;
    std::vector<double> wcss_per_iter;
    int iterations = 0;
};

LloydResult lloyd(const WeightedPoints& wp, std::vector<GeoPoint> centroids,
                  const GranularityConfig& cfg) {
    const std::size_t n = wp.pts.size();
    const std::size_t k = centroids.size();
    LloydResult res;
    res.assignment.assign(n, 0);

    std::vector<double> sum_x(k), sum_y(k), mass(k);
    double prev_wcss = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < cfg.kmeans_max_iters; ++iter) {
        double wcss = 0.0;
        bool changed = false;
        std::fill(sum_x.begin(), sum_x.end(), 0.0);
        std::fill(sum_y.begin(), sum_y.end(), 0.0);
        std::fill(mass.begin(), mass.end(), 0.0);

        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = nearest_centroid(wp.pts[i], centroids);
            if (c != res.assignment[i]) {
                res.assignment[i] = c;
                changed = true;
            }
            const double w = wp.weight[i];
            wcss += w * squared_distance(wp.pts[i], centroids[c]);
            sum_x[c] += w * wp.pts[i].x;
            sum_y[c] += w * wp.pts[i].y;
            mass[c] += w;
        }
        res.wcss = wcss;
        res.wcss_per_iter.push_back(wcss);
        res.iterations = iter + 1;

        // Re-seed empty clusters at the point farthest from its centroid;
        // reassigning that point keeps a later empty cluster from picking it
        // again. Mean updates are skipped on such an iteration.
        bool reseeded = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (mass[c] > 0.0) continue;
            double worst = -1.0;
            std::size_t worst_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = squared_distance(wp.pts[i], centroids[res.assignment[i]]);
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            centroids[c] = wp.pts[worst_i];
            res.assignment[worst_i] = static_cast<std::uint32_t>(c);
            reseeded = true;
            changed = true;
        }
        if (!reseeded) {
            for (std::size_t c = 0; c < k; ++c) {
                centroids[c].x = sum_x[c] / mass[c];
                centroids[c].y = sum_y[c] / mass[c];
            }
        }

        if (!changed || prev_wcss - wcss < cfg.kmeans_tolerance) break;
        prev_wcss = wcss;
    }

    // Sync assignments and WCSS with the final centroid positions.
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        res.assignment[i] = nearest_centroid(wp.pts[i], centroids);
        wcss += wp.weight[i] * squared_distance(wp.pts[i], centroids[res.assignment[i]]);
    }
    res.wcss = wcss;
    res.centroids = std::move(centroids);
    return res;
}

}  // namespace

void GranularityConfig::validate() const {
    if (m_values.empty()) throw std::invalid_argument("m_values must not be empty");
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        if (m_values[i] < 2) throw std::invalid_argument("every m value must be >= 2");
        if (i > 0 && m_values[i] <= m_values[i - 1])
            throw std::invalid_argument("m_values must be strictly increasing");
    }
    if (kmeans_max_iters < 1) throw std::invalid_argument("kmeans_max_iters must be >= 1");
    if (kmeans_restarts < 1) throw std::invalid_argument("kmeans_restarts must be >= 1");
    if (kmeans_tolerance < 0.0) throw std::invalid_argument("kmeans_tolerance must be >= 0");
}

LocationId KMeansModel::assign(const GeoPoint& p) const {
    return static_cast<LocationId>(nearest_centroid(p, centroids));
}

KMeansFit kmeans_fit(std::span<const GeoPoint> points, std::int32_t m,
                     const GranularityConfig& cfg, Rng& rng) {
    if (m < 1) throw std::invalid_argument("kmeans_fit: m must be >= 1");
    const WeightedPoints wp = dedup(points);
    if (static_cast<std::int32_t>(wp.pts.size()) < m)
        throw std::invalid_argument("kmeans_fit: only " + std::to_string(wp.pts.size()) +
                                    " distinct points for m=" + std::to_string(m));

    LloydResult best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < cfg.kmeans_restarts; ++restart) {
        LloydResult run = lloyd(wp, kmeanspp_init(wp, m, rng), cfg);
        if (run.wcss < best.wcss) best = std::move(run);
    }

    // Relabel clusters by descending population; stable on ties.
    std::vector<double> population(m, 0.0);
    for (std::size_t i = 0; i < wp.pts.size(); ++i)
        population[best.assignment[i]] += wp.weight[i];
    std::vector<std::int32_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::int32_t a, std::int32_t b) { return population[a] > population[b]; });
    std::vector<std::int32_t> relabel(m);
    for (std::int32_t new_id = 0; new_id < m; ++new_id) relabel[order[new_id]] = new_id;

    KMeansFit fit;
    fit.model.centroids.resize(m);
    for (std::int32_t old_id = 0; old_id < m; ++old_id)
        fit.model.centroids[relabel[old_id]] = best.centroids[old_id];
    fit.assignment.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        fit.assignment[i] = relabel[best.assignment[wp.origin_to_distinct[i]]];
    fit.wcss = best.wcss;
    fit.wcss_per_iter = std::move(best.wcss_per_iter);
    fit.iterations = best.iterations;
    return fit;
}

AssignedWorld assign_all_granularities(std::span<const GeoRecord> points,
                                       const GranularityConfig& cfg, Rng& rng, int jobs) {
    cfg.validate();
    std::vector<GeoPoint> raw(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) raw[i] = points[i].position;

    // Independent child rng per granularity so fits can run concurrently.
    std::vector<Rng> rngs;
    rngs.reserve(cfg.m_values.size());
    for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi)
        rngs.push_back(rng.derive(0x6b6d65616e73ULL, cfg.m_values[mi]));

    std::vector<KMeansFit> fits(cfg.m_values.size());
    if (jobs <= 1 || cfg.m_values.size() == 1) {
        for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi)
            fits[mi] = kmeans_fit(raw, cfg.m_values[mi], cfg, rngs[mi]);
    } else {
        std::vector<std::future<KMeansFit>> futures;
        for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi)
            futures.push_back(std::async(std::launch::async, [&, mi] {
                return kmeans_fit(raw, cfg.m_values[mi], cfg, rngs[mi]);
            }));
        for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) fits[mi] = futures[mi].get();
    }

    AssignedWorld world;
    for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi)
        world.models.emplace(cfg.m_values[mi], fits[mi].model);

    for (std::size_t i = 0; i < points.size(); ++i) {
        LocationRecord rec;
        rec.timestamp = points[i].timestamp;
        for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi)
            rec.location_ids.push_back({cfg.m_values[mi], fits[mi].assignment[i]});
        world.user_streams[user_name(points[i].user_index)].push_back(std::move(rec));
    }
    return world;
}

}  // namespace mobility
