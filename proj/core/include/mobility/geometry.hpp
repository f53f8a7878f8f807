#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mobility {

struct GeoPoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline double squared_distance(const GeoPoint& a, const GeoPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double distance(const GeoPoint& a, const GeoPoint& b) {
    return std::sqrt(squared_distance(a, b));
}

// One row of the geo stream: where a user was at a given second.
struct GeoRecord {
    std::uint32_t user_index = 0;
    std::int64_t timestamp = 0;
    GeoPoint position;
};

inline std::string user_name(std::uint32_t user_index) {
    return "u" + std::to_string(user_index);
}

}  // namespace mobility
