#include "mobility/csv.hpp"

#include "mobility/features.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace mobility {
namespace {

// Minimal line/field scanner; the toolkit's formats never quote fields.
struct LineReader {
    const std::string& text;
    std::size_t pos = 0;

    bool next_line(std::string_view& line) {
        if (pos >= text.size()) return false;
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        line = std::string_view(text).substr(pos, end - pos);
        pos = end + 1;
        return true;
    }
};

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = std::min(line.find(',', pos), line.size());
        out.push_back(line.substr(pos, comma - pos));
        if (comma == line.size()) break;
        pos = comma + 1;
    }
    return out;
}

double parse_double(std::string_view s, const char* what) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument(std::string("bad ") + what + " field: " + std::string(s));
    return v;
}

std::int64_t parse_i64(std::string_view s, const char* what) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument(std::string("bad ") + what + " field: " + std::string(s));
    return v;
}

std::uint32_t parse_user(std::string_view s) {
    const auto idx = parse_user_name(std::string(s));
    if (!idx) throw std::invalid_argument("bad user_id field: " + std::string(s));
    return *idx;
}

char* append_double(char* p, double v) { return p + std::snprintf(p, 40, "%.17g", v); }

std::vector<std::int32_t> parse_record_header(std::string_view line, std::size_t first_loc_col) {
    const auto fields = split_fields(line);
    std::vector<std::int32_t> m_values;
    for (std::size_t i = first_loc_col; i < fields.size(); ++i) {
        const std::string_view f = fields[i];
        if (f.substr(0, 5) != "loc_m")
            throw std::invalid_argument("bad record header column: " + std::string(f));
        m_values.push_back(static_cast<std::int32_t>(parse_i64(f.substr(5), "granularity")));
    }
    if (m_values.empty()) throw std::invalid_argument("record header has no loc_m columns");
    return m_values;
}

}  // namespace

std::vector<GeoRecord> read_geo_csv(const std::string& text) {
    LineReader reader{text};
    std::string_view line;
    if (!reader.next_line(line) || line != "user_id,timestamp,x,y")
        throw std::invalid_argument("geo csv: bad header");
    std::vector<GeoRecord> out;
    while (reader.next_line(line)) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 4) throw std::invalid_argument("geo csv: bad row: " + std::string(line));
        out.push_back({parse_user(f[0]), parse_i64(f[1], "timestamp"),
                       {parse_double(f[2], "x"), parse_double(f[3], "y")}});
    }
    return out;
}

std::vector<UsageEvent> read_events_csv(const std::string& text) {
    LineReader reader{text};
    std::string_view line;
    if (!reader.next_line(line) || line != "user_id,timestamp,kind,index,value")
        throw std::invalid_argument("events csv: bad header");
    std::vector<UsageEvent> out;
    while (reader.next_line(line)) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 5) throw std::invalid_argument("events csv: bad row: " + std::string(line));
        UsageEvent e;
        e.user_index = parse_user(f[0]);
        e.timestamp = parse_i64(f[1], "timestamp");
        if (f[2] == "app")
            e.kind = EventKind::AppUse;
        else if (f[2] == "sensor")
            e.kind = EventKind::SensorReading;
        else if (f[2] == "broadcast")
            e.kind = EventKind::Broadcast;
        else
            throw std::invalid_argument("events csv: bad kind: " + std::string(f[2]));
        e.index = static_cast<std::int32_t>(parse_i64(f[3], "index"));
        e.value = f[4].empty() ? 0.0 : parse_double(f[4], "value");
        out.push_back(e);
    }
    return out;
}

namespace {

std::string record_header(std::span<const std::int32_t> m_values, bool with_trajectory_id) {
    std::string header = with_trajectory_id ? "trajectory_id,user_id,timestamp"
                                            : "user_id,timestamp";
    for (const std::int32_t m : m_values) header += ",loc_m" + std::to_string(m);
    return header + "\n";
}

void append_record_row(std::string& out, const LocationRecord& rec,
                       std::span<const std::int32_t> m_values) {
    out += std::to_string(rec.timestamp);
    for (const std::int32_t m : m_values) {
        out += ',';
        out += std::to_string(rec.id_at(m));
    }
    out += '\n';
}

LocationRecord parse_record_row(std::span<const std::string_view> fields, std::size_t ts_col,
                                std::span<const std::int32_t> m_values) {
    LocationRecord rec;
    rec.timestamp = parse_i64(fields[ts_col], "timestamp");
    for (std::size_t i = 0; i < m_values.size(); ++i)
        rec.location_ids.push_back(
            {m_values[i],
             static_cast<LocationId>(parse_i64(fields[ts_col + 1 + i], "location id"))});
    return rec;
}

}  // namespace

std::string records_csv(const std::map<std::string, std::vector<LocationRecord>>& streams,
                        std::span<const std::int32_t> m_values) {
    std::string out = record_header(m_values, false);
    for (const auto& [user, records] : streams) {
        for (const LocationRecord& rec : records) {
            out += user;
            out += ',';
            append_record_row(out, rec, m_values);
        }
    }
    return out;
}

std::map<std::string, std::vector<LocationRecord>> read_records_csv(const std::string& text) {
    LineReader reader{text};
    std::string_view line;
    if (!reader.next_line(line)) throw std::invalid_argument("records csv: missing header");
    const auto header_fields = split_fields(line);
    if (header_fields.size() < 3 || header_fields[0] != "user_id" ||
        header_fields[1] != "timestamp")
        throw std::invalid_argument("records csv: bad header");
    const auto m_values = parse_record_header(line, 2);

    std::map<std::string, std::vector<LocationRecord>> out;
    while (reader.next_line(line)) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 2 + m_values.size())
            throw std::invalid_argument("records csv: bad row: " + std::string(line));
        out[std::string(f[0])].push_back(parse_record_row(f, 1, m_values));
    }
    return out;
}

std::string trajectories_csv(std::span<const Trajectory> trajectories,
                             std::span<const std::int32_t> m_values) {
    std::string out = record_header(m_values, true);
    for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
        for (const LocationRecord& rec : trajectories[ti].records) {
            out += std::to_string(ti);
            out += ',';
            out += trajectories[ti].user_id;
            out += ',';
            append_record_row(out, rec, m_values);
        }
    }
    return out;
}

std::vector<Trajectory> read_trajectories_csv(const std::string& text) {
    LineReader reader{text};
    std::string_view line;
    if (!reader.next_line(line)) throw std::invalid_argument("trajectories csv: missing header");
    const auto header_fields = split_fields(line);
    if (header_fields.size() < 4 || header_fields[0] != "trajectory_id" ||
        header_fields[1] != "user_id" || header_fields[2] != "timestamp")
        throw std::invalid_argument("trajectories csv: bad header");
    const auto m_values = parse_record_header(line, 3);

    std::vector<Trajectory> out;
    std::int64_t last_id = -1;
    while (reader.next_line(line)) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 3 + m_values.size())
            throw std::invalid_argument("trajectories csv: bad row: " + std::string(line));
        const std::int64_t id = parse_i64(f[0], "trajectory_id");
        if (id != last_id) {
            if (id != last_id + 1)
                throw std::invalid_argument("trajectories csv: ids must be dense and ordered");
            out.emplace_back();
            out.back().user_id = std::string(f[1]);
            last_id = id;
        }
        out.back().records.push_back(parse_record_row(f, 2, m_values));
    }
    return out;
}

std::string centroids_csv(const std::map<std::int32_t, KMeansModel>& models) {
    std::string out = "m,cluster_id,x,y\n";
    char buf[128];
    for (const auto& [m, model] : models) {
        for (std::size_t c = 0; c < model.centroids.size(); ++c) {
            char* p = buf;
            p += std::snprintf(p, 48, "%d,%zu,", m, c);
            p = append_double(p, model.centroids[c].x);
            *p++ = ',';
            p = append_double(p, model.centroids[c].y);
            *p++ = '\n';
            out.append(buf, p - buf);
        }
    }
    return out;
}

}  // namespace mobility
