#include "mobility/markov.hpp"

#include <sstream>
#include <stdexcept>

namespace mobility {

MarkovModel markov_init(std::int32_t m) {
    if (m < 2) throw std::invalid_argument("markov model needs m >= 2");
    MarkovModel model;
    model.m = m;
    model.counts.assign(static_cast<std::size_t>(m) * m, 0);
    model.global_dist.assign(m, 0);
    return model;
}

void markov_add_history(MarkovModel& model, std::span<const LocationId> history) {
    LocationId prev = -1;
    for (const LocationId loc : history) {
        if (loc < 0 || loc >= model.m)
            throw std::out_of_range("location id " + std::to_string(loc) + " outside m=" +
                                    std::to_string(model.m));
        if (loc == prev) continue;  // run continues
        ++model.global_dist[loc];
        if (prev >= 0) ++model.at(prev, loc);
        prev = loc;
    }
}

MarkovModel markov_fit(std::span<const std::vector<LocationId>> histories, std::int32_t m) {
    MarkovModel model = markov_init(m);
    for (const auto& h : histories) markov_add_history(model, h);
    return model;
}

LocationId markov_predict(const MarkovModel& model, LocationId current) {
    if (current < 0 || current >= model.m)
        throw std::out_of_range("current location outside model range");

    LocationId best = -1;
    std::int64_t best_count = 0;
    for (LocationId to = 0; to < model.m; ++to) {
        const std::int64_t c = model.at(current, to);
        if (c > best_count) {
            best_count = c;
            best = to;
        }
    }
    if (best >= 0) return best;

    // Unseen state: most frequent location overall, skipping current.
    best = current == 0 ? 1 : 0;
    best_count = -1;
    for (LocationId loc = 0; loc < model.m; ++loc) {
        if (loc == current) continue;
        if (model.global_dist[loc] > best_count) {
            best_count = model.global_dist[loc];
            best = loc;
        }
    }
    return best;
}

std::string markov_csv(const MarkovModel& model) {
    std::string out = "m,from,to,count\n";
    for (LocationId from = 0; from < model.m; ++from) {
        for (LocationId to = 0; to < model.m; ++to) {
            const std::int64_t c = model.at(from, to);
            if (c == 0) continue;
            out += std::to_string(model.m) + ',' + std::to_string(from) + ',' +
                   std::to_string(to) + ',' + std::to_string(c) + '\n';
        }
    }
    for (LocationId loc = 0; loc < model.m; ++loc) {
        if (model.global_dist[loc] == 0) continue;
        out += std::to_string(model.m) + ",global," + std::to_string(loc) + ',' +
               std::to_string(model.global_dist[loc]) + '\n';
    }
    return out;
}

MarkovModel markov_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "m,from,to,count")
        throw std::invalid_argument("markov csv: bad header");

    MarkovModel model;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string m_s, from_s, to_s, count_s;
        if (!std::getline(row, m_s, ',') || !std::getline(row, from_s, ',') ||
            !std::getline(row, to_s, ',') || !std::getline(row, count_s))
            throw std::invalid_argument("markov csv: bad row: " + line);
        const std::int32_t m = std::stoi(m_s);
        if (model.m == 0) model = markov_init(m);
        if (m != model.m) throw std::invalid_argument("markov csv: mixed m values");
        const LocationId to = std::stoi(to_s);
        const std::int64_t count = std::stoll(count_s);
        if (from_s == "global")
            model.global_dist[to] = count;
        else
            model.at(std::stoi(from_s), to) = count;
    }
    if (model.m == 0) throw std::invalid_argument("markov csv: no rows");
    return model;
}

}  // namespace mobility
