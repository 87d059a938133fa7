#include "crisp/data.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <tuple>

#include "crisp/model.hpp"

namespace crisp {

DayContacts DayContacts::from_pairs(int day, int channels, std::vector<ContactRecord> pairs) {
    for (auto& p : pairs) {
        if (p.u > p.v) std::swap(p.u, p.v);
    }
    std::sort(pairs.begin(), pairs.end(), [](const ContactRecord& a, const ContactRecord& b) {
        return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });
    // merge repeats
    std::vector<ContactRecord> merged;
    merged.reserve(pairs.size());
    for (auto& p : pairs) {
        if (!merged.empty() && merged.back().u == p.u && merged.back().v == p.v) {
            for (int j = 0; j < channels; ++j) merged.back().x[j] += p.x[j];
        } else {
            merged.push_back(std::move(p));
        }
    }
    DayContacts out;
    out.day = day;
    out.channels = channels;
    out.links.reserve(2 * merged.size());
    struct Tmp {
        int from, to;
        std::size_t src;
    };
    std::vector<Tmp> tmp;
    tmp.reserve(2 * merged.size());
    for (std::size_t k = 0; k < merged.size(); ++k) {
        tmp.push_back({merged[k].u, merged[k].v, k});
        tmp.push_back({merged[k].v, merged[k].u, k});
    }
    std::sort(tmp.begin(), tmp.end(),
              [](const Tmp& a, const Tmp& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    out.counts.reserve(tmp.size() * static_cast<std::size_t>(channels));
    for (const auto& t : tmp) {
        out.links.push_back({t.from, t.to});
        const auto& x = merged[t.src].x;
        out.counts.insert(out.counts.end(), x.begin(), x.end());
    }
    return out;
}

void DayContacts::remove_individuals(const std::vector<char>& removed) {
    std::size_t w = 0;
    const auto J = static_cast<std::size_t>(channels);
    for (std::size_t k = 0; k < links.size(); ++k) {
        if (removed[links[k].from] || removed[links[k].to]) continue;
        if (w != k) {
            links[w] = links[k];
            std::copy_n(counts.begin() + k * J, J, counts.begin() + w * J);
        }
        ++w;
    }
    links.resize(w);
    counts.resize(w * J);
}

ContactLog::ContactLog(int population, int horizon, int channels)
    : population_(population),
      horizon_(horizon),
      channels_(channels),
      entries_(static_cast<std::size_t>(population)),
      counts_(static_cast<std::size_t>(population)) {
    if (population < 0 || horizon < 1 || channels < 1) {
        throw std::invalid_argument("ContactLog needs population >= 0, horizon >= 1, channels >= 1");
    }
}

ContactLog ContactLog::from_records(int population, int horizon, int channels,
                                    std::span<const ContactRecord> records) {
    // key (t, u, v) of the directed record -> counts
    std::map<std::tuple<int, int, int>, std::vector<int>> directed;
    for (const auto& r : records) {
        if (r.u == r.v) throw DataError("self contact for individual " + std::to_string(r.u));
        if (r.u < 0 || r.v < 0 || r.u >= population || r.v >= population) {
            throw DataError("contact id outside population: " + std::to_string(r.u) + "," +
                            std::to_string(r.v));
        }
        if (r.t < 1 || r.t > horizon) {
            throw DataError("contact day " + std::to_string(r.t) + " outside 1.." +
                            std::to_string(horizon));
        }
        if (static_cast<int>(r.x.size()) != channels) {
            throw DataError("contact has " + std::to_string(r.x.size()) + " channel counts, expected " +
                            std::to_string(channels));
        }
        for (int c : r.x) {
            if (c < 0) throw DataError("negative contact count");
        }
        auto [it, inserted] = directed.emplace(std::make_tuple(r.t, r.u, r.v), r.x);
        if (!inserted) {
            throw DataError("duplicate contact (" + std::to_string(r.u) + "," + std::to_string(r.v) +
                            "," + std::to_string(r.t) + ")");
        }
    }
    // symmetric closure; conflicting mirrored counts are an error
    std::vector<std::pair<std::tuple<int, int, int>, std::vector<int>>> mirrors;
    for (const auto& [key, x] : directed) {
        auto [t, u, v] = key;
        auto it = directed.find({t, v, u});
        if (it == directed.end()) {
            mirrors.push_back({{t, v, u}, x});
        } else if (it->second != x) {
            throw DataError("contact (" + std::to_string(u) + "," + std::to_string(v) + "," +
                            std::to_string(t) + ") disagrees with its mirror");
        }
    }
    for (auto& m : mirrors) directed.emplace(std::move(m.first), std::move(m.second));

    ContactLog log(population, horizon, channels);
    for (const auto& [key, x] : directed) {
        auto [t, u, v] = key;
        log.entries_[u].push_back({v, t});
        log.counts_[u].insert(log.counts_[u].end(), x.begin(), x.end());
        log.last_day_ = std::max(log.last_day_, t);
    }
    log.directed_size_ = directed.size();
    return log;
}

void ContactLog::append_day(const DayContacts& day) {
    if (day.day <= last_day_ || day.day > horizon_) {
        throw std::invalid_argument("append_day: day " + std::to_string(day.day) +
                                    " out of order or past the horizon");
    }
    if (day.channels != channels_) throw std::invalid_argument("append_day: channel mismatch");
    for (std::size_t k = 0; k < day.links.size(); ++k) {
        const auto& l = day.links[k];
        entries_[l.from].push_back({l.to, day.day});
        auto x = day.x(k);
        counts_[l.from].insert(counts_[l.from].end(), x.begin(), x.end());
    }
    directed_size_ += day.links.size();
    last_day_ = day.day;
}

DayContacts ContactLog::day_contacts(int day) const {
    DayContacts out;
    out.day = day;
    out.channels = channels_;
    for (int u = 0; u < population_; ++u) {
        const auto& es = entries_[u];
        auto it = std::lower_bound(es.begin(), es.end(), day,
                                   [](const Entry& e, int d) { return e.day < d; });
        for (; it != es.end() && it->day == day; ++it) {
            auto k = static_cast<std::size_t>(it - es.begin());
            out.links.push_back({u, it->other});
            auto x = counts(u, k);
            out.counts.insert(out.counts.end(), x.begin(), x.end());
        }
    }
    return out;
}

std::vector<ContactRecord> ContactLog::directed_records() const {
    std::vector<ContactRecord> out;
    out.reserve(directed_size_);
    for (int u = 0; u < population_; ++u) {
        const auto& es = entries_[u];
        for (std::size_t k = 0; k < es.size(); ++k) {
            auto x = counts(u, k);
            out.push_back({u, es[k].other, es[k].day, {x.begin(), x.end()}});
        }
    }
    std::sort(out.begin(), out.end(), [](const ContactRecord& a, const ContactRecord& b) {
        return std::tie(a.t, a.u, a.v) < std::tie(b.t, b.u, b.v);
    });
    return out;
}

std::vector<ContactRecord> ContactLog::undirected_records() const {
    auto all = directed_records();
    std::erase_if(all, [](const ContactRecord& r) { return r.u > r.v; });
    return all;
}

TestLog TestLog::from_records(int population, int horizon, std::span<const TestRecord> records) {
    TestLog log(population);
    for (const auto& r : records) {
        if (r.u < 0 || r.u >= population) {
            throw DataError("test id " + std::to_string(r.u) + " outside population");
        }
        if (r.t < 1 || r.t > horizon) {
            throw DataError("test day " + std::to_string(r.t) + " outside 1.." + std::to_string(horizon));
        }
        if (r.outcome != 0 && r.outcome != 1) {
            throw DataError("test outcome " + std::to_string(r.outcome) + " is not 0 or 1");
        }
        log.add(r);
    }
    return log;
}

void TestLog::add(const TestRecord& r) {
    if (r.u < 0 || r.u >= population()) throw DataError("test id outside population");
    if (r.outcome != 0 && r.outcome != 1) throw DataError("test outcome is not 0 or 1");
    by_individual_[r.u].push_back(r);
    ++size_;
}

std::vector<TestRecord> TestLog::records() const {
    std::vector<TestRecord> out;
    out.reserve(size_);
    for (const auto& v : by_individual_) out.insert(out.end(), v.begin(), v.end());
    std::stable_sort(out.begin(), out.end(), [](const TestRecord& a, const TestRecord& b) {
        return std::tie(a.t, a.u) < std::tie(b.t, b.u);
    });
    return out;
}

}  // namespace crisp
