#include "crisp/contact_gen.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace crisp {

double contact_rate(double r0, double p_channel, double mean_infectious_days) {
    if (!(p_channel > 0.0)) throw std::domain_error("contact_rate: channel probability must be > 0");
    if (!(mean_infectious_days > 0.0)) throw std::domain_error("contact_rate: mean duration must be > 0");
    if (r0 < 0.0) throw std::domain_error("contact_rate: negative R0");
    return r0 / (mean_infectious_days * p_channel);
}

namespace {

// Floyd's algorithm: k distinct values from [0, n).
void sample_distinct(int n, int k, Rng& rng, std::vector<int>& out) {
    out.clear();
    for (int j = n - k; j < n; ++j) {
        std::uniform_int_distribution<int> pick(0, j);
        int t = pick(rng);
        if (std::find(out.begin(), out.end(), t) == out.end())
            out.push_back(t);
        else
            out.push_back(j);
    }
}

double pairing_rate(double mean_contacts, int pool) {
    if (pool <= 0 || mean_contacts == 0.0) return 0.0;
    double p = mean_contacts / (2.0 * pool);
    if (p > 1.0) {
        throw std::domain_error("contact rate " + std::to_string(mean_contacts) +
                                " too high for a partner pool of " + std::to_string(pool));
    }
    return p;
}

struct Pairing {
    int a;
    int b;
};

// Draws partners of u from a pool of `pool` candidates mapped to ids by `to_id`.
template <class ToId>
void draw_partners(int u, int pool, double rate, Rng& rng, std::vector<int>& scratch,
                   std::vector<Pairing>& pairs, ToId to_id) {
    if (rate <= 0.0) return;
    std::binomial_distribution<int> degree(pool, rate);
    int k = degree(rng);
    if (k == 0) return;
    sample_distinct(pool, k, rng, scratch);
    for (int idx : scratch) {
        int v = to_id(idx);
        pairs.push_back({std::min(u, v), std::max(u, v)});
    }
}

// Mirrors the pairings; a pair drawn from both ends carries count 2.
DayContacts build_day(int day, int channel, int channels, std::vector<Pairing>& pairs) {
    auto key = [](const Pairing& p) { return std::pair{p.a, p.b}; };
    std::sort(pairs.begin(), pairs.end(), [&](const Pairing& x, const Pairing& y) { return key(x) < key(y); });
    struct Directed {
        int from, to, count;
    };
    std::vector<Directed> links;
    links.reserve(2 * pairs.size());
    for (std::size_t i = 0; i < pairs.size();) {
        std::size_t j = i;
        while (j < pairs.size() && pairs[j].a == pairs[i].a && pairs[j].b == pairs[i].b) ++j;
        int count = static_cast<int>(j - i);
        links.push_back({pairs[i].a, pairs[i].b, count});
        links.push_back({pairs[i].b, pairs[i].a, count});
        i = j;
    }
    std::sort(links.begin(), links.end(), [](const Directed& x, const Directed& y) {
        return std::pair{x.from, x.to} < std::pair{y.from, y.to};
    });
    DayContacts out;
    out.day = day;
    out.channels = channels;
    out.links.reserve(links.size());
    out.counts.assign(links.size() * static_cast<std::size_t>(channels), 0);
    for (std::size_t k = 0; k < links.size(); ++k) {
        out.links.push_back({links[k].from, links[k].to});
        out.counts[k * static_cast<std::size_t>(channels) + static_cast<std::size_t>(channel)] = links[k].count;
    }
    return out;
}

void check_channel(int channel, int channels) {
    if (channels < 1 || channel < 0 || channel >= channels) {
        throw std::invalid_argument("channel index out of range");
    }
}

}  // namespace

DayContacts gen_uniform_day(int population, double mean_contacts, int day, Rng& rng, int channel,
                            int channels) {
    check_channel(channel, channels);
    if (population < 1) throw std::domain_error("gen_uniform_day: empty population");
    std::vector<Pairing> pairs;
    if (mean_contacts == 0.0) return build_day(day, channel, channels, pairs);
    if (population < 2) throw std::domain_error("gen_uniform_day: contacts need a population of 2 or more");
    double rate = pairing_rate(mean_contacts, population - 1);
    std::vector<int> scratch;
    for (int u = 0; u < population; ++u) {
        draw_partners(u, population - 1, rate, rng, scratch, pairs,
                      [u](int idx) { return idx < u ? idx : idx + 1; });
    }
    return build_day(day, channel, channels, pairs);
}

DayContacts gen_bubbles_day(int population, int bubble_size, double intra_c, double inter_c, int day,
                            Rng& rng, int channel, int channels) {
    check_channel(channel, channels);
    if (population < 2) throw std::domain_error("gen_bubbles_day: population must be >= 2");
    if (bubble_size < 1 || bubble_size > population) {
        throw std::domain_error("gen_bubbles_day: bubble size " + std::to_string(bubble_size) +
                                " exceeds population " + std::to_string(population));
    }
    std::vector<Pairing> pairs;
    std::vector<int> scratch;
    for (int u = 0; u < population; ++u) {
        int start = (u / bubble_size) * bubble_size;
        int size = std::min(bubble_size, population - start);
        int intra_pool = size - 1;
        int inter_pool = population - size;
        draw_partners(u, intra_pool, pairing_rate(intra_c, intra_pool), rng, scratch, pairs,
                      [u, start](int idx) {
                          int id = start + idx;
                          return id < u ? id : id + 1;
                      });
        draw_partners(u, inter_pool, pairing_rate(inter_c, inter_pool), rng, scratch, pairs,
                      [start, size](int idx) { return idx < start ? idx : idx + size; });
    }
    return build_day(day, channel, channels, pairs);
}

void ContactPatternSpec::validate() const {
    if (population < 1 || horizon < 1) throw std::invalid_argument("pattern needs population, horizon >= 1");
    if (phases.empty()) throw std::invalid_argument("pattern has no phases");
    int next = 1;
    for (const auto& ph : phases) {
        if (ph.first_day != next || ph.last_day < ph.first_day) {
            throw std::invalid_argument("pattern phases must partition 1..horizon in order");
        }
        if (ph.r0 < 0.0 || ph.intra_r0 < 0.0 || ph.inter_r0 < 0.0) {
            throw std::invalid_argument("pattern R0 values must be >= 0");
        }
        next = ph.last_day + 1;
    }
    if (next != horizon + 1) throw std::invalid_argument("pattern phases must end on the horizon");
    if (bubble_size < 1) throw std::invalid_argument("bubble size must be >= 1");
    if (channel < 0 || channel >= channels) throw std::invalid_argument("channel index out of range");
}

const ContactPhase& ContactPatternSpec::phase_for(int day) const {
    for (const auto& ph : phases) {
        if (day >= ph.first_day && day <= ph.last_day) return ph;
    }
    throw std::domain_error("no contact phase covers day " + std::to_string(day));
}

ContactPatternSpec ContactPatternSpec::uniform(int population, int horizon, double r0, double p_channel,
                                               double mean_infectious_days, std::uint64_t seed) {
    ContactPatternSpec spec;
    spec.population = population;
    spec.horizon = horizon;
    spec.p_channel = p_channel;
    spec.mean_infectious_days = mean_infectious_days;
    spec.seed = seed;
    spec.phases.push_back({1, horizon, PatternKind::uniform, r0, 0.0, 0.0});
    return spec;
}

DayContacts generate_day(const ContactPatternSpec& spec, int day) {
    const auto& ph = spec.phase_for(day);
    Rng rng = make_rng(spec.seed, {0xC0A7AC7ULL, static_cast<std::uint64_t>(day)});
    if (ph.kind == PatternKind::uniform) {
        double c = contact_rate(ph.r0, spec.p_channel, spec.mean_infectious_days);
        return gen_uniform_day(spec.population, c, day, rng, spec.channel, spec.channels);
    }
    double intra = contact_rate(ph.intra_r0, spec.p_channel, spec.mean_infectious_days);
    double inter = contact_rate(ph.inter_r0, spec.p_channel, spec.mean_infectious_days);
    return gen_bubbles_day(spec.population, spec.bubble_size, intra, inter, day, rng, spec.channel,
                           spec.channels);
}

ContactLog generate_log(const ContactPatternSpec& spec) {
    spec.validate();
    ContactLog log(spec.population, spec.horizon, spec.channels);
    for (int t = 1; t <= spec.horizon; ++t) log.append_day(generate_day(spec, t));
    return log;
}

}  // namespace crisp
