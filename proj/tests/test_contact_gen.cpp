#include <cmath>
#include <set>
#include <tuple>

#include "crisp/contact_gen.hpp"
#include "doctest.h"

using namespace crisp;

namespace {

void check_well_formed(const DayContacts& day, int population) {
    std::set<std::pair<int, int>> seen;
    for (std::size_t k = 0; k < day.size(); ++k) {
        auto [a, b] = day.links[k];
        CHECK(a != b);
        CHECK(a >= 0);
        CHECK(b < population);
        CHECK(seen.insert({a, b}).second);
    }
    for (std::size_t k = 0; k < day.size(); ++k) {
        auto [a, b] = day.links[k];
        CHECK(seen.count({b, a}) == 1);
    }
    // mirrored counts agree
    for (std::size_t k = 0; k < day.size(); ++k) {
        auto [a, b] = day.links[k];
        for (std::size_t i = 0; i < day.size(); ++i) {
            if (day.links[i].from == b && day.links[i].to == a) CHECK(day.x(i)[0] == day.x(k)[0]);
        }
    }
}

long total_count(const DayContacts& day) {
    long acc = 0;
    for (int c : day.counts) acc += c;
    return acc;
}

}  // namespace

TEST_CASE("contact rate from R0") {
    CHECK(contact_rate(2.5, 0.025, 19.88) == doctest::Approx(5.03).epsilon(1e-3));
    CHECK(contact_rate(2.5, 0.01, 19.88) == doctest::Approx(12.58).epsilon(1e-3));
    CHECK(contact_rate(0.0, 0.01, 19.88) == 0.0);
    CHECK_THROWS_AS(contact_rate(2.5, 0.0, 19.88), std::domain_error);
    CHECK_THROWS_AS(contact_rate(2.5, 0.01, 0.0), std::domain_error);
}

TEST_CASE("uniform day is empty at zero rate") {
    Rng rng = make_rng(1);
    CHECK(gen_uniform_day(100, 0.0, 1, rng).size() == 0);
}

TEST_CASE("uniform day is symmetric without self or duplicate contacts") {
    Rng rng = make_rng(2);
    for (int rep = 0; rep < 5; ++rep) check_well_formed(gen_uniform_day(300, 8.0, 1, rng), 300);
}

TEST_CASE("uniform day matches the binomial contact mass") {
    const int n = 10000;
    const double c = 5.03;
    const int draws = 100;
    double sum = 0.0;
    for (int d = 0; d < draws; ++d) {
        Rng rng = make_rng(99, {static_cast<std::uint64_t>(d)});
        sum += static_cast<double>(total_count(gen_uniform_day(n, c, 1, rng)));
    }
    // each individual adds 2 * Binomial(n-1, c / (2(n-1))) counts
    double p = c / (2.0 * (n - 1));
    double mean = 2.0 * n * (n - 1) * p;
    double sd_of_mean = 2.0 * std::sqrt(n * (n - 1) * p * (1.0 - p)) / std::sqrt(static_cast<double>(draws));
    CHECK(mean == doctest::Approx(50300.0));
    CHECK(std::abs(sum / draws - mean) < 3.0 * sd_of_mean);
}

TEST_CASE("uniform rate above one pairing per partner is rejected") {
    Rng rng = make_rng(3);
    CHECK_THROWS_AS(gen_uniform_day(3, 5.0, 1, rng), std::domain_error);
    CHECK_THROWS_AS(gen_uniform_day(1, 1.0, 1, rng), std::domain_error);
}

TEST_CASE("bubbles without outside contacts are block diagonal") {
    Rng rng = make_rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        auto day = gen_bubbles_day(95, 20, 6.0, 0.0, 1, rng);
        check_well_formed(day, 95);
        for (const auto& l : day.links) CHECK(l.from / 20 == l.to / 20);
    }
}

TEST_CASE("bubble split of the contact mass") {
    const int n = 2000, size = 20;
    double intra_c = contact_rate(2.0, 0.01, 19.88), inter_c = contact_rate(0.5, 0.01, 19.88);
    double intra = 0.0, inter = 0.0;
    const int draws = 50;
    for (int d = 0; d < draws; ++d) {
        Rng rng = make_rng(5, {static_cast<std::uint64_t>(d)});
        auto day = gen_bubbles_day(n, size, intra_c, inter_c, 1, rng);
        for (std::size_t k = 0; k < day.size(); ++k) {
            (day.links[k].from / size == day.links[k].to / size ? intra : inter) += day.x(k)[0];
        }
    }
    double per_intra = intra / (draws * static_cast<double>(n));
    double per_inter = inter / (draws * static_cast<double>(n));
    CHECK(per_intra == doctest::Approx(intra_c).epsilon(0.02));
    CHECK(per_inter == doctest::Approx(inter_c).epsilon(0.03));
    CHECK(per_intra / (per_intra + per_inter) == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("pairs in different bubbles meet at the outside rate") {
    const int n = 60, size = 20, days = 4000;
    const double inter_c = 2.0;
    int met = 0, met_same = 0;
    for (int d = 0; d < days; ++d) {
        Rng rng = make_rng(6, {static_cast<std::uint64_t>(d)});
        auto day = gen_bubbles_day(n, size, 0.0, inter_c, 1, rng);
        for (const auto& l : day.links) {
            if (l.from == 0 && l.to == 25) ++met;
            if (l.from == 0 && l.to == 5) ++met_same;
        }
    }
    double p = inter_c / (2.0 * (n - size));
    double expect = 1.0 - (1.0 - p) * (1.0 - p);
    double sd = std::sqrt(expect * (1.0 - expect) / days);
    CHECK(std::abs(met / static_cast<double>(days) - expect) < 4.0 * sd);
    CHECK(met_same == 0);
}

TEST_CASE("bubble size above the population is rejected") {
    Rng rng = make_rng(7);
    CHECK_THROWS_AS(gen_bubbles_day(10, 20, 1.0, 1.0, 1, rng), std::domain_error);
}

TEST_CASE("pattern schedule and reproducibility") {
    auto spec = ContactPatternSpec::uniform(500, 10, 2.5, 0.01, 19.88, 42);
    spec.phases = {{1, 5, PatternKind::uniform, 2.5, 0, 0}, {6, 10, PatternKind::uniform, 0.0, 0, 0}};
    auto log = generate_log(spec);
    for (int t = 6; t <= 10; ++t) CHECK(log.day_contacts(t).size() == 0);
    CHECK(log.day_contacts(5).size() > 0);

    auto again = generate_log(spec);
    CHECK(again.directed_records() == log.directed_records());

    auto bad = spec;
    bad.phases = {{1, 5, PatternKind::uniform, 2.5, 0, 0}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
