#pragma once

#include <cstdint>
#include <vector>

#include "crisp/data.hpp"
#include "crisp/model.hpp"

namespace crisp {

/// Mean contacts per individual and day giving reproduction factor r0 on a
/// channel with transmission probability p_channel: r0 / (mean_infectious_days * p_channel).
double contact_rate(double r0, double p_channel, double mean_infectious_days);

/// Each individual draws Binomial(N-1, C / (2(N-1))) distinct partners uniformly;
/// every pairing adds one count on `channel`. Mirrored, so the mean number of
/// partners per individual is C.
DayContacts gen_uniform_day(int population, double mean_contacts, int day, Rng& rng,
                            int channel = 0, int channels = 1);

/// Individuals are grouped in consecutive bubbles of `bubble_size` (the last one
/// may be smaller). Partners are drawn with the uniform scheme separately from
/// the own bubble (rate intra_c) and from everyone else (rate inter_c).
DayContacts gen_bubbles_day(int population, int bubble_size, double intra_c, double inter_c, int day,
                            Rng& rng, int channel = 0, int channels = 1);

enum class PatternKind { uniform, bubbles };

/// Contact pattern in effect for days first_day..last_day (inclusive).
struct ContactPhase {
    int first_day = 1;
    int last_day = 1;
    PatternKind kind = PatternKind::uniform;
    double r0 = 2.5;        // uniform
    double intra_r0 = 2.0;  // bubbles
    double inter_r0 = 0.5;  // bubbles
};

struct ContactPatternSpec {
    int population = 1000;
    int horizon = 150;
    int bubble_size = 20;
    int channel = 0;
    int channels = 1;
    double p_channel = 0.025;
    double mean_infectious_days = 19.88;
    std::uint64_t seed = 0;
    std::vector<ContactPhase> phases;

    /// Throws std::invalid_argument unless the phases partition 1..horizon.
    void validate() const;
    const ContactPhase& phase_for(int day) const;

    /// Single-phase pattern over the whole horizon.
    static ContactPatternSpec uniform(int population, int horizon, double r0, double p_channel,
                                      double mean_infectious_days, std::uint64_t seed);
};

/// Contacts for one day; a pure function of (spec, day).
DayContacts generate_day(const ContactPatternSpec& spec, int day);

/// All days 1..horizon as a log.
ContactLog generate_log(const ContactPatternSpec& spec);

}  // namespace crisp
