#pragma once

#include <span>
#include <vector>

namespace crisp {

/// Contact between u and v on day t with per-channel counts x.
struct ContactRecord {
    int u = 0;
    int v = 0;
    int t = 1;
    std::vector<int> x;

    friend bool operator==(const ContactRecord&, const ContactRecord&) = default;
};

struct TestRecord {
    int u = 0;
    int t = 1;
    int outcome = 0;  // 0 = negative

    friend bool operator==(const TestRecord&, const TestRecord&) = default;
};

/// One day of symmetric contacts in directed form: every (from, to) link is
/// present together with its mirror, sorted by (from, to).
struct DayContacts {
    struct Link {
        int from;
        int to;
        friend bool operator==(const Link&, const Link&) = default;
    };

    int day = 1;
    int channels = 1;
    std::vector<Link> links;
    std::vector<int> counts;  // counts[k * channels + j] belongs to links[k]

    std::size_t size() const { return links.size(); }
    std::span<const int> x(std::size_t k) const {
        return {counts.data() + k * static_cast<std::size_t>(channels),
                static_cast<std::size_t>(channels)};
    }

    /// Builds the directed day from undirected pairs (a, b, x). Pairs repeated
    /// in either orientation have their counts summed.
    static DayContacts from_pairs(int day, int channels, std::vector<ContactRecord> pairs);

    /// Drops every link touching an individual flagged in `removed`.
    void remove_individuals(const std::vector<char>& removed);
};

/// Time-indexed symmetric contact multiset, indexed per individual.
class ContactLog {
public:
    struct Entry {
        int other;
        int day;
    };

    ContactLog() = default;
    ContactLog(int population, int horizon, int channels);

    /// Loads records, adding the mirror of every record whose reverse is
    /// missing. Throws DataError on self contacts, out-of-range ids or days,
    /// channel mismatches, or duplicate (u, v, t) triples with conflicting or
    /// repeated counts.
    static ContactLog from_records(int population, int horizon, int channels,
                                   std::span<const ContactRecord> records);

    /// Appends one day. Days must be appended in non-decreasing order and a
    /// day may be appended once.
    void append_day(const DayContacts& day);

    int population() const { return population_; }
    int horizon() const { return horizon_; }
    int channels() const { return channels_; }

    /// Contacts of u sorted by (day, other).
    std::span<const Entry> neighbors(int u) const { return entries_[u]; }
    std::span<const int> counts(int u, std::size_t k) const {
        return {counts_[u].data() + k * static_cast<std::size_t>(channels_),
                static_cast<std::size_t>(channels_)};
    }

    /// All links of one day in directed form.
    DayContacts day_contacts(int day) const;

    /// Number of directed records (each undirected contact counts twice).
    std::size_t directed_size() const { return directed_size_; }

    /// Each undirected contact once, with u < v, sorted by (t, u, v).
    std::vector<ContactRecord> undirected_records() const;
    /// Every directed record sorted by (t, u, v).
    std::vector<ContactRecord> directed_records() const;

private:
    int population_ = 0;
    int horizon_ = 0;
    int channels_ = 1;
    int last_day_ = 0;
    std::size_t directed_size_ = 0;
    std::vector<std::vector<Entry>> entries_;
    std::vector<std::vector<int>> counts_;
};

/// Test records with a per-individual index.
class TestLog {
public:
    TestLog() = default;
    explicit TestLog(int population) : by_individual_(static_cast<std::size_t>(population)) {}

    /// Throws DataError on an outcome outside {0,1}, a bad id, or a day outside 1..horizon.
    static TestLog from_records(int population, int horizon, std::span<const TestRecord> records);

    void add(const TestRecord& r);

    int population() const { return static_cast<int>(by_individual_.size()); }
    std::span<const TestRecord> tests_of(int u) const { return by_individual_[u]; }
    std::size_t size() const { return size_; }
    std::vector<TestRecord> records() const;

private:
    std::vector<std::vector<TestRecord>> by_individual_;
    std::size_t size_ = 0;
};

}  // namespace crisp
