#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eutxo_cluster/errors.hpp"
#include "eutxo_cluster/ingestion.hpp"
#include "eutxo_cluster/union_find.hpp"

namespace eutxo_cluster {

// Cluster size bands. "large" and "super" are exclusive lower bounds: a large
// cluster has more than `large` members, a supercluster more than `super`.
struct SummaryThresholds {
    std::uint64_t large = 1000;
    std::uint64_t super = 200000;

    void validate() const {
        if (large == 0 || super < large)
            throw std::invalid_argument("thresholds must satisfy 0 < large <= super");
    }
};

struct ClusterSummary {
    std::uint64_t total_clusters = 0;
    std::uint64_t single_member = 0;
    std::uint64_t medium_clusters = 0;           // size in [2, large]
    std::optional<double> medium_avg_size;       // absent when no medium cluster exists
    std::uint64_t large_clusters = 0;            // size > large
    std::uint64_t superclusters = 0;             // size > super; always a subset of large
};

// Multiset of component sizes, keyed by size, ascending.
using SizeHistogram = std::map<std::uint64_t, std::uint64_t>;

namespace detail {

struct SummaryAccumulator {
    const SummaryThresholds t;
    std::uint64_t total = 0, singles = 0, medium = 0, large = 0, super = 0;
    std::uint64_t medium_member_sum = 0;

    void add(std::uint64_t size, std::uint64_t count = 1) {
        total += count;
        if (size == 1) {
            singles += count;
        } else if (size <= t.large) {
            medium += count;
            medium_member_sum += size * count;
        } else {
            large += count;
            if (size > t.super) super += count;
        }
    }

    ClusterSummary finish() const {
        ClusterSummary s;
        s.total_clusters = total;
        s.single_member = singles;
        s.medium_clusters = medium;
        if (medium > 0)
            s.medium_avg_size = static_cast<double>(medium_member_sum) / static_cast<double>(medium);
        s.large_clusters = large;
        s.superclusters = super;
        return s;
    }
};

} // namespace detail

// Direct sweep over the forest's roots. Works on any forest; O(1) per element
// once finalized.
inline ClusterSummary summarize(const DisjointSetForest& forest, SummaryThresholds t = {}) {
    t.validate();
    detail::SummaryAccumulator acc{t};
    for (std::uint32_t i = 0; i < forest.size(); ++i)
        if (forest.is_root(i)) acc.add(forest.size_at_root(i));
    return acc.finish();
}

// Same statistics recomputed from a size histogram; the independent aggregation
// route for CSV-loaded data.
inline ClusterSummary summarize_sizes(const SizeHistogram& sizes, SummaryThresholds t = {}) {
    t.validate();
    detail::SummaryAccumulator acc{t};
    for (const auto& [size, count] : sizes) acc.add(size, count);
    return acc.finish();
}

// Exact multiset of component sizes. threads > 1 partitions the ordinal range
// and merges partial histograms; the result is identical either way.
inline SizeHistogram size_histogram(const DisjointSetForest& forest, unsigned threads = 1) {
    const std::uint32_t n = forest.size();
    if (threads <= 1 || n < 1u << 16) {
        SizeHistogram h;
        for (std::uint32_t i = 0; i < n; ++i)
            if (forest.is_root(i)) ++h[forest.size_at_root(i)];
        return h;
    }
    const unsigned workers = std::min<unsigned>(threads, std::max(1u, n / (1u << 14)));
    std::vector<SizeHistogram> partial(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint32_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            const std::uint32_t begin = w * chunk;
            const std::uint32_t end = std::min<std::uint64_t>(n, std::uint64_t(begin) + chunk);
            for (std::uint32_t i = begin; i < end; ++i)
                if (forest.is_root(i)) ++partial[w][forest.size_at_root(i)];
        });
    }
    for (auto& th : pool) th.join();
    SizeHistogram merged;
    for (const auto& p : partial)
        for (const auto& [size, count] : p) merged[size] += count;
    return merged;
}

struct PowerLawFit {
    double alpha = 0;        // fitted exponent, > 1
    double sigma = 0;        // standard error, (alpha - 1) / sqrt(n_tail)
    std::uint64_t xmin = 0;  // selected tail start
    double ks_distance = 0;  // KS statistic of the selected tail
    std::uint64_t n_tail = 0;
};

struct FitOptions {
    std::uint64_t min_tail = 10; // candidate xmins with fewer tail observations are skipped
    double xmin_quantile = 0.95; // candidates scanned up to this sample quantile
};

namespace detail {

// Hurwitz zeta via Euler-Maclaurin: 24 direct terms, then the integral plus
// Bernoulli corrections through B6. Relative error below 1e-12 for s > 1, q >= 1.
inline double hurwitz_zeta(double s, double q) {
    constexpr int kDirect = 24;
    double sum = 0;
    for (int k = 0; k < kDirect; ++k) sum += std::pow(q + k, -s);
    const double a = q + kDirect;
    const double inv = 1.0 / a;
    const double as = std::pow(a, -s);
    sum += as * a / (s - 1.0);
    sum += 0.5 * as;
    double term = as * s * inv;
    sum += term / 12.0;
    term *= (s + 1.0) * (s + 2.0) * inv * inv;
    sum -= term / 720.0;
    term *= (s + 3.0) * (s + 4.0) * inv * inv;
    sum += term / 30240.0;
    return sum;
}

// d/ds of hurwitz_zeta, same Euler-Maclaurin structure differentiated term by term.
inline double hurwitz_zeta_ds(double s, double q) {
    constexpr int kDirect = 24;
    double sum = 0;
    for (int k = 0; k < kDirect; ++k) {
        const double base = q + k;
        sum -= std::log(base) * std::pow(base, -s);
    }
    const double a = q + kDirect;
    const double ln_a = std::log(a);
    const double inv = 1.0 / a;
    const double as = std::pow(a, -s);
    sum -= as * a * (ln_a / (s - 1.0) + 1.0 / ((s - 1.0) * (s - 1.0)));
    sum -= 0.5 * ln_a * as;
    sum += as * inv * (1.0 - s * ln_a) / 12.0;
    const double p3 = s * (s + 1.0) * (s + 2.0);
    sum -= as * inv * inv * inv * ((3.0 * s * s + 6.0 * s + 2.0) - p3 * ln_a) / 720.0;
    const double p5 = p3 * (s + 3.0) * (s + 4.0);
    const double p5_ds = p5 * (1.0 / s + 1.0 / (s + 1.0) + 1.0 / (s + 2.0) + 1.0 / (s + 3.0) +
                               1.0 / (s + 4.0));
    sum += as * inv * inv * inv * inv * inv * (p5_ds - p5 * ln_a) / 30240.0;
    return sum;
}

// P(X <= x) for the discrete power law p(v) = v^-alpha / zeta(alpha, xmin), v >= xmin.
inline double discrete_power_law_cdf(double alpha, std::uint64_t xmin, std::uint64_t x) {
    return 1.0 - hurwitz_zeta(alpha, static_cast<double>(x) + 1.0) /
                     hurwitz_zeta(alpha, static_cast<double>(xmin));
}

// Exact discrete MLE for the tail exponent: the unique root of the score
//     E_alpha[ln X] = -zeta'(alpha, xmin) / zeta(alpha, xmin) = mean_ln_x.
// The model mean of ln X is strictly decreasing in alpha, so bisection
// converges; the analytic derivative keeps the root sharp to ~1e-12.
inline double discrete_power_law_mle(double mean_ln_x, std::uint64_t xmin) {
    const double q = static_cast<double>(xmin);
    const auto score = [&](double a) {
        return -hurwitz_zeta_ds(a, q) / hurwitz_zeta(a, q) - mean_ln_x;
    };
    double lo = 1.000001, hi = 64.0;
    if (score(hi) >= 0.0) return hi; // tail heavier than the window; degenerate anyway
    for (int i = 0; i < 90; ++i) {
        const double mid = 0.5 * (lo + hi);
        (score(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// Discrete power-law fit. For each candidate xmin among the observed distinct
// sizes (up to the configured quantile), the exponent is the exact discrete
// maximum-likelihood estimate for the zeta-normalized power law on the tail,
// and the candidate minimizing the KS distance between the empirical tail CDF
// and the fitted CDF wins; ties go to the smaller xmin.
//
// The widely used closed-form shortcut alpha = 1 + n / sum ln(x_i/(xmin-0.5))
// is deliberately not used for the per-candidate exponent: its bias at small
// xmin (about -0.09 at xmin = 2 for alpha = 2.5) leaks into the KS distance
// and drags the selected xmin several sizes into the tail. The exact MLE keeps
// the KS at the true tail start down at sampling noise.
inline PowerLawFit fit_power_law(const SizeHistogram& sizes, FitOptions opt = {}) {
    std::vector<std::uint64_t> values;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    values.reserve(sizes.size());
    counts.reserve(sizes.size());
    for (const auto& [v, c] : sizes) {
        if (v == 0) throw std::invalid_argument("sizes must be positive");
        if (c == 0) continue;
        values.push_back(v);
        counts.push_back(c);
        total += c;
    }
    if (total == 0) throw DegenerateInput("no observations");
    if (values.size() < 2) throw DegenerateInput("all sizes equal");

    const std::size_t k = values.size();
    std::vector<std::uint64_t> suffix_count(k + 1, 0);
    std::vector<double> suffix_lnsum(k + 1, 0.0);
    for (std::size_t i = k; i-- > 0;) {
        suffix_count[i] = suffix_count[i + 1] + counts[i];
        suffix_lnsum[i] =
            suffix_lnsum[i + 1] + static_cast<double>(counts[i]) * std::log(static_cast<double>(values[i]));
    }

    // last candidate index: smallest value reaching the quantile by cumulative count
    std::size_t last_candidate = 0;
    std::uint64_t cum = 0;
    for (std::size_t i = 0; i < k; ++i) {
        cum += counts[i];
        last_candidate = i;
        if (static_cast<double>(cum) >= opt.xmin_quantile * static_cast<double>(total)) break;
    }

    PowerLawFit best;
    double best_ks = std::numeric_limits<double>::infinity();
    for (std::size_t ci = 0; ci <= last_candidate; ++ci) {
        const std::uint64_t xmin = values[ci];
        const std::uint64_t n_tail = suffix_count[ci];
        if (n_tail < opt.min_tail) continue;
        if (k - ci < 2) continue; // need at least 2 distinct tail values

        const double n = static_cast<double>(n_tail);
        const double alpha = detail::discrete_power_law_mle(suffix_lnsum[ci] / n, xmin);

        double ks = 0;
        std::uint64_t tail_cum = 0;
        for (std::size_t j = ci; j < k; ++j) {
            tail_cum += counts[j];
            const double f_emp = static_cast<double>(tail_cum) / n;
            const double f_fit = detail::discrete_power_law_cdf(alpha, xmin, values[j]);
            ks = std::max(ks, std::abs(f_emp - f_fit));
        }
        if (ks < best_ks) {
            best_ks = ks;
            best.alpha = alpha;
            best.sigma = (alpha - 1.0) / std::sqrt(n);
            best.xmin = xmin;
            best.ks_distance = ks;
            best.n_tail = n_tail;
        }
    }
    if (!std::isfinite(best_ks))
        throw DegenerateInput("no candidate xmin has " + std::to_string(opt.min_tail) +
                              " tail observations");
    return best;
}

inline PowerLawFit fit_power_law(const std::vector<std::uint64_t>& samples, FitOptions opt = {}) {
    SizeHistogram h;
    for (std::uint64_t v : samples) ++h[v];
    return fit_power_law(h, opt);
}

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct DayStat {
    std::int64_t day = 0;
    std::uint64_t new_addresses = 0;
    std::uint64_t new_entities = 0;
    std::uint64_t active_addresses = 0;
    std::uint64_t active_entities = 0;

    bool operator==(const DayStat&) const = default;
};

using DailySeries = std::vector<DayStat>;

// Second-pass accumulator over a finalized clustering. An address is "new" on
// the day it first appears on either side of a transaction; an entity is new
// on the day its first member appears. Only input-side appearances make an
// address (and its entity) active; each is counted once per day.
class DailySeriesBuilder {
public:
    explicit DailySeriesBuilder(std::int64_t origin_offset_seconds = 0)
        : origin_(origin_offset_seconds) {}

    std::int64_t day_of(std::uint64_t slot) const {
        const auto t = static_cast<std::int64_t>(slot) + origin_;
        std::int64_t d = t / kSecondsPerDay;
        if (t % kSecondsPerDay < 0) --d; // floor for pre-origin slots
        return d;
    }

    void observe(std::uint64_t slot, std::uint32_t address, std::uint32_t cluster, bool is_input) {
        const std::int64_t day = day_of(slot);
        DayStat& stat = days_[day];
        if (address >= addr_seen_.size()) addr_seen_.resize(address + 1, false);
        if (!addr_seen_[address]) {
            addr_seen_[address] = true;
            ++stat.new_addresses;
            if (cluster >= cluster_seen_.size()) cluster_seen_.resize(cluster + 1, false);
            if (!cluster_seen_[cluster]) {
                cluster_seen_[cluster] = true;
                ++stat.new_entities;
            }
        }
        if (is_input) {
            active_addr_.emplace_back(day, address);
            active_cluster_.emplace_back(day, cluster);
        }
    }

    DailySeries finish() {
        auto count_distinct = [](auto& events, auto&& bump) {
            std::sort(events.begin(), events.end());
            events.erase(std::unique(events.begin(), events.end()), events.end());
            for (const auto& [day, id] : events) bump(day);
        };
        count_distinct(active_addr_, [this](std::int64_t d) { ++days_[d].active_addresses; });
        count_distinct(active_cluster_, [this](std::int64_t d) { ++days_[d].active_entities; });
        DailySeries out;
        out.reserve(days_.size());
        for (auto& [day, stat] : days_) {
            stat.day = day;
            out.push_back(stat);
        }
        return out;
    }

private:
    std::int64_t origin_;
    std::map<std::int64_t, DayStat> days_;
    std::vector<bool> addr_seen_;
    std::vector<bool> cluster_seen_;
    std::vector<std::pair<std::int64_t, std::uint32_t>> active_addr_;
    std::vector<std::pair<std::int64_t, std::uint32_t>> active_cluster_;
};

// Replays a record source (same order as the clustering pass) against a
// finalized forest.
template <typename Source>
DailySeries daily_series(Source&& source, const DisjointSetForest& forest,
                         std::int64_t origin_offset_seconds = 0) {
    DailySeriesBuilder builder(origin_offset_seconds);
    while (auto tx = source()) {
        for (const AddressInfo& in : tx->inputs)
            builder.observe(tx->slot, in.id, forest.root_of(in.id), true);
        for (const TxOutput& out : tx->outputs)
            builder.observe(tx->slot, out.addr.id, forest.root_of(out.addr.id), false);
    }
    return builder.finish();
}

inline DailySeries daily_series(const std::vector<TransactionRecord>& records,
                                const DisjointSetForest& forest,
                                std::int64_t origin_offset_seconds = 0) {
    std::size_t i = 0;
    return daily_series(
        [&]() -> std::optional<TransactionRecord> {
            if (i == records.size()) return std::nullopt;
            return records[i++];
        },
        forest, origin_offset_seconds);
}

// --- plot-ready serialization ---

inline void write_histogram_csv(std::ostream& out, const SizeHistogram& h) {
    out << "size,count\n";
    for (const auto& [size, count] : h) out << size << ',' << count << '\n';
}

inline SizeHistogram load_histogram_csv(std::istream& in) {
    SizeHistogram h;
    std::string line;
    if (!std::getline(in, line) || line != "size,count")
        throw SchemaViolation("histogram CSV must start with header 'size,count'");
    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("no comma");
            h[std::stoull(line.substr(0, comma))] += std::stoull(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw SchemaViolation("histogram CSV line " + std::to_string(line_no) +
                                  ": expected 'size,count'");
        }
    }
    if (in.bad()) throw IoFailure("read failure in histogram CSV");
    return h;
}

inline void write_series_csv(std::ostream& out, const DailySeries& series) {
    out << "day,new_addresses,new_entities,active_addresses,active_entities\n";
    for (const DayStat& d : series)
        out << d.day << ',' << d.new_addresses << ',' << d.new_entities << ','
            << d.active_addresses << ',' << d.active_entities << '\n';
}

inline nlohmann::json summary_to_json(const ClusterSummary& s) {
    nlohmann::json j;
    j["total_clusters"] = s.total_clusters;
    j["single_member"] = s.single_member;
    j["medium_clusters"] = s.medium_clusters;
    j["medium_avg_size"] = s.medium_avg_size ? nlohmann::json(*s.medium_avg_size) : nlohmann::json();
    j["large_clusters"] = s.large_clusters;
    j["superclusters"] = s.superclusters;
    return j;
}

inline nlohmann::json fit_to_json(const PowerLawFit& f) {
    return nlohmann::json{{"alpha", f.alpha},
                          {"sigma", f.sigma},
                          {"xmin", f.xmin},
                          {"ks_distance", f.ks_distance},
                          {"n_tail", f.n_tail}};
}

} // namespace eutxo_cluster
