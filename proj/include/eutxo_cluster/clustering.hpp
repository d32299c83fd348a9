#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eutxo_cluster/address_model.hpp"
#include "eutxo_cluster/errors.hpp"
#include "eutxo_cluster/ingestion.hpp"
#include "eutxo_cluster/union_find.hpp"

namespace eutxo_cluster {

struct HeuristicSet {
    bool h1 = true; // co-spend: non-script inputs of one transaction share an owner
    bool h2 = true; // staking: addresses delegating to one stake key share an owner

    bool operator==(const HeuristicSet&) const = default;
};

// StakeKeyId -> first address seen carrying that key. The representative is
// fixed at first sight and never reassigned.
class StakeIndex {
public:
    static constexpr std::uint32_t npos = 0xffffffffu;

    // Returns the representative for key, registering addr as one if the key is new.
    AddressId representative_or_register(StakeKeyId key, AddressId addr) {
        if (key >= rep_.size()) rep_.resize(key + 1, npos);
        if (rep_[key] == npos) rep_[key] = addr;
        return rep_[key];
    }

    std::optional<AddressId> representative(StakeKeyId key) const {
        if (key >= rep_.size() || rep_[key] == npos) return std::nullopt;
        return rep_[key];
    }

private:
    std::vector<std::uint32_t> rep_;
};

// Heuristic 1. Joins every Byron and Shelley-key input address of one
// transaction; script inputs never participate, since any entity may spend a
// script output once its conditions are met. Returns the number of unions that
// actually merged two sets (duplicate or already-linked inputs are no-ops).
inline std::uint32_t apply_h1(const TransactionRecord& tx, DisjointSetForest& forest) {
    constexpr std::uint32_t kUnset = 0xffffffffu;
    std::uint32_t anchor = kUnset;
    std::uint32_t merges = 0;
    for (const AddressInfo& in : tx.inputs) {
        if (in.kind == AddressKind::ShelleyScript) continue;
        if (anchor == kUnset) {
            anchor = in.id;
            continue;
        }
        const std::uint32_t before = forest.component_count();
        forest.unite(anchor, in.id);
        if (forest.component_count() != before) ++merges;
    }
    return merges;
}

// Heuristic 2. Links addr to the representative of its stake key. Applies to
// Shelley key and script addresses alike; Byron addresses carry no delegation
// part and fall through. Call once per distinct address, at first appearance.
// Returns true when a union merged two sets.
inline bool apply_h2(const AddressInfo& addr, StakeIndex& index, DisjointSetForest& forest) {
    if (!addr.stake_key) return false;
    const AddressId rep = index.representative_or_register(*addr.stake_key, addr.id);
    if (rep == addr.id) return false;
    const std::uint32_t before = forest.component_count();
    forest.unite(rep, addr.id);
    return forest.component_count() != before;
}

struct ClusterRunStats {
    std::uint64_t tx_count = 0;
    std::uint64_t h1_merges = 0;
    std::uint64_t h2_merges = 0;
};

// Single-pass clustering over a transaction stream. Both heuristics share one
// forest, so running with both enabled yields the join of the two partitions.
// The engine tracks the intern table's growth: every address interned since the
// previous record is treated as first-seen and handed to H2 before H1 runs on
// the record's inputs.
class ClusterEngine {
public:
    ClusterEngine(const InternTable& table, HeuristicSet set) : table_(&table), set_(set) {
        if (!set.h1 && !set.h2)
            throw std::invalid_argument("at least one heuristic must be enabled");
    }

    void absorb(const TransactionRecord& tx) {
        const auto n = static_cast<std::uint32_t>(table_->address_count());
        forest_.grow(n);
        if (set_.h2) {
            for (; first_seen_cursor_ < n; ++first_seen_cursor_)
                if (apply_h2(table_->info(first_seen_cursor_), stake_index_, forest_))
                    ++stats_.h2_merges;
        } else {
            first_seen_cursor_ = n;
        }
        if (set_.h1) stats_.h1_merges += apply_h1(tx, forest_);
        ++stats_.tx_count;
    }

    const DisjointSetForest& forest() const { return forest_; }
    DisjointSetForest& forest() { return forest_; }
    const ClusterRunStats& stats() const { return stats_; }
    const StakeIndex& stake_index() const { return stake_index_; }

private:
    const InternTable* table_;
    HeuristicSet set_;
    DisjointSetForest forest_;
    StakeIndex stake_index_;
    std::uint32_t first_seen_cursor_ = 0;
    ClusterRunStats stats_;
};

struct ClusterResult {
    DisjointSetForest forest;
    ClusterRunStats stats;
};

// Drives the engine over a record source: any callable yielding
// std::optional<TransactionRecord>, empty at end of stream. The returned
// forest is finalized (all paths compressed).
template <typename Source>
ClusterResult cluster_stream(Source&& source, const InternTable& table, HeuristicSet set) {
    ClusterEngine engine(table, set);
    while (auto tx = source()) engine.absorb(*tx);
    ClusterResult out{std::move(engine.forest()), engine.stats()};
    out.forest.grow(static_cast<std::uint32_t>(table.address_count()));
    out.forest.finalize();
    return out;
}

inline ClusterResult cluster_records(const std::vector<TransactionRecord>& records,
                                     const InternTable& table, HeuristicSet set) {
    std::size_t i = 0;
    return cluster_stream(
        [&]() -> std::optional<TransactionRecord> {
            if (i == records.size()) return std::nullopt;
            return records[i++];
        },
        table, set);
}

// Cluster assignment CSV: one row per distinct address, ordinal order,
// cluster_id is the fully compressed root ordinal. Buffered; row counts reach
// tens of millions on real chains.
inline void write_assignments_csv(std::ostream& out, const InternTable& table,
                                  DisjointSetForest& forest) {
    forest.grow(static_cast<std::uint32_t>(table.address_count()));
    forest.finalize();
    std::string buffer;
    constexpr std::size_t kFlush = 1 << 20;
    buffer.reserve(kFlush + 256);
    buffer += "address,cluster_id\n";
    for (AddressId id = 0; id < table.address_count(); ++id) {
        buffer += table.address_string(id);
        buffer += ',';
        buffer += std::to_string(forest.root_of(id));
        buffer += '\n';
        if (buffer.size() > kFlush) {
            out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
            buffer.clear();
        }
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

// Assignments loaded back from CSV; addresses re-interned to dense ordinals in
// row order, cluster labels kept verbatim.
struct AssignmentTable {
    StringInterner addresses;
    std::vector<std::uint64_t> cluster_of; // by row-order ordinal

    std::optional<std::pair<std::uint32_t, std::uint64_t>> lookup(std::string_view addr) const {
        const std::uint32_t id = addresses.find(addr);
        if (id == StringInterner::npos) return std::nullopt;
        return std::make_pair(id, cluster_of[id]);
    }
};

inline AssignmentTable load_assignments_csv(std::istream& in) {
    AssignmentTable table;
    std::string line;
    if (!std::getline(in, line) || line != "address,cluster_id")
        throw SchemaViolation("assignments CSV must start with header 'address,cluster_id'");
    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0)
            throw SchemaViolation("assignments CSV line " + std::to_string(line_no) +
                                  ": expected 'address,cluster_id'");
        std::uint64_t cluster = 0;
        try {
            std::size_t used = 0;
            cluster = std::stoull(line.substr(comma + 1), &used);
            if (used != line.size() - comma - 1) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw SchemaViolation("assignments CSV line " + std::to_string(line_no) +
                                  ": bad cluster id");
        }
        const auto [id, inserted] = table.addresses.intern(line.substr(0, comma));
        if (!inserted)
            throw SchemaViolation("assignments CSV line " + std::to_string(line_no) +
                                  ": duplicate address");
        (void)id;
        table.cluster_of.push_back(cluster);
    }
    if (in.bad()) throw IoFailure("read failure in assignments CSV");
    return table;
}

} // namespace eutxo_cluster
