#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eutxo_cluster/address_model.hpp"
#include "eutxo_cluster/clustering.hpp"
#include "eutxo_cluster/errors.hpp"

namespace eutxo_cluster {

struct WalletSizeDist {
    enum class Kind { Geometric, Fixed };
    Kind kind = Kind::Geometric;
    double mean = 9.67;       // geometric, support {1, 2, ...}
    std::uint32_t value = 1;  // fixed
};

struct SimParams {
    std::uint64_t n_entities = 1000;
    WalletSizeDist addresses_per_entity{};
    double stake_key_probability = 0.8; // chance an entity's Shelley addresses share one stake key
    double byron_fraction = 0.1;
    std::uint64_t n_transactions = 10000;
    double multi_party_tx_rate = 0.0; // inputs drawn from two entities: an H1 false positive
    double franken_rate = 0.0;        // delegation part points at another entity: an H2 false positive
    double script_fraction = 0.05;
    std::uint64_t rng_seed = 1;
    // stream shape
    std::uint32_t max_inputs = 4;
    std::uint32_t max_payment_outputs = 2; // plus one change output per transaction
    std::uint64_t slot_spacing = 20;       // seconds between consecutive transactions

    void validate() const {
        auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
        if (n_entities == 0 || n_transactions == 0) throw InvalidParams("counts must be positive");
        if (!rate(stake_key_probability) || !rate(byron_fraction) || !rate(multi_party_tx_rate) ||
            !rate(franken_rate) || !rate(script_fraction))
            throw InvalidParams("rates must lie in [0, 1]");
        if (byron_fraction + script_fraction > 1.0)
            throw InvalidParams("byron_fraction + script_fraction must not exceed 1");
        if (addresses_per_entity.kind == WalletSizeDist::Kind::Geometric &&
            !(addresses_per_entity.mean >= 1.0))
            throw InvalidParams("wallet size mean must be >= 1");
        if (addresses_per_entity.kind == WalletSizeDist::Kind::Fixed &&
            addresses_per_entity.value == 0)
            throw InvalidParams("fixed wallet size must be positive");
        if (max_inputs == 0 || max_payment_outputs == 0)
            throw InvalidParams("max_inputs and max_payment_outputs must be positive");
    }
};

// Pre-interning transaction form: address strings plus their classification,
// exactly what one JSONL line carries.
struct RawInput {
    std::string addr;
    AddressKind kind = AddressKind::Byron;
    std::optional<std::string> stake;
};

struct RawOutput {
    std::string addr;
    AddressKind kind = AddressKind::Byron;
    std::optional<std::string> stake;
    std::uint64_t value = 0;
};

namespace detail {

inline void append_json_string(std::string& out, std::string_view s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

inline void append_entry(std::string& out, std::string_view addr, AddressKind kind,
                         const std::optional<std::string>& stake) {
    out += "{\"addr\":";
    append_json_string(out, addr);
    out += ",\"kind\":\"";
    out += to_string(kind);
    out += '"';
    if (stake) {
        out += ",\"stake\":";
        append_json_string(out, *stake);
    }
}

} // namespace detail

struct RawTransaction {
    std::string tx_id;
    std::uint64_t slot = 0;
    std::vector<RawInput> inputs;
    std::vector<RawOutput> outputs;

    // One JSONL line in the ingestion schema. Hand-built so simulate runs are
    // byte-stable and fast at millions of lines.
    std::string to_jsonl() const {
        std::string out;
        out.reserve(48 + 56 * (inputs.size() + outputs.size()));
        out += "{\"tx_id\":";
        detail::append_json_string(out, tx_id);
        out += ",\"slot\":";
        out += std::to_string(slot);
        out += ",\"inputs\":[";
        bool first = true;
        for (const RawInput& in : inputs) {
            if (!first) out += ',';
            first = false;
            detail::append_entry(out, in.addr, in.kind, in.stake);
            out += '}';
        }
        out += "],\"outputs\":[";
        first = true;
        for (const RawOutput& o : outputs) {
            if (!first) out += ',';
            first = false;
            detail::append_entry(out, o.addr, o.kind, o.stake);
            out += ",\"value\":";
            out += std::to_string(o.value);
            out += '}';
        }
        out += "]}";
        return out;
    }
};

// Address string -> owning entity, restricted to addresses that appear in the
// generated stream, in address creation order.
struct GroundTruth {
    std::vector<std::pair<std::string, std::uint32_t>> entries;
};

namespace detail {

// All randomness flows through mt19937_64 with hand-rolled draws, so a seed
// pins the byte stream across platforms and standard libraries.
class SimRng {
public:
    explicit SimRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Shifted geometric on {1, 2, ...} with the given mean.
    std::uint64_t geometric(double mean) {
        const double p = 1.0 / mean;
        if (p >= 1.0) return 1;
        const double u = uniform01();
        return 1 + static_cast<std::uint64_t>(std::log1p(-u) / std::log1p(-p));
    }

private:
    std::mt19937_64 gen_;
};

} // namespace detail

// Deterministic synthetic chain. Every entity owns a wallet of addresses; each
// ordinary transaction spends 1..max_inputs addresses of one entity, pays
// random entities, and sends change to a fresh address of the sender. With
// probability multi_party_tx_rate the inputs instead mix key-payment addresses
// of exactly two entities; with probability franken_rate a Shelley address
// delegates to another entity's stake key. The sink receives each transaction
// in slot order; the returned truth covers exactly the addresses that appeared.
template <typename TxSink>
GroundTruth generate_chain(const SimParams& params, TxSink&& sink) {
    params.validate();
    detail::SimRng rng(params.rng_seed);

    struct SimAddress {
        std::string name;
        AddressKind kind;
        std::uint32_t stake_owner; // kNoOwner when the address has no delegation part
        std::uint32_t entity;
    };
    constexpr std::uint32_t kNoOwner = 0xffffffffu;

    const auto n_entities = static_cast<std::uint32_t>(params.n_entities);
    std::vector<std::uint64_t> wallet_size(n_entities);
    std::vector<bool> has_stake(n_entities);
    std::vector<std::uint32_t> stake_bearers;
    std::vector<std::uint32_t> bearer_pos(n_entities, kNoOwner);
    for (std::uint32_t e = 0; e < n_entities; ++e) {
        wallet_size[e] = params.addresses_per_entity.kind == WalletSizeDist::Kind::Geometric
                             ? rng.geometric(params.addresses_per_entity.mean)
                             : params.addresses_per_entity.value;
        has_stake[e] = rng.bernoulli(params.stake_key_probability);
        if (has_stake[e]) {
            bearer_pos[e] = static_cast<std::uint32_t>(stake_bearers.size());
            stake_bearers.push_back(e);
        }
    }

    std::vector<SimAddress> addrs;
    std::vector<std::vector<std::uint32_t>> wallet(n_entities);
    std::vector<std::vector<std::uint32_t>> key_wallet(n_entities); // H1-linkable: byron + shelley-key
    std::vector<std::uint32_t> key_entities;
    std::vector<bool> in_key_entities(n_entities, false);

    auto create_address = [&](std::uint32_t e) -> std::uint32_t {
        const double roll = rng.uniform01();
        AddressKind kind;
        if (roll < params.byron_fraction)
            kind = AddressKind::Byron;
        else if (roll < params.byron_fraction + params.script_fraction)
            kind = AddressKind::ShelleyScript;
        else
            kind = AddressKind::ShelleyKey;

        std::uint32_t stake_owner = kNoOwner;
        if (kind != AddressKind::Byron && has_stake[e]) {
            stake_owner = e;
            if (rng.bernoulli(params.franken_rate) && stake_bearers.size() > 1) {
                std::uint64_t pick = rng.below(stake_bearers.size() - 1);
                if (pick >= bearer_pos[e]) ++pick;
                stake_owner = stake_bearers[pick];
            }
        }

        const auto serial = static_cast<std::uint32_t>(addrs.size());
        addrs.push_back(SimAddress{"a" + std::to_string(serial), kind, stake_owner, e});
        wallet[e].push_back(serial);
        if (kind != AddressKind::ShelleyScript) {
            key_wallet[e].push_back(serial);
            if (!in_key_entities[e]) {
                in_key_entities[e] = true;
                key_entities.push_back(e);
            }
        }
        return serial;
    };

    for (std::uint32_t e = 0; e < n_entities; ++e)
        for (std::uint64_t j = 0; j < wallet_size[e]; ++j) create_address(e);

    std::vector<bool> used(addrs.size(), false);
    auto mark_used = [&](std::uint32_t serial) {
        if (serial >= used.size()) used.resize(serial + 1, false);
        used[serial] = true;
    };

    // k distinct picks from pool; the whole pool when k covers it
    std::vector<std::uint32_t> picks;
    auto sample_distinct = [&](const std::vector<std::uint32_t>& pool, std::uint64_t k) {
        picks.clear();
        if (k >= pool.size()) {
            picks = pool;
            return;
        }
        while (picks.size() < k) {
            const std::uint32_t candidate = pool[rng.below(pool.size())];
            bool fresh = true;
            for (std::uint32_t p : picks) fresh &= p != candidate;
            if (fresh) picks.push_back(candidate);
        }
    };

    RawTransaction tx;
    auto to_input = [&](std::uint32_t serial) {
        const SimAddress& a = addrs[serial];
        RawInput in{a.name, a.kind, std::nullopt};
        if (a.stake_owner != kNoOwner) in.stake = "s" + std::to_string(a.stake_owner);
        return in;
    };
    auto to_output = [&](std::uint32_t serial, std::uint64_t value) {
        const SimAddress& a = addrs[serial];
        RawOutput out{a.name, a.kind, std::nullopt, value};
        if (a.stake_owner != kNoOwner) out.stake = "s" + std::to_string(a.stake_owner);
        return out;
    };

    for (std::uint64_t i = 0; i < params.n_transactions; ++i) {
        tx.tx_id = "tx" + std::to_string(i);
        tx.slot = i * params.slot_spacing;
        tx.inputs.clear();
        tx.outputs.clear();

        std::uint32_t sender;
        const bool multi_party =
            rng.bernoulli(params.multi_party_tx_rate) && key_entities.size() >= 2;
        if (multi_party) {
            const std::uint64_t i1 = rng.below(key_entities.size());
            std::uint64_t i2 = rng.below(key_entities.size() - 1);
            if (i2 >= i1) ++i2;
            const std::uint32_t e1 = key_entities[i1];
            const std::uint32_t e2 = key_entities[i2];
            sender = e1;
            for (std::uint32_t side_entity : {e1, e2}) {
                const auto& pool = key_wallet[side_entity];
                sample_distinct(pool, 1 + rng.below(std::min<std::uint64_t>(2, pool.size())));
                for (std::uint32_t s : picks) {
                    mark_used(s);
                    tx.inputs.push_back(to_input(s));
                }
            }
        } else {
            sender = static_cast<std::uint32_t>(rng.below(n_entities));
            const auto& pool = wallet[sender];
            sample_distinct(pool, 1 + rng.below(std::min<std::uint64_t>(params.max_inputs, pool.size())));
            for (std::uint32_t s : picks) {
                mark_used(s);
                tx.inputs.push_back(to_input(s));
            }
        }

        const std::uint64_t n_pay = 1 + rng.below(params.max_payment_outputs);
        for (std::uint64_t p = 0; p < n_pay; ++p) {
            const auto receiver = static_cast<std::uint32_t>(rng.below(n_entities));
            const std::uint32_t target = wallet[receiver][rng.below(wallet[receiver].size())];
            mark_used(target);
            tx.outputs.push_back(to_output(target, 1 + rng.below(1000000)));
        }
        const std::uint32_t change = create_address(sender);
        mark_used(change);
        tx.outputs.push_back(to_output(change, 1 + rng.below(1000000)));

        sink(tx);
    }

    used.resize(addrs.size(), false);
    GroundTruth truth;
    for (std::uint32_t serial = 0; serial < addrs.size(); ++serial)
        if (used[serial]) truth.entries.emplace_back(addrs[serial].name, addrs[serial].entity);
    return truth;
}

struct SimChain {
    std::vector<RawTransaction> transactions;
    GroundTruth truth;
};

inline SimChain generate_chain(const SimParams& params) {
    SimChain chain;
    chain.truth = generate_chain(params, [&](const RawTransaction& tx) {
        chain.transactions.push_back(tx);
    });
    return chain;
}

inline void write_truth_csv(std::ostream& out, const GroundTruth& truth) {
    out << "address,entity_id\n";
    for (const auto& [addr, entity] : truth.entries) out << addr << ',' << entity << '\n';
}

inline GroundTruth load_truth_csv(std::istream& in) {
    GroundTruth truth;
    std::string line;
    if (!std::getline(in, line) || line != "address,entity_id")
        throw SchemaViolation("truth CSV must start with header 'address,entity_id'");
    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0)
            throw SchemaViolation("truth CSV line " + std::to_string(line_no) +
                                  ": expected 'address,entity_id'");
        std::uint32_t entity = 0;
        try {
            std::size_t used = 0;
            entity = static_cast<std::uint32_t>(std::stoul(line.substr(comma + 1), &used));
            if (used != line.size() - comma - 1) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw SchemaViolation("truth CSV line " + std::to_string(line_no) + ": bad entity id");
        }
        truth.entries.emplace_back(line.substr(0, comma), entity);
    }
    if (in.bad()) throw IoFailure("read failure in truth CSV");
    return truth;
}

struct EvalReport {
    double pairwise_precision = 1.0;
    double pairwise_recall = 1.0;
    double f1 = 1.0;
    std::uint64_t merged_entity_clusters = 0;      // clusters spanning >= 2 true entities
    std::uint64_t largest_cluster_entity_span = 0; // max distinct entities inside one cluster
};

// Pairwise precision/recall over (cluster, entity) labels. Pair counts come
// from per-cell size aggregates, never from materialized address pairs. An
// empty denominator (no co-clustered or no co-entity pair) scores 1.0: nothing
// was claimed, so nothing is wrong.
inline EvalReport evaluate_labeled(const std::vector<std::pair<std::uint64_t, std::uint32_t>>& labeled) {
    std::unordered_map<std::uint64_t, std::uint32_t> cluster_ids;
    cluster_ids.reserve(labeled.size());
    std::vector<std::uint64_t> cluster_sizes;
    std::unordered_map<std::uint32_t, std::uint64_t> entity_sizes;
    std::unordered_map<std::uint64_t, std::uint64_t> cells; // (dense cluster << 32 | entity) -> count
    cells.reserve(labeled.size());

    for (const auto& [cluster, entity] : labeled) {
        const auto [it, inserted] =
            cluster_ids.emplace(cluster, static_cast<std::uint32_t>(cluster_ids.size()));
        if (inserted) cluster_sizes.push_back(0);
        ++cluster_sizes[it->second];
        ++entity_sizes[entity];
        ++cells[(static_cast<std::uint64_t>(it->second) << 32) | entity];
    }

    auto pairs2 = [](std::uint64_t n) { return n * (n - 1) / 2; };
    std::uint64_t co_clustered = 0, co_entity = 0, co_both = 0;
    for (std::uint64_t s : cluster_sizes) co_clustered += pairs2(s);
    for (const auto& [entity, s] : entity_sizes) co_entity += pairs2(s);

    std::vector<std::uint64_t> span(cluster_sizes.size(), 0);
    for (const auto& [key, count] : cells) {
        co_both += pairs2(count);
        ++span[key >> 32];
    }

    EvalReport report;
    report.pairwise_precision =
        co_clustered == 0 ? 1.0 : static_cast<double>(co_both) / static_cast<double>(co_clustered);
    report.pairwise_recall =
        co_entity == 0 ? 1.0 : static_cast<double>(co_both) / static_cast<double>(co_entity);
    const double pr = report.pairwise_precision + report.pairwise_recall;
    report.f1 = pr == 0.0 ? 0.0 : 2.0 * report.pairwise_precision * report.pairwise_recall / pr;
    for (std::uint64_t s : span) {
        if (s >= 2) ++report.merged_entity_clusters;
        report.largest_cluster_entity_span = std::max(report.largest_cluster_entity_span, s);
    }
    return report;
}

// Resolves truth address strings against the run's intern table.
inline std::vector<std::pair<AddressId, std::uint32_t>> resolve_truth(const GroundTruth& truth,
                                                                      const InternTable& table) {
    std::vector<std::pair<AddressId, std::uint32_t>> out;
    out.reserve(truth.entries.size());
    for (const auto& [addr, entity] : truth.entries) {
        const auto id = table.find_address(addr);
        if (!id) throw MissingAddress("truth address '" + addr + "' was never clustered");
        out.emplace_back(*id, entity);
    }
    return out;
}

inline EvalReport evaluate(const DisjointSetForest& forest,
                           const std::vector<std::pair<AddressId, std::uint32_t>>& truth) {
    std::vector<std::pair<std::uint64_t, std::uint32_t>> labeled;
    labeled.reserve(truth.size());
    for (const auto& [id, entity] : truth) {
        if (id >= forest.size())
            throw MissingAddress("truth address ordinal " + std::to_string(id) +
                                 " outside forest of " + std::to_string(forest.size()));
        labeled.emplace_back(forest.root_of(id), entity);
    }
    return evaluate_labeled(labeled);
}

inline EvalReport evaluate_assignments(const AssignmentTable& assignments, const GroundTruth& truth) {
    std::vector<std::pair<std::uint64_t, std::uint32_t>> labeled;
    labeled.reserve(truth.entries.size());
    for (const auto& [addr, entity] : truth.entries) {
        const auto hit = assignments.lookup(addr);
        if (!hit) throw MissingAddress("truth address '" + addr + "' missing from assignments");
        labeled.emplace_back(hit->second, entity);
    }
    return evaluate_labeled(labeled);
}

inline nlohmann::json eval_to_json(const EvalReport& r) {
    return nlohmann::json{{"pairwise_precision", r.pairwise_precision},
                          {"pairwise_recall", r.pairwise_recall},
                          {"f1", r.f1},
                          {"merged_entity_clusters", r.merged_entity_clusters},
                          {"largest_cluster_entity_span", r.largest_cluster_entity_span}};
}

inline nlohmann::json sim_params_to_json(const SimParams& p) {
    nlohmann::json dist;
    if (p.addresses_per_entity.kind == WalletSizeDist::Kind::Geometric)
        dist = {{"distribution", "geometric"}, {"mean", p.addresses_per_entity.mean}};
    else
        dist = {{"distribution", "fixed"}, {"value", p.addresses_per_entity.value}};
    return nlohmann::json{{"n_entities", p.n_entities},
                          {"addresses_per_entity", dist},
                          {"stake_key_probability", p.stake_key_probability},
                          {"byron_fraction", p.byron_fraction},
                          {"n_transactions", p.n_transactions},
                          {"multi_party_tx_rate", p.multi_party_tx_rate},
                          {"franken_rate", p.franken_rate},
                          {"script_fraction", p.script_fraction},
                          {"rng_seed", p.rng_seed},
                          {"max_inputs", p.max_inputs},
                          {"max_payment_outputs", p.max_payment_outputs},
                          {"slot_spacing", p.slot_spacing}};
}

// Unknown keys are rejected so a typo cannot silently fall back to a default.
inline SimParams sim_params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidParams("simulation config must be a JSON object");
    SimParams p;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "n_entities") p.n_entities = value.get<std::uint64_t>();
            else if (key == "addresses_per_entity") {
                if (!value.is_object() || !value.contains("distribution"))
                    throw InvalidParams("addresses_per_entity needs a 'distribution'");
                const auto d = value.at("distribution").get<std::string>();
                if (d == "geometric") {
                    p.addresses_per_entity.kind = WalletSizeDist::Kind::Geometric;
                    p.addresses_per_entity.mean = value.at("mean").get<double>();
                } else if (d == "fixed") {
                    p.addresses_per_entity.kind = WalletSizeDist::Kind::Fixed;
                    p.addresses_per_entity.value = value.at("value").get<std::uint32_t>();
                } else {
                    throw InvalidParams("unknown wallet size distribution '" + d + "'");
                }
            }
            else if (key == "stake_key_probability") p.stake_key_probability = value.get<double>();
            else if (key == "byron_fraction") p.byron_fraction = value.get<double>();
            else if (key == "n_transactions") p.n_transactions = value.get<std::uint64_t>();
            else if (key == "multi_party_tx_rate") p.multi_party_tx_rate = value.get<double>();
            else if (key == "franken_rate") p.franken_rate = value.get<double>();
            else if (key == "script_fraction") p.script_fraction = value.get<double>();
            else if (key == "rng_seed") p.rng_seed = value.get<std::uint64_t>();
            else if (key == "max_inputs") p.max_inputs = value.get<std::uint32_t>();
            else if (key == "max_payment_outputs") p.max_payment_outputs = value.get<std::uint32_t>();
            else if (key == "slot_spacing") p.slot_spacing = value.get<std::uint64_t>();
            else throw InvalidParams("unknown simulation parameter '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw InvalidParams("bad value for '" + key + "': " + e.what());
        }
    }
    p.validate();
    return p;
}

} // namespace eutxo_cluster
