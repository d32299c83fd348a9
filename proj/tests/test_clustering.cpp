#include "doctest.h"

#include <algorithm>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "eutxo_cluster/clustering.hpp"
#include "eutxo_cluster/simulator.hpp"
#include "support/oracles.hpp"

using namespace eutxo_cluster;

namespace {

// Partition keyed by address string (stable under stream reordering, unlike ordinals):
// every address maps to the lexicographically smallest address of its cluster.
std::unordered_map<std::string, std::string> string_partition(const InternTable& table,
                                                              const DisjointSetForest& forest) {
    std::unordered_map<std::uint32_t, std::string> rep;
    for (AddressId id = 0; id < table.address_count(); ++id) {
        const std::uint32_t root = forest.root_of(id);
        const std::string s(table.address_string(id));
        auto [it, inserted] = rep.emplace(root, s);
        if (!inserted && s < it->second) it->second = s;
    }
    std::unordered_map<std::string, std::string> out;
    for (AddressId id = 0; id < table.address_count(); ++id)
        out.emplace(table.address_string(id), rep.at(forest.root_of(id)));
    return out;
}

TransactionRecord make_tx(InternTable& table, std::uint64_t slot,
                          const std::vector<AddressInfo>& inputs,
                          const std::vector<AddressInfo>& outputs) {
    TransactionRecord rec;
    rec.tx_id = "t";
    rec.slot = slot;
    rec.inputs = inputs;
    for (const AddressInfo& o : outputs) rec.outputs.push_back(TxOutput{o, 1});
    (void)table;
    return rec;
}

} // namespace

TEST_SUITE_BEGIN("clustering");

TEST_CASE("h1 joins key-payment inputs and never touches scripts") {
    InternTable table;
    const auto a = table.intern_address("A", AddressKind::Byron);
    const auto b = table.intern_address("B", AddressKind::ShelleyKey);
    const auto c = table.intern_address("C", AddressKind::ShelleyScript);
    DisjointSetForest forest(3);

    const auto tx = make_tx(table, 0, {a, b, c}, {});
    CHECK(apply_h1(tx, forest) == 1);
    CHECK(forest.find(a.id) == forest.find(b.id));
    CHECK(forest.find(c.id) == c.id);
    CHECK(forest.set_size(c.id) == 1);

    // idempotent on replay
    auto tx2 = tx;
    CHECK(apply_h1(tx2, forest) == 0);
}

TEST_CASE("h1 performs zero unions on all-script or single inputs") {
    InternTable table;
    const auto c1 = table.intern_address("C1", AddressKind::ShelleyScript);
    const auto c2 = table.intern_address("C2", AddressKind::ShelleyScript);
    const auto a = table.intern_address("A", AddressKind::Byron);
    DisjointSetForest forest(3);

    CHECK(apply_h1(make_tx(table, 0, {c1, c2}, {}), forest) == 0);
    CHECK(apply_h1(make_tx(table, 0, {a}, {}), forest) == 0);
    CHECK(forest.component_count() == 3);

    // duplicate input addresses are harmless
    const auto dup = make_tx(table, 0, {a, a, a}, {});
    CHECK(apply_h1(dup, forest) == 0);
}

TEST_CASE("h2 registers the first sighting and links later ones") {
    InternTable table;
    const auto x = table.intern_address("X", AddressKind::ShelleyKey, "S");
    const auto y = table.intern_address("Y", AddressKind::ShelleyKey, "S");
    const auto scr = table.intern_address("Z", AddressKind::ShelleyScript, "S");
    const auto byron = table.intern_address("B", AddressKind::Byron);
    DisjointSetForest forest(4);
    StakeIndex index;

    CHECK_FALSE(apply_h2(x, index, forest)); // becomes representative
    CHECK(index.representative(*x.stake_key) == x.id);
    CHECK(apply_h2(y, index, forest));
    CHECK(forest.find(x.id) == forest.find(y.id));
    CHECK(apply_h2(scr, index, forest)); // scripts participate in h2
    CHECK(forest.find(scr.id) == forest.find(x.id));
    CHECK_FALSE(apply_h2(byron, index, forest)); // no delegation part
}

TEST_CASE("stake-linked addresses cluster under h2 but not h1") {
    // X and Y share a stake key and never co-occur in inputs
    std::vector<RawTransaction> txs(2);
    txs[0].tx_id = "t0";
    txs[0].slot = 0;
    txs[0].inputs = {{"X", AddressKind::ShelleyKey, "S"}};
    txs[0].outputs = {{"P", AddressKind::Byron, std::nullopt, 5}};
    txs[1].tx_id = "t1";
    txs[1].slot = 9;
    txs[1].inputs = {{"Y", AddressKind::ShelleyKey, "S"}};
    txs[1].outputs = {{"Q", AddressKind::Byron, std::nullopt, 5}};

    auto h2_only = oracles::cluster_chain(txs, HeuristicSet{false, true});
    auto x = h2_only.table->find_address("X");
    auto y = h2_only.table->find_address("Y");
    CHECK(h2_only.result.forest.root_of(*x) == h2_only.result.forest.root_of(*y));

    auto h1_only = oracles::cluster_chain(txs, HeuristicSet{true, false});
    x = h1_only.table->find_address("X");
    y = h1_only.table->find_address("Y");
    CHECK(h1_only.result.forest.root_of(*x) != h1_only.result.forest.root_of(*y));
}

TEST_CASE("h1 closure is transitive across transactions") {
    std::vector<RawTransaction> txs(2);
    txs[0].tx_id = "t0";
    txs[0].slot = 0;
    txs[0].inputs = {{"A", AddressKind::ShelleyKey, std::nullopt}, {"B", AddressKind::ShelleyKey, std::nullopt}};
    txs[0].outputs = {{"O1", AddressKind::Byron, std::nullopt, 1}};
    txs[1].tx_id = "t1";
    txs[1].slot = 1;
    txs[1].inputs = {{"B", AddressKind::ShelleyKey, std::nullopt}, {"C", AddressKind::ShelleyKey, std::nullopt}};
    txs[1].outputs = {{"O2", AddressKind::Byron, std::nullopt, 1}};

    auto run = oracles::cluster_chain(txs, HeuristicSet{true, false});
    const auto& table = *run.table;
    auto& forest = run.result.forest;
    const auto root = forest.root_of(*table.find_address("A"));
    CHECK(forest.root_of(*table.find_address("B")) == root);
    CHECK(forest.root_of(*table.find_address("C")) == root);
    CHECK(forest.root_of(*table.find_address("O1")) != root);

    // matches brute-force components over the co-input pairs
    const auto expected = oracles::bfs_components(
        static_cast<std::uint32_t>(table.address_count()),
        {{*table.find_address("A"), *table.find_address("B")},
         {*table.find_address("B"), *table.find_address("C")}});
    CHECK(oracles::partition_of(forest) == expected);
}

TEST_CASE("at least one heuristic must be enabled") {
    InternTable table;
    CHECK_THROWS_AS(ClusterEngine(table, HeuristicSet{false, false}), std::invalid_argument);
}

TEST_CASE("permuting the stream changes labels but not the partition") {
    SimParams params;
    params.n_entities = 60;
    params.n_transactions = 400;
    params.multi_party_tx_rate = 0.05;
    params.franken_rate = 0.02;
    params.script_fraction = 0.1;
    params.rng_seed = 33;
    auto chain = generate_chain(params);

    for (HeuristicSet set : {HeuristicSet{true, true}, HeuristicSet{true, false}, HeuristicSet{false, true}}) {
        auto forward = oracles::cluster_chain(chain.transactions, set);
        auto shuffled = chain.transactions;
        std::mt19937_64 gen(99);
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[gen() % i]);
        auto permuted = oracles::cluster_chain(shuffled, set);
        CHECK(string_partition(*forward.table, forward.result.forest) ==
              string_partition(*permuted.table, permuted.result.forest));
    }
}

TEST_CASE("single-heuristic partitions refine the combined partition") {
    SimParams params;
    params.n_entities = 80;
    params.n_transactions = 500;
    params.script_fraction = 0.15;
    params.rng_seed = 7;
    auto chain = generate_chain(params);

    auto combined = oracles::cluster_chain(chain.transactions, HeuristicSet{true, true});
    const auto combined_by_string = string_partition(*combined.table, combined.result.forest);

    for (HeuristicSet solo : {HeuristicSet{true, false}, HeuristicSet{false, true}}) {
        auto run = oracles::cluster_chain(chain.transactions, solo);
        CHECK(run.result.forest.component_count() >= combined.result.forest.component_count());
        // every solo cluster sits inside one combined cluster
        std::unordered_map<std::uint32_t, std::string> seen_root_rep;
        for (AddressId id = 0; id < run.table->address_count(); ++id) {
            const auto solo_root = run.result.forest.root_of(id);
            const auto& combined_rep = combined_by_string.at(std::string(run.table->address_string(id)));
            auto [it, inserted] = seen_root_rep.emplace(solo_root, combined_rep);
            CHECK(it->second == combined_rep);
        }
    }
}

TEST_CASE("adding transactions never splits an existing cluster") {
    SimParams params;
    params.n_entities = 50;
    params.n_transactions = 300;
    params.multi_party_tx_rate = 0.1;
    params.rng_seed = 15;
    auto chain = generate_chain(params);

    const std::vector<RawTransaction> prefix(chain.transactions.begin(),
                                             chain.transactions.begin() + 150);
    auto partial = oracles::cluster_chain(prefix, HeuristicSet{true, true});
    auto full = oracles::cluster_chain(chain.transactions, HeuristicSet{true, true});
    const auto full_by_string = string_partition(*full.table, full.result.forest);

    std::unordered_map<std::uint32_t, std::string> rep;
    for (AddressId id = 0; id < partial.table->address_count(); ++id) {
        const auto prefix_root = partial.result.forest.root_of(id);
        const auto& full_rep = full_by_string.at(std::string(partial.table->address_string(id)));
        auto [it, inserted] = rep.emplace(prefix_root, full_rep);
        CHECK(it->second == full_rep);
    }
}

TEST_CASE("under h1-only every script address stays a singleton") {
    SimParams params;
    params.n_entities = 40;
    params.n_transactions = 300;
    params.script_fraction = 0.3;
    params.stake_key_probability = 1.0;
    params.rng_seed = 27;
    auto chain = generate_chain(params);

    auto run = oracles::cluster_chain(chain.transactions, HeuristicSet{true, false});
    bool saw_script = false;
    for (AddressId id = 0; id < run.table->address_count(); ++id) {
        if (run.table->kind_of(id) != AddressKind::ShelleyScript) continue;
        saw_script = true;
        CHECK(run.result.forest.root_of(id) == id);
    }
    CHECK(saw_script);
}

TEST_CASE("combined equals the join of the single-heuristic partitions") {
    SimParams params;
    params.n_entities = 70;
    params.n_transactions = 400;
    params.multi_party_tx_rate = 0.08;
    params.franken_rate = 0.05;
    params.script_fraction = 0.1;
    params.rng_seed = 3;
    auto chain = generate_chain(params);

    auto combined = oracles::cluster_chain(chain.transactions, HeuristicSet{true, true});
    auto h1 = oracles::cluster_chain(chain.transactions, HeuristicSet{true, false});
    auto h2 = oracles::cluster_chain(chain.transactions, HeuristicSet{false, true});
    // same stream order, so all three tables assign identical ordinals
    REQUIRE(h1.table->address_count() == combined.table->address_count());
    CHECK(oracles::partition_of(combined.result.forest) ==
          oracles::join_partitions(oracles::partition_of(h1.result.forest),
                                   oracles::partition_of(h2.result.forest)));
}

TEST_CASE("assignments CSV writes ordinal order and loads back verbatim") {
    std::vector<RawTransaction> txs(1);
    txs[0].tx_id = "t";
    txs[0].slot = 0;
    txs[0].inputs = {{"A", AddressKind::ShelleyKey, "S"}, {"B", AddressKind::ShelleyKey, std::nullopt}};
    txs[0].outputs = {{"C", AddressKind::ShelleyKey, "S", 2}};

    auto run = oracles::cluster_chain(txs, HeuristicSet{true, true});
    std::ostringstream out;
    write_assignments_csv(out, *run.table, run.result.forest);

    const std::string written = out.str();
    CHECK(written.substr(0, written.find('\n')) == "address,cluster_id");
    // A,B co-spent; C shares A's stake key: one cluster rooted at ordinal 0
    CHECK(written == "address,cluster_id\nA,0\nB,0\nC,0\n");

    std::istringstream in(written);
    const AssignmentTable loaded = load_assignments_csv(in);
    CHECK(loaded.cluster_of.size() == 3);
    CHECK(loaded.lookup("B")->second == 0);
    CHECK_FALSE(loaded.lookup("missing").has_value());

    std::istringstream bad("address,cluster_id\nA,notanumber\n");
    CHECK_THROWS_AS(load_assignments_csv(bad), SchemaViolation);
    std::istringstream no_header("A,0\n");
    CHECK_THROWS_AS(load_assignments_csv(no_header), SchemaViolation);
}

TEST_SUITE_END();
