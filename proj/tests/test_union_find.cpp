#include "doctest.h"

#include <random>
#include <sstream>
#include <vector>

#include "eutxo_cluster/union_find.hpp"
#include "support/oracles.hpp"

using namespace eutxo_cluster;

TEST_SUITE_BEGIN("union_find");

TEST_CASE("fresh forests are all singletons") {
    DisjointSetForest empty(0);
    CHECK(empty.size() == 0);
    CHECK(empty.component_count() == 0);
    CHECK(empty.components().empty());

    DisjointSetForest forest(3);
    CHECK(forest.size() == 3);
    CHECK(forest.component_count() == 3);
    for (std::uint32_t i = 0; i < 3; ++i) {
        CHECK(forest.find(i) == i);
        CHECK(forest.set_size(i) == 1);
    }
    CHECK(forest.components() == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {1, 1}, {2, 1}});
}

TEST_CASE("union links sets and find agrees") {
    DisjointSetForest forest(4);
    forest.unite(0, 1);
    CHECK(forest.find(0) == forest.find(1));
    CHECK(forest.component_count() == 3);
    CHECK(forest.components() == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 2}, {2, 1}, {3, 1}});

    forest.unite(1, 2);
    forest.unite(2, 3);
    const std::uint32_t root = forest.find(0);
    for (std::uint32_t i = 1; i < 4; ++i) CHECK(forest.find(i) == root);
    CHECK(forest.component_count() == 1);
}

TEST_CASE("self-union is a no-op") {
    DisjointSetForest forest(2);
    CHECK(forest.unite(0, 0) == 0);
    CHECK(forest.component_count() == 2);
    CHECK(forest.set_size(0) == 1);
}

TEST_CASE("smaller set attaches under larger; ties go to the smaller ordinal") {
    DisjointSetForest forest(5);
    forest.unite(1, 2);
    forest.unite(2, 3); // {1,2,3} rooted somewhere
    const std::uint32_t big = forest.find(1);
    CHECK(forest.unite(0, 1) == big); // size 1 vs size 3
    CHECK(forest.set_size(0) == 4);

    DisjointSetForest tie(4);
    tie.unite(2, 3); // root 2 (tie toward smaller ordinal)
    CHECK(tie.find(3) == 2);
    tie.unite(0, 1); // root 0
    CHECK(tie.unite(3, 1) == 0); // equal sizes, smaller ordinal root survives
}

TEST_CASE("out-of-range elements are rejected") {
    DisjointSetForest forest(3);
    CHECK_THROWS_AS(forest.find(3), std::out_of_range);
    CHECK_THROWS_AS(forest.unite(0, 7), std::out_of_range);
    CHECK_THROWS_AS(forest.root_of(3), std::out_of_range);
}

TEST_CASE("1000 random unions over 200 elements match brute-force components") {
    std::mt19937_64 gen(8);
    DisjointSetForest forest(200);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (int i = 0; i < 1000; ++i) {
        const std::uint32_t a = gen() % 200;
        const std::uint32_t b = gen() % 200;
        forest.unite(a, b);
        edges.emplace_back(a, b);
    }
    CHECK(oracles::partition_of(forest) == oracles::bfs_components(200, edges));
}

TEST_CASE("random union sequences match brute-force connected components") {
    std::mt19937_64 gen(42);
    for (int instance = 0; instance < 10; ++instance) {
        const std::uint32_t n = 50 + gen() % 200;
        const std::size_t m = gen() % 1000;
        DisjointSetForest forest(n);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        for (std::size_t e = 0; e < m; ++e) {
            const std::uint32_t a = gen() % n;
            const std::uint32_t b = gen() % n;
            forest.unite(a, b);
            edges.emplace_back(a, b);
        }
        CHECK(oracles::partition_of(forest) == oracles::bfs_components(n, edges));

        // sizes at roots sum to n and match the components sweep
        std::uint64_t total = 0;
        for (const auto& [root, members] : forest.components()) {
            CHECK(forest.find(root) == root);
            total += members;
        }
        CHECK(total == n);
    }
}

TEST_CASE("root labels are a pure function of the union sequence") {
    std::mt19937_64 gen(5);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ops;
    for (int i = 0; i < 500; ++i) ops.emplace_back(gen() % 100, gen() % 100);

    DisjointSetForest a(100), b(100);
    for (const auto& [x, y] : ops) {
        a.unite(x, y);
        b.unite(x, y);
    }
    for (std::uint32_t i = 0; i < 100; ++i) CHECK(a.find(i) == b.find(i));
}

TEST_CASE("finalize compresses every path without changing membership") {
    std::mt19937_64 gen(9);
    DisjointSetForest forest(300);
    for (int i = 0; i < 400; ++i) forest.unite(gen() % 300, gen() % 300);
    const auto before = oracles::partition_of(forest);
    forest.finalize();
    CHECK(oracles::partition_of(forest) == before);
    for (std::uint32_t i = 0; i < 300; ++i) CHECK(forest.root_of(i) == forest.root_of(forest.root_of(i)));
}

TEST_CASE("grow appends singletons and keeps existing sets") {
    DisjointSetForest forest(2);
    forest.unite(0, 1);
    forest.grow(5);
    CHECK(forest.size() == 5);
    CHECK(forest.component_count() == 4);
    CHECK(forest.set_size(4) == 1);
    CHECK(forest.find(0) == forest.find(1));
}

TEST_CASE("snapshot round-trips the partition") {
    std::mt19937_64 gen(13);
    DisjointSetForest forest(120);
    for (int i = 0; i < 150; ++i) forest.unite(gen() % 120, gen() % 120);

    std::stringstream buffer;
    forest.write_snapshot(buffer);
    DisjointSetForest loaded = DisjointSetForest::load_snapshot(buffer);

    CHECK(loaded.size() == forest.size());
    CHECK(loaded.component_count() == forest.component_count());
    CHECK(oracles::partition_of(loaded) == oracles::partition_of(forest));
    CHECK(loaded.components() == forest.components());
}

TEST_SUITE_END();
