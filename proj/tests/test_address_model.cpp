#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "eutxo_cluster/address_model.hpp"

using namespace eutxo_cluster;

TEST_SUITE_BEGIN("address_model");

TEST_CASE("first interning gets ordinal 0 and interning is idempotent") {
    InternTable table;
    const AddressInfo a = table.intern_address("addrA", AddressKind::Byron);
    CHECK(a.id == 0);
    CHECK(a.kind == AddressKind::Byron);
    CHECK_FALSE(a.stake_key.has_value());

    const AddressInfo again = table.intern_address("addrA", AddressKind::Byron);
    CHECK(again == a);
    CHECK(table.address_count() == 1);
}

TEST_CASE("addresses sharing a stake key intern it once") {
    InternTable table;
    const AddressInfo b = table.intern_address("addrB", AddressKind::ShelleyKey, "stake1");
    const AddressInfo c = table.intern_address("addrC", AddressKind::ShelleyKey, "stake1");
    REQUIRE(b.stake_key.has_value());
    REQUIRE(c.stake_key.has_value());
    CHECK(*b.stake_key == *c.stake_key);
    CHECK(table.stake_key_count() == 1);

    const AddressInfo d = table.intern_address("addrD", AddressKind::ShelleyScript, "stake2");
    REQUIRE(d.stake_key.has_value());
    CHECK(*d.stake_key != *b.stake_key);
    CHECK(table.stake_key_count() == 2);
}

TEST_CASE("reappearing with a different classification is rejected") {
    InternTable table;
    table.intern_address("addr", AddressKind::ShelleyKey, "s1");
    CHECK_THROWS_AS(table.intern_address("addr", AddressKind::ShelleyScript, "s1"),
                    ConflictingClassification);
    CHECK_THROWS_AS(table.intern_address("addr", AddressKind::ShelleyKey, "s2"),
                    ConflictingClassification);
    CHECK_THROWS_AS(table.intern_address("addr", AddressKind::ShelleyKey),
                    ConflictingClassification);
    // the rejected stake string must not leak into the table
    CHECK(table.stake_key_count() == 1);
    CHECK(table.address_count() == 1);
}

TEST_CASE("byron addresses cannot carry a stake key") {
    InternTable table;
    CHECK_THROWS_AS(table.intern_address("b1", AddressKind::Byron, "s1"), std::invalid_argument);
    CHECK_THROWS_AS(table.intern_address("", AddressKind::Byron), std::invalid_argument);
    CHECK(table.address_count() == 0);
}

TEST_CASE("interning is a pure function of arrival order") {
    std::mt19937_64 gen(7);
    std::vector<std::string> stream;
    for (int i = 0; i < 5000; ++i) stream.push_back("addr" + std::to_string(gen() % 1500));

    InternTable first, second;
    for (const auto& s : stream) first.intern_address(s, AddressKind::ShelleyKey);
    for (const auto& s : stream) second.intern_address(s, AddressKind::ShelleyKey);
    REQUIRE(first.address_count() == second.address_count());
    for (AddressId id = 0; id < first.address_count(); ++id)
        CHECK(first.address_string(id) == second.address_string(id));
}

TEST_CASE("round-trip: lookup of an interned id returns the original string") {
    InternTable table;
    std::mt19937_64 gen(11);
    std::vector<std::string> uniques;
    for (int i = 0; i < 20000; ++i) uniques.push_back("u" + std::to_string(i) + "_" + std::to_string(gen()));

    std::vector<AddressId> ids;
    for (const auto& s : uniques) ids.push_back(table.intern_address(s, AddressKind::Byron).id);

    CHECK(table.address_count() == uniques.size()); // distinct strings, distinct ids
    for (std::size_t i = 0; i < uniques.size(); ++i) {
        CHECK(table.address_string(ids[i]) == uniques[i]);
        CHECK(table.find_address(uniques[i]) == ids[i]);
        CHECK(ids[i] == i); // ordinals contiguous in first-seen order
    }
    CHECK_FALSE(table.find_address("never-seen").has_value());
}

TEST_CASE("per-kind counters") {
    InternTable table;
    table.intern_address("b", AddressKind::Byron);
    table.intern_address("k1", AddressKind::ShelleyKey, "s");
    table.intern_address("k2", AddressKind::ShelleyKey);
    table.intern_address("c", AddressKind::ShelleyScript, "s");
    CHECK(table.byron_count() == 1);
    CHECK(table.shelley_count() == 3);
    CHECK(table.shelley_key_count() == 2);
    CHECK(table.shelley_script_count() == 1);
}

TEST_CASE("header byte classification follows the published type table") {
    // base addresses: payment credential x stake credential
    CHECK(classify_header(0x01) == HeaderClass{AddressKind::ShelleyKey, true});
    CHECK(classify_header(0x11) == HeaderClass{AddressKind::ShelleyScript, true});
    CHECK(classify_header(0x21) == HeaderClass{AddressKind::ShelleyKey, true});
    CHECK(classify_header(0x31) == HeaderClass{AddressKind::ShelleyScript, true});
    // pointer addresses resolve to "no usable stake part"
    CHECK(classify_header(0x41) == HeaderClass{AddressKind::ShelleyKey, false});
    CHECK(classify_header(0x51) == HeaderClass{AddressKind::ShelleyScript, false});
    // enterprise
    CHECK(classify_header(0x61) == HeaderClass{AddressKind::ShelleyKey, false});
    CHECK(classify_header(0x71) == HeaderClass{AddressKind::ShelleyScript, false});
    // byron
    CHECK(classify_header(0x82) == HeaderClass{AddressKind::Byron, false});

    for (int t = 9; t <= 13; ++t)
        CHECK_THROWS_AS(classify_header(static_cast<std::uint8_t>(t << 4)), UnsupportedHeaderType);
    CHECK_THROWS_AS(classify_header(0xE1), StakeAddressNotPayment);
    CHECK_THROWS_AS(classify_header(0xF1), StakeAddressNotPayment);

    // network nibble (low bits) never affects the classification
    for (int low = 0; low < 16; ++low)
        CHECK(classify_header(static_cast<std::uint8_t>(low)) ==
              HeaderClass{AddressKind::ShelleyKey, true});
}

TEST_SUITE_END();
