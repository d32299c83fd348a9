#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eutxo_cluster/errors.hpp"

namespace eutxo_cluster {

// Dense ordinals assigned in first-seen order. Contiguous from 0 within one run.
using AddressId = std::uint32_t;
using StakeKeyId = std::uint32_t;

enum class AddressKind : std::uint8_t {
    Byron,
    ShelleyKey,
    ShelleyScript, // simple scripts and Plutus contracts; every clustering rule treats them alike
};

inline const char* to_string(AddressKind kind) {
    switch (kind) {
        case AddressKind::Byron: return "byron";
        case AddressKind::ShelleyKey: return "shelley_key";
        case AddressKind::ShelleyScript: return "shelley_script";
    }
    return "unknown";
}

struct AddressInfo {
    AddressId id = 0;
    AddressKind kind = AddressKind::Byron;
    std::optional<StakeKeyId> stake_key;

    bool operator==(const AddressInfo&) const = default;
};

// Classification of the leading byte of a Shelley-era address (type nibble in bits 7..4).
// Pointer-delegation types (4, 5) resolve to "no stake part": the pointer target is chain
// state this library does not hold.
struct HeaderClass {
    AddressKind kind;
    bool has_stake_part;

    bool operator==(const HeaderClass&) const = default;
};

inline HeaderClass classify_header(std::uint8_t header_byte) {
    switch (header_byte >> 4) {
        case 0x0: return {AddressKind::ShelleyKey, true};
        case 0x1: return {AddressKind::ShelleyScript, true};
        case 0x2: return {AddressKind::ShelleyKey, true};
        case 0x3: return {AddressKind::ShelleyScript, true};
        case 0x4: return {AddressKind::ShelleyKey, false};
        case 0x5: return {AddressKind::ShelleyScript, false};
        case 0x6: return {AddressKind::ShelleyKey, false};
        case 0x7: return {AddressKind::ShelleyScript, false};
        case 0x8: return {AddressKind::Byron, false};
        case 0xe:
        case 0xf:
            throw StakeAddressNotPayment("header type " + std::to_string(header_byte >> 4) +
                                         " is a stake/reward address, not a payment address");
        default:
            throw UnsupportedHeaderType("unsupported address header type " +
                                        std::to_string(header_byte >> 4));
    }
}

namespace detail {

// FNV-1a, 64-bit. Deterministic across platforms so table layout never depends on the runtime.
inline std::uint64_t hash_bytes(std::string_view s) noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

// String -> dense id map. Open addressing over the 64-bit hash with full-string
// verification on probe; string bytes live in a single arena.
class StringInterner {
public:
    static constexpr std::uint32_t npos = 0xffffffffu;

    StringInterner() { rehash(1024); }

    // Returns (id, inserted). Ids are contiguous from 0 in first-seen order.
    std::pair<std::uint32_t, bool> intern(std::string_view s) {
        if ((count_ + 1) * 10 > slots_.size() * 7) rehash(slots_.size() * 2);
        const std::uint64_t h = detail::hash_bytes(s);
        std::size_t i = h & mask_;
        while (slots_[i].id != npos) {
            if (slots_[i].hash == h && view(slots_[i].id) == s) return {slots_[i].id, false};
            i = (i + 1) & mask_;
        }
        const auto id = static_cast<std::uint32_t>(count_);
        arena_.insert(arena_.end(), s.begin(), s.end());
        ends_.push_back(arena_.size());
        slots_[i] = Slot{h, id};
        ++count_;
        return {id, true};
    }

    std::uint32_t find(std::string_view s) const {
        const std::uint64_t h = detail::hash_bytes(s);
        std::size_t i = h & mask_;
        while (slots_[i].id != npos) {
            if (slots_[i].hash == h && view(slots_[i].id) == s) return slots_[i].id;
            i = (i + 1) & mask_;
        }
        return npos;
    }

    std::string_view view(std::uint32_t id) const {
        const std::size_t begin = id == 0 ? 0 : ends_[id - 1];
        return {arena_.data() + begin, ends_[id] - begin};
    }

    std::size_t size() const { return count_; }

private:
    struct Slot {
        std::uint64_t hash = 0;
        std::uint32_t id = npos;
    };

    void rehash(std::size_t capacity) {
        std::vector<Slot> fresh(capacity);
        const std::size_t mask = capacity - 1;
        for (const Slot& s : slots_) {
            if (s.id == npos) continue;
            std::size_t i = s.hash & mask;
            while (fresh[i].id != npos) i = (i + 1) & mask;
            fresh[i] = s;
        }
        slots_ = std::move(fresh);
        mask_ = mask;
    }

    std::vector<char> arena_;
    std::vector<std::size_t> ends_; // strings are contiguous; string i spans [ends_[i-1], ends_[i])
    std::vector<Slot> slots_;
    std::size_t mask_ = 0;
    std::size_t count_ = 0;
};

// Interning of payment addresses and stake keys, plus the per-address classification.
// Single-writer during ingestion; read-only lookups are safe once ingestion is done.
class InternTable {
public:
    AddressInfo intern_address(std::string_view addr, AddressKind kind,
                               std::optional<std::string_view> stake = std::nullopt) {
        if (addr.empty()) throw std::invalid_argument("address string must be non-empty");
        if (kind == AddressKind::Byron && stake)
            throw std::invalid_argument("byron address cannot reference a stake key");

        const std::uint32_t existing = addresses_.find(addr);
        if (existing != StringInterner::npos) {
            verify_consistent(existing, kind, stake);
            return info(existing);
        }

        const auto [id, inserted] = addresses_.intern(addr);
        (void)inserted;
        std::uint32_t stake_ref = kNoStake;
        if (stake) stake_ref = stakes_.intern(*stake).first;
        kinds_.push_back(kind);
        stake_refs_.push_back(stake_ref);
        switch (kind) {
            case AddressKind::Byron: ++byron_; break;
            case AddressKind::ShelleyKey: ++shelley_key_; break;
            case AddressKind::ShelleyScript: ++shelley_script_; break;
        }
        return info(id);
    }

    // Checks that a re-arrival matches the recorded kind and stake key without
    // interning anything. Throws ConflictingClassification on mismatch.
    void verify_consistent(AddressId id, AddressKind kind,
                           std::optional<std::string_view> stake) const {
        bool ok = kinds_[id] == kind;
        if (ok) {
            if (stake_refs_[id] == kNoStake)
                ok = !stake.has_value();
            else
                ok = stake.has_value() && stakes_.view(stake_refs_[id]) == *stake;
        }
        if (!ok)
            throw ConflictingClassification("address '" + std::string(addresses_.view(id)) +
                                            "' reappeared with a different kind or stake key");
    }

    std::optional<AddressId> find_address(std::string_view addr) const {
        const std::uint32_t id = addresses_.find(addr);
        if (id == StringInterner::npos) return std::nullopt;
        return id;
    }

    AddressInfo info(AddressId id) const {
        AddressInfo out{id, kinds_[id], std::nullopt};
        if (stake_refs_[id] != kNoStake) out.stake_key = stake_refs_[id];
        return out;
    }

    std::size_t address_count() const { return addresses_.size(); }
    std::size_t stake_key_count() const { return stakes_.size(); }

    std::string_view address_string(AddressId id) const { return addresses_.view(id); }
    std::string_view stake_string(StakeKeyId id) const { return stakes_.view(id); }
    AddressKind kind_of(AddressId id) const { return kinds_[id]; }

    std::optional<StakeKeyId> stake_of(AddressId id) const {
        if (stake_refs_[id] == kNoStake) return std::nullopt;
        return stake_refs_[id];
    }

    std::uint64_t byron_count() const { return byron_; }
    std::uint64_t shelley_count() const { return shelley_key_ + shelley_script_; }
    std::uint64_t shelley_key_count() const { return shelley_key_; }
    std::uint64_t shelley_script_count() const { return shelley_script_; }

private:
    static constexpr std::uint32_t kNoStake = 0xffffffffu;

    StringInterner addresses_;
    StringInterner stakes_;
    std::vector<AddressKind> kinds_;        // by AddressId
    std::vector<std::uint32_t> stake_refs_; // by AddressId, kNoStake when absent
    std::uint64_t byron_ = 0;
    std::uint64_t shelley_key_ = 0;
    std::uint64_t shelley_script_ = 0;
};

} // namespace eutxo_cluster
