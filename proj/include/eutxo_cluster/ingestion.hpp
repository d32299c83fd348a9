#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eutxo_cluster/address_model.hpp"
#include "eutxo_cluster/errors.hpp"

namespace eutxo_cluster {

struct TxOutput {
    AddressInfo addr;
    std::uint64_t value = 0; // lovelace

    bool operator==(const TxOutput&) const = default;
};

struct TransactionRecord {
    std::string tx_id;
    std::uint64_t slot = 0;
    bool withdrawal_only = false; // reward withdrawal: the only case where inputs may be empty
    std::vector<AddressInfo> inputs;
    std::vector<TxOutput> outputs;
};

struct IngestStats {
    std::uint64_t tx_count = 0;
    std::uint64_t skipped_lines = 0;
    std::uint64_t out_of_order_slots = 0;
    std::uint64_t distinct_payment_addresses = 0;
    std::uint64_t distinct_byron = 0;
    std::uint64_t distinct_shelley = 0;
    std::uint64_t distinct_stake_keys = 0;
};

namespace detail {

struct RawAddress {
    std::string addr;
    AddressKind kind = AddressKind::Byron;
    std::optional<std::string> stake;
    std::uint64_t value = 0;
};

inline AddressKind parse_kind(const nlohmann::json& j, const char* where) {
    if (!j.is_string()) throw SchemaViolation(std::string(where) + ": 'kind' must be a string");
    const auto& s = j.get_ref<const std::string&>();
    if (s == "byron") return AddressKind::Byron;
    if (s == "shelley_key") return AddressKind::ShelleyKey;
    if (s == "shelley_script") return AddressKind::ShelleyScript;
    throw SchemaViolation(std::string(where) + ": unknown address kind '" + s + "'");
}

inline RawAddress parse_entry(const nlohmann::json& j, const char* where, bool want_value) {
    if (!j.is_object()) throw SchemaViolation(std::string(where) + ": entry must be an object");
    RawAddress out;
    const auto addr_it = j.find("addr");
    if (addr_it == j.end() || !addr_it->is_string() || addr_it->get_ref<const std::string&>().empty())
        throw SchemaViolation(std::string(where) + ": 'addr' must be a non-empty string");
    out.addr = addr_it->get<std::string>();
    const auto kind_it = j.find("kind");
    if (kind_it == j.end()) throw SchemaViolation(std::string(where) + ": missing 'kind'");
    out.kind = parse_kind(*kind_it, where);
    const auto stake_it = j.find("stake");
    if (stake_it != j.end() && !stake_it->is_null()) {
        if (!stake_it->is_string() || stake_it->get_ref<const std::string&>().empty())
            throw SchemaViolation(std::string(where) + ": 'stake' must be null or a non-empty string");
        out.stake = stake_it->get<std::string>();
    }
    if (out.kind == AddressKind::Byron && out.stake)
        throw SchemaViolation(std::string(where) + ": byron address cannot carry a stake key");
    if (want_value) {
        const auto value_it = j.find("value");
        if (value_it == j.end() || !value_it->is_number_integer())
            throw SchemaViolation(std::string(where) + ": 'value' must be an integer");
        if (!value_it->is_number_unsigned())
            throw SchemaViolation(std::string(where) + ": 'value' must be non-negative");
        out.value = value_it->get<std::uint64_t>();
    }
    return out;
}

inline std::optional<std::string_view> stake_view(const RawAddress& raw) {
    if (!raw.stake) return std::nullopt;
    return std::string_view(*raw.stake);
}

} // namespace detail

// Parses one JSONL transaction line, validating the whole record before any
// interning so a rejected line leaves the table untouched. Unknown fields are
// ignored. Throws MalformedLine on bad JSON, SchemaViolation on contract
// violations, ConflictingClassification when an address contradicts an earlier
// classification.
inline TransactionRecord parse_tx_line(std::string_view line, InternTable& table) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedLine(e.what());
    }
    if (!j.is_object()) throw SchemaViolation("record must be a JSON object");

    TransactionRecord rec;
    const auto id_it = j.find("tx_id");
    if (id_it == j.end() || !id_it->is_string() || id_it->get_ref<const std::string&>().empty())
        throw SchemaViolation("'tx_id' must be a non-empty string");
    rec.tx_id = id_it->get<std::string>();

    const auto slot_it = j.find("slot");
    if (slot_it == j.end() || !slot_it->is_number_integer())
        throw SchemaViolation("'slot' must be an integer");
    if (!slot_it->is_number_unsigned()) throw SchemaViolation("'slot' must be non-negative");
    rec.slot = slot_it->get<std::uint64_t>();
    // day arithmetic downstream is signed
    if (rec.slot > (std::uint64_t{1} << 62)) throw SchemaViolation("'slot' out of range");

    const auto wd_it = j.find("withdrawal_only");
    if (wd_it != j.end()) {
        if (!wd_it->is_boolean()) throw SchemaViolation("'withdrawal_only' must be a boolean");
        rec.withdrawal_only = wd_it->get<bool>();
    }

    const auto in_it = j.find("inputs");
    const auto out_it = j.find("outputs");
    if (in_it == j.end() || !in_it->is_array()) throw SchemaViolation("'inputs' must be an array");
    if (out_it == j.end() || !out_it->is_array()) throw SchemaViolation("'outputs' must be an array");
    if (in_it->empty() && !rec.withdrawal_only)
        throw SchemaViolation("'inputs' may be empty only on withdrawal-only records");
    if (out_it->empty()) throw SchemaViolation("'outputs' must be non-empty");

    std::vector<detail::RawAddress> raw_inputs;
    std::vector<detail::RawAddress> raw_outputs;
    raw_inputs.reserve(in_it->size());
    raw_outputs.reserve(out_it->size());
    for (const auto& e : *in_it) raw_inputs.push_back(detail::parse_entry(e, "inputs", false));
    for (const auto& e : *out_it) raw_outputs.push_back(detail::parse_entry(e, "outputs", true));

    // Pre-intern consistency checks; a line that conflicts with earlier records
    // (or with itself) is rejected without side effects.
    auto check = [&table](const detail::RawAddress& raw) {
        if (const auto id = table.find_address(raw.addr))
            table.verify_consistent(*id, raw.kind, detail::stake_view(raw));
    };
    for (const auto& raw : raw_inputs) check(raw);
    for (const auto& raw : raw_outputs) check(raw);
    for (std::size_t a = 0; a < raw_inputs.size() + raw_outputs.size(); ++a) {
        const auto& ra = a < raw_inputs.size() ? raw_inputs[a] : raw_outputs[a - raw_inputs.size()];
        for (std::size_t b = a + 1; b < raw_inputs.size() + raw_outputs.size(); ++b) {
            const auto& rb = b < raw_inputs.size() ? raw_inputs[b] : raw_outputs[b - raw_inputs.size()];
            if (ra.addr == rb.addr && (ra.kind != rb.kind || ra.stake != rb.stake))
                throw ConflictingClassification("address '" + ra.addr +
                                                "' appears twice in one record with different classification");
        }
    }

    rec.inputs.reserve(raw_inputs.size());
    rec.outputs.reserve(raw_outputs.size());
    for (const auto& raw : raw_inputs)
        rec.inputs.push_back(table.intern_address(raw.addr, raw.kind, detail::stake_view(raw)));
    for (const auto& raw : raw_outputs)
        rec.outputs.push_back(
            TxOutput{table.intern_address(raw.addr, raw.kind, detail::stake_view(raw)), raw.value});
    return rec;
}

// Streams newline-delimited transaction records. Memory stays O(intern tables):
// one line and one record live at a time. Lenient mode (default) skips and
// counts bad lines; strict mode aborts on the first with its line number.
class TransactionReader {
public:
    TransactionReader(std::istream& in, InternTable& table, bool strict = false)
        : in_(&in), table_(&table), strict_(strict) {}

    std::optional<TransactionRecord> next() {
        std::string line;
        while (std::getline(*in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            try {
                TransactionRecord rec = parse_tx_line(line, *table_);
                if (have_slot_ && rec.slot < last_slot_) ++out_of_order_slots_;
                last_slot_ = rec.slot;
                have_slot_ = true;
                ++tx_count_;
                return rec;
            } catch (const MalformedLine& e) {
                handle(e);
            } catch (const SchemaViolation& e) {
                handle(e);
            } catch (const ConflictingClassification& e) {
                handle(e);
            }
        }
        if (in_->bad()) throw IoFailure("read failure at line " + std::to_string(line_no_));
        return std::nullopt;
    }

    IngestStats stats() const {
        IngestStats s;
        s.tx_count = tx_count_;
        s.skipped_lines = skipped_;
        s.out_of_order_slots = out_of_order_slots_;
        s.distinct_payment_addresses = table_->address_count();
        s.distinct_byron = table_->byron_count();
        s.distinct_shelley = table_->shelley_count();
        s.distinct_stake_keys = table_->stake_key_count();
        return s;
    }

    std::uint64_t line_number() const { return line_no_; }

private:
    template <typename E>
    void handle(const E& e) {
        if (strict_) throw E("line " + std::to_string(line_no_) + ": " + e.what());
        ++skipped_;
    }

    std::istream* in_;
    InternTable* table_;
    bool strict_;
    std::uint64_t line_no_ = 0;
    std::uint64_t tx_count_ = 0;
    std::uint64_t skipped_ = 0;
    std::uint64_t out_of_order_slots_ = 0;
    std::uint64_t last_slot_ = 0;
    bool have_slot_ = false;
};

inline std::vector<TransactionRecord> read_all(std::istream& in, InternTable& table,
                                               bool strict = false) {
    TransactionReader reader(in, table, strict);
    std::vector<TransactionRecord> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

} // namespace eutxo_cluster
