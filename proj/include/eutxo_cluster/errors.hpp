#pragma once

#include <stdexcept>

namespace eutxo_cluster {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// address model
struct ConflictingClassification : Error { using Error::Error; };
struct UnsupportedHeaderType : Error { using Error::Error; };
struct StakeAddressNotPayment : Error { using Error::Error; };

// ingestion
struct MalformedLine : Error { using Error::Error; };
struct SchemaViolation : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

// analytics
struct DegenerateInput : Error { using Error::Error; };

// simulator
struct InvalidParams : Error { using Error::Error; };
struct MissingAddress : Error { using Error::Error; };

// cli
struct UsageError : Error { using Error::Error; };

} // namespace eutxo_cluster
