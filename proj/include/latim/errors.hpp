#pragma once

#include <stdexcept>
#include <string>

namespace latim {

// Invalid dimensions or incompatible config fields.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: out-of-range token ids, malformed files, shape mismatches.
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values encountered during compute.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (e.g. source after target).
class contract_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Raised by metrics when the gold labels admit no ranking (all ones or all zeros).
class degenerate_input_error : public data_error {
public:
    using data_error::data_error;
};

enum class bundle_error_kind { io, format, checksum, missing_tensor, shape_mismatch, dtype_mismatch };

class bundle_error : public data_error {
public:
    bundle_error(bundle_error_kind kind, std::string tensor, const std::string& what)
        : data_error(what), kind_(kind), tensor_(std::move(tensor)) {}

    bundle_error_kind kind() const noexcept { return kind_; }
    // Empty when the error is not tied to a single tensor.
    const std::string& tensor() const noexcept { return tensor_; }

private:
    bundle_error_kind kind_;
    std::string tensor_;
};

} // namespace latim
