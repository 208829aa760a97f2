#pragma once

#include <stdexcept>
#include <string>

namespace fundbasket {

/// Invalid user-supplied configuration (bad split, unknown model, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data is missing, malformed or insufficient.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed filing document. Always names the accession it came from.
class ParseError : public DataError {
public:
    ParseError(std::string accession_id, const std::string& what)
        : DataError("filing " + accession_id + ": " + what), accession_id_(std::move(accession_id)) {}

    const std::string& accession_id() const { return accession_id_; }

private:
    std::string accession_id_;
};

/// On-disk cache content that cannot be trusted.
class CacheError : public DataError {
public:
    using DataError::DataError;
};

/// Model fitting produced an unusable state.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fundbasket
