#pragma once

#include <stdexcept>
#include <string>

namespace trer {

// Error taxonomy shared across the toolkit. The CLI maps these onto exit
// codes: ConfigError -> 2, DataError/FormatError -> 3, VerifyError -> 4.

// Tensor/list dimensions do not agree.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid configuration or parameter value.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values or other numeric breakdowns.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Corrupt, truncated or otherwise unreadable file contents.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or inconsistent input data (not a file-format problem).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Request exceeds what the data can provide (e.g. k > database size).
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// A precondition between cooperating calls was violated (e.g. a backward
// pass fed with a trace from different weights).
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// One or more verification suites failed.
class VerifyError : public std::runtime_error {
public:
    explicit VerifyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace trer
