#pragma once

#include <stdexcept>
#include <string>

namespace qkdtime {

/// Malformed configuration or parameters outside their documented domain.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Key file contents that are not hexadecimal.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Not enough unconsumed key digits. Key material is never reused.
class KeyExhaustedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Key store lookups: unknown key id, or a second retrieval by the same party.
class KmsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (insufficient history, bad index).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace qkdtime
