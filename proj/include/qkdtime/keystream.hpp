#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace qkdtime::keystream {

using Digit = std::uint8_t;
using DigitPair = std::array<Digit, 2>;
using DigitTriplet = std::array<Digit, 3>;

/// Shared key material as hexadecimal digits, consumed front to back.
///
/// The cursor only moves forward; a take that would run past the end throws
/// KeyExhaustedError and leaves the cursor where it was.
class HexKeyStream {
public:
    HexKeyStream(std::string key_id, std::vector<Digit> digits);

    /// Parses hex text, ignoring whitespace. Throws ParseError with the byte
    /// offset of the first offending character.
    static HexKeyStream from_hex(std::string key_id, std::string_view text);

    const std::string& key_id() const noexcept { return key_id_; }
    const std::vector<Digit>& digits() const noexcept { return digits_; }
    std::size_t size() const noexcept { return digits_.size(); }
    std::size_t cursor() const noexcept { return cursor_; }
    std::size_t remaining() const noexcept { return digits_.size() - cursor_; }

    std::vector<DigitPair> take_pairs(std::size_t n);
    std::vector<DigitTriplet> take_triplets(std::size_t n);

    /// Uppercase hex of every digit, consumed or not.
    std::string to_hex() const;

private:
    void require(std::size_t count) const;

    std::string key_id_;
    std::vector<Digit> digits_;
    std::size_t cursor_ = 0;
};

/// Reads a key file; the key id is the file stem.
HexKeyStream load_keys(const std::filesystem::path& path);

/// Writes `stream` as hex text, 64 digits per line.
void save_keys(const HexKeyStream& stream, const std::filesystem::path& path);

/// Deterministic stand-in for delivered QKD key material: uniform digits from
/// a seeded 64-bit Mersenne Twister (top four bits of each draw).
HexKeyStream mock_qkd_source(std::uint64_t seed, std::size_t n_digits,
                             std::string key_id = {});

enum class Party { A, B };

std::string_view party_name(Party party) noexcept;

/// Key management store shared by the two parties.
///
/// Each key id can be retrieved once by A and once by B, and both see the same
/// digits. When opened on a directory, keys live in `<key_id>.hex` files and the
/// consumption flags in `consumed.txt`, one `<key_id> <A|B>` per line.
class KmsStore {
public:
    KmsStore() = default;

    static KmsStore open(const std::filesystem::path& directory);

    /// Adds a key. Throws KmsError if the id is already present.
    void deposit(const HexKeyStream& stream);

    /// Returns a fresh (cursor 0) copy of the key and marks it consumed for `party`.
    HexKeyStream get(const std::string& key_id, Party party);

    bool contains(const std::string& key_id) const;
    bool consumed(const std::string& key_id, Party party) const;
    std::vector<std::string> key_ids() const;

    KmsStore(KmsStore&& other) noexcept;
    KmsStore& operator=(KmsStore&& other) noexcept;
    KmsStore(const KmsStore&) = delete;
    KmsStore& operator=(const KmsStore&) = delete;

private:
    struct Entry {
        std::vector<Digit> digits;
        bool consumed_a = false;
        bool consumed_b = false;
    };

    void persist_flags_locked() const;

    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
    std::filesystem::path directory_;
};

HexKeyStream kms_get(KmsStore& store, const std::string& key_id, Party party);

}  // namespace qkdtime::keystream
