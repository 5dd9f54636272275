#include "qkdtime/keystream.hpp"

#include "qkdtime/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

namespace qkdtime::keystream {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

constexpr char kHexDigits[] = "0123456789ABCDEF";

void check_key_id(const std::string& key_id) {
    const bool ok = !key_id.empty() && std::all_of(key_id.begin(), key_id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
    if (!ok || key_id == "." || key_id == "..") {
        throw KmsError(fmt::format("invalid key id '{}'", key_id));
    }
}

const char* kFlagsFile = "consumed.txt";

}  // namespace

HexKeyStream::HexKeyStream(std::string key_id, std::vector<Digit> digits)
    : key_id_(std::move(key_id)), digits_(std::move(digits)) {
    for (std::size_t i = 0; i < digits_.size(); ++i) {
        if (digits_[i] > 15) {
            throw ContractViolation(fmt::format("digit {} at index {} is not in [0,15]", digits_[i], i));
        }
    }
}

HexKeyStream HexKeyStream::from_hex(std::string key_id, std::string_view text) {
    std::vector<Digit> digits;
    digits.reserve(text.size());
    for (std::size_t offset = 0; offset < text.size(); ++offset) {
        const char c = text[offset];
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        const int value = hex_value(c);
        if (value < 0) {
            throw ParseError(fmt::format("non-hex character at byte offset {}", offset), offset);
        }
        digits.push_back(static_cast<Digit>(value));
    }
    if (digits.empty()) throw ParseError("key material is empty", 0);
    return HexKeyStream(std::move(key_id), std::move(digits));
}

void HexKeyStream::require(std::size_t count) const {
    if (count > remaining()) {
        throw KeyExhaustedError(fmt::format("key '{}' exhausted: need {} digits, {} remain",
                                            key_id_, count, remaining()));
    }
}

std::vector<DigitPair> HexKeyStream::take_pairs(std::size_t n) {
    require(2 * n);
    std::vector<DigitPair> pairs(n);
    for (auto& pair : pairs) {
        pair = {digits_[cursor_], digits_[cursor_ + 1]};
        cursor_ += 2;
    }
    return pairs;
}

std::vector<DigitTriplet> HexKeyStream::take_triplets(std::size_t n) {
    require(3 * n);
    std::vector<DigitTriplet> triplets(n);
    for (auto& triplet : triplets) {
        triplet = {digits_[cursor_], digits_[cursor_ + 1], digits_[cursor_ + 2]};
        cursor_ += 3;
    }
    return triplets;
}

std::string HexKeyStream::to_hex() const {
    std::string out;
    out.reserve(digits_.size());
    for (const Digit d : digits_) out.push_back(kHexDigits[d]);
    return out;
}

HexKeyStream load_keys(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open key file '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return HexKeyStream::from_hex(path.stem().string(), buffer.str());
}

void save_keys(const HexKeyStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write key file '{}'", path.string()));
    const std::string hex = stream.to_hex();
    for (std::size_t i = 0; i < hex.size(); i += 64) {
        out << hex.substr(i, 64) << '\n';
    }
    if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

HexKeyStream mock_qkd_source(std::uint64_t seed, std::size_t n_digits, std::string key_id) {
    if (n_digits == 0) throw ConfigError("mock key source needs at least one digit");
    std::mt19937_64 engine(seed);
    std::vector<Digit> digits(n_digits);
    for (auto& d : digits) d = static_cast<Digit>(engine() >> 60);
    if (key_id.empty()) key_id = fmt::format("mock-{}", seed);
    return HexKeyStream(std::move(key_id), std::move(digits));
}

std::string_view party_name(Party party) noexcept {
    return party == Party::A ? "A" : "B";
}

KmsStore::KmsStore(KmsStore&& other) noexcept {
    std::lock_guard lock(other.mutex_);
    entries_ = std::move(other.entries_);
    directory_ = std::move(other.directory_);
}

KmsStore& KmsStore::operator=(KmsStore&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        entries_ = std::move(other.entries_);
        directory_ = std::move(other.directory_);
    }
    return *this;
}

KmsStore KmsStore::open(const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError(fmt::format("cannot create KMS directory '{}': {}", directory.string(), ec.message()));

    KmsStore store;
    store.directory_ = directory;
    for (const auto& item : std::filesystem::directory_iterator(directory)) {
        if (!item.is_regular_file() || item.path().extension() != ".hex") continue;
        HexKeyStream key = load_keys(item.path());
        store.entries_[key.key_id()].digits = key.digits();
    }

    const auto flags_path = directory / kFlagsFile;
    if (std::filesystem::exists(flags_path)) {
        std::ifstream in(flags_path);
        if (!in) throw IoError(fmt::format("cannot read '{}'", flags_path.string()));
        std::string key_id, party;
        while (in >> key_id >> party) {
            auto it = store.entries_.find(key_id);
            if (it == store.entries_.end()) continue;
            if (party == "A") it->second.consumed_a = true;
            else if (party == "B") it->second.consumed_b = true;
            else throw IoError(fmt::format("bad party '{}' in '{}'", party, flags_path.string()));
        }
    }
    return store;
}

void KmsStore::deposit(const HexKeyStream& stream) {
    check_key_id(stream.key_id());
    std::lock_guard lock(mutex_);
    if (entries_.contains(stream.key_id())) {
        throw KmsError(fmt::format("key '{}' already in store", stream.key_id()));
    }
    if (!directory_.empty()) save_keys(stream, directory_ / (stream.key_id() + ".hex"));
    entries_[stream.key_id()].digits = stream.digits();
}

HexKeyStream KmsStore::get(const std::string& key_id, Party party) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key_id);
    if (it == entries_.end()) throw KmsError(fmt::format("key '{}' not found", key_id));
    bool& flag = party == Party::A ? it->second.consumed_a : it->second.consumed_b;
    if (flag) {
        throw KmsError(fmt::format("key '{}' already consumed by party {}", key_id, party_name(party)));
    }
    flag = true;
    persist_flags_locked();
    return HexKeyStream(key_id, it->second.digits);
}

bool KmsStore::contains(const std::string& key_id) const {
    std::lock_guard lock(mutex_);
    return entries_.contains(key_id);
}

bool KmsStore::consumed(const std::string& key_id, Party party) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key_id);
    if (it == entries_.end()) return false;
    return party == Party::A ? it->second.consumed_a : it->second.consumed_b;
}

std::vector<std::string> KmsStore::key_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, entry] : entries_) ids.push_back(id);
    return ids;
}

void KmsStore::persist_flags_locked() const {
    if (directory_.empty()) return;
    const auto path = directory_ / kFlagsFile;
    const auto tmp = directory_ / (std::string(kFlagsFile) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
        for (const auto& [id, entry] : entries_) {
            if (entry.consumed_a) out << id << " A\n";
            if (entry.consumed_b) out << id << " B\n";
        }
        if (!out) throw IoError(fmt::format("write failed for '{}'", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot replace '{}': {}", path.string(), ec.message()));
}

HexKeyStream kms_get(KmsStore& store, const std::string& key_id, Party party) {
    return store.get(key_id, party);
}

}  // namespace qkdtime::keystream
