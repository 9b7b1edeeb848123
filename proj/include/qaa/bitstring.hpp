#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qaa {

/// An n-bit computational basis label. Bit k (0-based) is the value of spin k+1.
class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}

    static BitString zeros(std::size_t n) { return BitString(n, false); }
    static BitString ones(std::size_t n) { return BitString(n, true); }

    /// Parses a string of '0'/'1' characters, leftmost character is spin 1.
    static BitString parse(std::string_view text)
    {
        BitString out(text.size());
        for (std::size_t k = 0; k < text.size(); ++k) {
            if (text[k] != '0' && text[k] != '1')
                throw std::invalid_argument("bit string contains non-binary character");
            out.bits_[k] = text[k] == '1' ? 1 : 0;
        }
        return out;
    }

    /// Spin k is bit k of the index.
    static BitString from_index(std::uint64_t index, std::size_t n)
    {
        BitString out(n);
        for (std::size_t k = 0; k < n; ++k)
            out.bits_[k] = static_cast<std::uint8_t>((index >> k) & 1u);
        return out;
    }

    std::uint64_t to_index() const
    {
        if (bits_.size() > 64)
            throw std::length_error("bit string too long for an integer index");
        std::uint64_t index = 0;
        for (std::size_t k = 0; k < bits_.size(); ++k)
            index |= static_cast<std::uint64_t>(bits_[k]) << k;
        return index;
    }

    std::size_t size() const noexcept { return bits_.size(); }
    bool operator[](std::size_t k) const noexcept { return bits_[k] != 0; }
    void set(std::size_t k, bool value) noexcept { bits_[k] = value ? 1 : 0; }
    void flip(std::size_t k) noexcept { bits_[k] ^= 1u; }

    BitString flipped(std::size_t k) const
    {
        BitString out = *this;
        out.flip(k);
        return out;
    }

    BitString complement() const
    {
        BitString out = *this;
        for (auto& b : out.bits_)
            b ^= 1u;
        return out;
    }

    std::size_t hamming_weight() const noexcept
    {
        std::size_t w = 0;
        for (auto b : bits_)
            w += b;
        return w;
    }

    std::size_t hamming_distance(const BitString& other) const
    {
        if (other.size() != size())
            throw std::invalid_argument("hamming distance of bit strings with different lengths");
        std::size_t d = 0;
        for (std::size_t k = 0; k < bits_.size(); ++k)
            d += bits_[k] != other.bits_[k];
        return d;
    }

    std::string to_string() const
    {
        std::string s(bits_.size(), '0');
        for (std::size_t k = 0; k < bits_.size(); ++k)
            if (bits_[k])
                s[k] = '1';
        return s;
    }

    friend bool operator==(const BitString&, const BitString&) = default;
    friend auto operator<=>(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

} // namespace qaa
