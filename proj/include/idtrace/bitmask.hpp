#pragma once

// Fixed-width membership mask over object indices [0, capacity).
// Storage is packed 64-bit words; the unused tail bits of the last word are
// always zero so word-wise popcount equals the element count.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace idtrace {

class Bitmask {
public:
    using word_type = std::uint64_t;
    static constexpr std::size_t kWordBits = 64;

    Bitmask() = default;
    explicit Bitmask(std::size_t capacity, bool filled = false)
        : capacity_(capacity), words_((capacity + kWordBits - 1) / kWordBits, filled ? ~word_type{0} : 0) {
        if (filled) {
            clear_tail();
        }
    }

    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::size_t word_count() const noexcept { return words_.size(); }
    [[nodiscard]] const std::vector<word_type>& words() const noexcept { return words_; }

    void set(std::size_t i) noexcept { words_[i / kWordBits] |= word_type{1} << (i % kWordBits); }
    void reset(std::size_t i) noexcept { words_[i / kWordBits] &= ~(word_type{1} << (i % kWordBits)); }
    [[nodiscard]] bool test(std::size_t i) const noexcept {
        return (words_[i / kWordBits] >> (i % kWordBits)) & word_type{1};
    }

    [[nodiscard]] std::size_t count() const noexcept {
        std::size_t n = 0;
        for (word_type w : words_) {
            n += static_cast<std::size_t>(std::popcount(w));
        }
        return n;
    }

    // popcount(this & other) without materializing the intersection.
    [[nodiscard]] std::size_t count_and(const Bitmask& other) const noexcept {
        std::size_t n = 0;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            n += static_cast<std::size_t>(std::popcount(words_[w] & other.words_[w]));
        }
        return n;
    }

    Bitmask& operator&=(const Bitmask& other) noexcept {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            words_[w] &= other.words_[w];
        }
        return *this;
    }
    Bitmask& operator|=(const Bitmask& other) noexcept {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            words_[w] |= other.words_[w];
        }
        return *this;
    }
    friend Bitmask operator&(Bitmask a, const Bitmask& b) noexcept { return a &= b; }
    friend Bitmask operator|(Bitmask a, const Bitmask& b) noexcept { return a |= b; }

    friend bool operator==(const Bitmask&, const Bitmask&) = default;

    // Calls fn(index) for every set bit in ascending order.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            word_type bits = words_[w];
            while (bits != 0) {
                const auto tz = static_cast<std::size_t>(std::countr_zero(bits));
                fn(w * kWordBits + tz);
                bits &= bits - 1;
            }
        }
    }

    [[nodiscard]] std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        out.reserve(count());
        for_each([&](std::size_t i) { out.push_back(i); });
        return out;
    }

private:
    void clear_tail() noexcept {
        const std::size_t rem = capacity_ % kWordBits;
        if (rem != 0 && !words_.empty()) {
            words_.back() &= (word_type{1} << rem) - 1;
        }
    }

    std::size_t capacity_ = 0;
    std::vector<word_type> words_;
};

}  // namespace idtrace
