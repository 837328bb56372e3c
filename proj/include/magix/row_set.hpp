#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace magix {

/// Fixed-size set of row indices backed by 64-bit words. Cover computations
/// reduce to word-wise AND/OR plus popcount.
class RowSet {
public:
    RowSet() = default;
    explicit RowSet(std::size_t size, bool full = false)
        : size_(size), words_((size + 63) / 64, full ? ~std::uint64_t{0} : 0) {
        if (full) trim();
    }

    std::size_t size() const noexcept { return size_; }

    bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
    void reset(std::size_t i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

    std::size_t count() const noexcept {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }
    bool empty() const noexcept {
        for (auto w : words_)
            if (w) return false;
        return true;
    }

    RowSet& operator&=(const RowSet& o) noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }
    RowSet& operator|=(const RowSet& o) noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    /// Removes every member of `o`.
    RowSet& subtract(const RowSet& o) noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
        return *this;
    }

    friend RowSet operator&(RowSet a, const RowSet& b) noexcept { return a &= b; }
    friend RowSet operator|(RowSet a, const RowSet& b) noexcept { return a |= b; }
    friend bool operator==(const RowSet&, const RowSet&) = default;

    std::size_t intersection_count(const RowSet& o) const noexcept {
        std::size_t c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            c += static_cast<std::size_t>(std::popcount(words_[i] & o.words_[i]));
        return c;
    }
    std::size_t union_count(const RowSet& o) const noexcept {
        std::size_t c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            c += static_cast<std::size_t>(std::popcount(words_[i] | o.words_[i]));
        return c;
    }
    bool is_subset_of(const RowSet& o) const noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    /// |A ∩ B| / |A ∪ B|; two empty sets are identical (1.0).
    double jaccard(const RowSet& o) const noexcept {
        const auto u = union_count(o);
        return u == 0 ? 1.0 : static_cast<double>(intersection_count(o)) / static_cast<double>(u);
    }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        out.reserve(count());
        for (std::size_t w = 0; w < words_.size(); ++w) {
            auto bits = words_[w];
            while (bits) {
                out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
                bits &= bits - 1;
            }
        }
        return out;
    }

private:
    void trim() noexcept {
        if (size_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace magix
