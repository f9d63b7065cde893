#pragma once

#include <cstddef>
#include <cstdint>

namespace mana {

/// Fingerprints the discrete choices (ReLU on/off patterns, argmax picks)
/// made by ops on this thread while the probe is alive. Two forward passes
/// with equal signatures ran through the same piecewise-smooth branch.
class StructureProbe {
public:
    StructureProbe() : previous_(current_) { current_ = this; }
    ~StructureProbe() { current_ = previous_; }
    StructureProbe(const StructureProbe&) = delete;
    StructureProbe& operator=(const StructureProbe&) = delete;

    std::uint64_t signature() const noexcept { return hash_; }

    void mix(std::uint64_t value) noexcept
    {
        hash_ ^= value + 0x9e3779b97f4a7c15ULL + (hash_ << 6) + (hash_ >> 2);
    }

    static StructureProbe* active() noexcept { return current_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
    StructureProbe* previous_;
    static inline thread_local StructureProbe* current_ = nullptr;
};

/// Allocation accounting for attention correlation buffers. Counts scalars,
/// not bytes, so the figures are independent of the element type.
class CorrelationMeter {
public:
    static void reset() noexcept
    {
        live_ = 0;
        peak_ = 0;
        total_ = 0;
    }
    static void acquire(std::size_t n) noexcept
    {
        live_ += n;
        total_ += n;
        if (live_ > peak_) peak_ = live_;
    }
    static void release(std::size_t n) noexcept { live_ -= n; }

    static std::size_t live() noexcept { return live_; }
    static std::size_t peak() noexcept { return peak_; }
    static std::size_t total() noexcept { return total_; }

private:
    static inline thread_local std::size_t live_ = 0;
    static inline thread_local std::size_t peak_ = 0;
    static inline thread_local std::size_t total_ = 0;
};

/// RAII registration of a correlation buffer with CorrelationMeter.
class CorrelationLease {
public:
    explicit CorrelationLease(std::size_t n) noexcept : n_(n) { CorrelationMeter::acquire(n_); }
    ~CorrelationLease() { CorrelationMeter::release(n_); }
    CorrelationLease(const CorrelationLease&) = delete;
    CorrelationLease& operator=(const CorrelationLease&) = delete;

private:
    std::size_t n_;
};

} // namespace mana
