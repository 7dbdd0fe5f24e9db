#pragma once

#include <array>
#include <cstdint>

namespace walkdiff {

/// Counter-based random stream (Philox4x32-10). The triple
/// (seed, stream_id, counter) fully determines every future draw, so paths can
/// be generated on any thread in any order and still reproduce bit for bit.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t next_u64() {
    const std::uint64_t block = counter_ >> 1;
    if (cached_block_ != block) {
      buffer_ = philox(block);
      cached_block_ = block;
    }
    const unsigned half = static_cast<unsigned>(counter_ & 1u);
    ++counter_;
    return (static_cast<std::uint64_t>(buffer_[2 * half]) << 32) | buffer_[2 * half + 1];
  }

  /// Uniform draw in the open interval (0,1) with 53 random bits.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal draw by inversion (one uniform per draw).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  /// Repositions the stream; draws after this equal those of a fresh stream
  /// advanced `counter` times.
  void seek(std::uint64_t counter) { counter_ = counter; }

 private:
  std::array<std::uint32_t, 4> philox(std::uint64_t block) const;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::array<std::uint32_t, 4> buffer_{};
};

}  // namespace walkdiff
