#pragma once

#include <cstdint>

namespace fcgaga {

/// Forward-pass operation tallies. Matmul counts multiply-adds (m*n*k);
/// elementwise and reduction count one per element touched. Pure data
/// movement (reshape, transpose, concat, broadcast, slicing) counts zero.
struct FlopCounter {
  std::uint64_t matmul = 0;
  std::uint64_t elementwise = 0;
  std::uint64_t reduction = 0;

  std::uint64_t total() const { return matmul + elementwise + reduction; }

  FlopCounter& operator+=(const FlopCounter& other) {
    matmul += other.matmul;
    elementwise += other.elementwise;
    reduction += other.reduction;
    return *this;
  }
  friend FlopCounter operator-(FlopCounter a, const FlopCounter& b) {
    a.matmul -= b.matmul;
    a.elementwise -= b.elementwise;
    a.reduction -= b.reduction;
    return a;
  }
  friend bool operator==(const FlopCounter&, const FlopCounter&) = default;
};

/// Per-thread running counter. Only ever grows; take snapshots and diff.
FlopCounter& flop_counter();

}  // namespace fcgaga
