#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <string_view>

namespace cfcnn {

/// Deliberate implementation defects that can be switched on at runtime to
/// confirm the adjoint and gradient checks detect them. Production code paths
/// consult `defect_active` at the affected spot; with `Defect::None` (the
/// default) behaviour is unchanged.
enum class Defect {
  None,
  PoolAdjointUnscaled,     // pool_avg_adjoint without the 1/r^2 factor
  CropOffByOne,            // crop reads the window one column to the right
  TangentErrorsSwapped,    // e_v and e_w exchanged in the grad R formulas
  MissingSecondOrderTerm,  // S'' term dropped from (V _| D grad_W f)*
  StrideMisapplied,        // convolve ignores the stride along columns
  GradientSignFlip,        // first-order gradients returned negated
};

namespace detail {
inline std::atomic<Defect>& defect_slot() {
  static std::atomic<Defect> slot{Defect::None};
  return slot;
}
}  // namespace detail

inline Defect active_defect() { return detail::defect_slot().load(std::memory_order_relaxed); }
inline bool defect_active(Defect d) { return active_defect() == d; }

/// Enables a defect for the lifetime of the guard.
class ScopedDefect {
 public:
  explicit ScopedDefect(Defect d) : previous_(detail::defect_slot().exchange(d)) {}
  ~ScopedDefect() { detail::defect_slot().store(previous_); }
  ScopedDefect(const ScopedDefect&) = delete;
  ScopedDefect& operator=(const ScopedDefect&) = delete;

 private:
  Defect previous_;
};

inline std::string_view defect_name(Defect d) {
  switch (d) {
    case Defect::None: return "none";
    case Defect::PoolAdjointUnscaled: return "pool-adjoint-unscaled";
    case Defect::CropOffByOne: return "crop-off-by-one";
    case Defect::TangentErrorsSwapped: return "tangent-errors-swapped";
    case Defect::MissingSecondOrderTerm: return "missing-second-order-term";
    case Defect::StrideMisapplied: return "stride-misapplied";
    case Defect::GradientSignFlip: return "gradient-sign-flip";
  }
  return "unknown";
}

inline std::optional<Defect> parse_defect(std::string_view name) {
  for (Defect d : {Defect::None, Defect::PoolAdjointUnscaled, Defect::CropOffByOne,
                   Defect::TangentErrorsSwapped, Defect::MissingSecondOrderTerm,
                   Defect::StrideMisapplied, Defect::GradientSignFlip}) {
    if (defect_name(d) == name) return d;
  }
  return std::nullopt;
}

}  // namespace cfcnn
