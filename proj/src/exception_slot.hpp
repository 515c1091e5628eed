#pragma once

#include <exception>

namespace xbarsec::detail {

// Exceptions must not escape an OpenMP region. Loop bodies run through
// guard(); the first exception is kept and rethrown after the region.
class ExceptionSlot {
 public:
  template <typename Fn>
  void guard(Fn&& fn) noexcept {
    try {
      fn();
    } catch (...) {
#pragma omp critical(xbarsec_exception_slot)
      if (!first_) first_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (first_) std::rethrow_exception(first_);
  }

 private:
  std::exception_ptr first_;
};

}  // namespace xbarsec::detail
