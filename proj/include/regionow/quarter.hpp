#pragma once

#include <compare>
#include <string>

#include "errors.hpp"

namespace regionow {

/// Calendar quarter. Ordered lexicographically by (year, quarter).
class QuarterIndex {
 public:
  constexpr QuarterIndex() = default;
  constexpr QuarterIndex(int year, int quarter) : year_(year), quarter_(quarter) {
    if (quarter < 1 || quarter > 4) throw DomainError("quarter must be in 1..4, got " + std::to_string(quarter));
  }

  static constexpr QuarterIndex from_ordinal(long ordinal) {
    long y = ordinal >= 0 ? ordinal / 4 : -((-ordinal + 3) / 4);
    return QuarterIndex(static_cast<int>(y), static_cast<int>(ordinal - 4 * y) + 1);
  }

  constexpr int year() const noexcept { return year_; }
  constexpr int quarter() const noexcept { return quarter_; }

  /// Quarters since year 0 Q1; differences give quarter distances.
  constexpr long ordinal() const noexcept { return 4L * year_ + (quarter_ - 1); }

  constexpr QuarterIndex operator+(long n) const { return from_ordinal(ordinal() + n); }
  constexpr QuarterIndex operator-(long n) const { return from_ordinal(ordinal() - n); }
  constexpr long operator-(const QuarterIndex& o) const noexcept { return ordinal() - o.ordinal(); }
  constexpr QuarterIndex& operator++() { return *this = *this + 1; }

  constexpr auto operator<=>(const QuarterIndex&) const = default;

  std::string str() const { return std::to_string(year_) + "Q" + std::to_string(quarter_); }

 private:
  int year_ = 0;
  int quarter_ = 1;
};

/// Closed range of quarters [first, last].
struct QuarterRange {
  QuarterIndex first;
  QuarterIndex last;

  long size() const noexcept { return last - first + 1; }
  bool contains(const QuarterIndex& q) const noexcept { return first <= q && q <= last; }
  bool contains_year(int year) const noexcept {
    return contains(QuarterIndex(year, 1)) && contains(QuarterIndex(year, 4));
  }
  /// Zero-based position of q inside the range.
  long offset(const QuarterIndex& q) const noexcept { return q - first; }
  QuarterIndex at(long i) const { return first + i; }
};

}  // namespace regionow
