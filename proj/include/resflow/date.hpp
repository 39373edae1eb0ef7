#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

#include "resflow/errors.hpp"

namespace resflow {

// Calendar date backed by std::chrono::sys_days. Leap years and weekday
// arithmetic come from the standard proleptic Gregorian calendar.
class Date {
 public:
  Date() = default;  // 1970-01-01

  Date(int year, unsigned month, unsigned day);

  // Parses strict ISO "YYYY-MM-DD"; throws DateError otherwise.
  static Date parse(std::string_view iso);

  int year() const;
  unsigned month() const;  // 1..12
  unsigned day() const;    // 1..31

  // Monday = 0 ... Sunday = 6.
  int weekday_mon0() const;
  bool is_weekend() const { return weekday_mon0() >= 5; }

  std::string iso() const;

  Date add_days(int n) const;
  // Signed day difference (*this - other).
  int days_since(const Date& other) const;

  auto operator<=>(const Date&) const = default;

 private:
  explicit Date(std::chrono::sys_days d) : days_(d) {}
  std::chrono::sys_days days_{};
};

}  // namespace resflow
