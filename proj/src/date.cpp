#include "resflow/date.hpp"

#include <charconv>
#include <cstdio>

namespace resflow {

namespace {

std::chrono::year_month_day to_ymd(std::chrono::sys_days d) {
  return std::chrono::year_month_day{d};
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{
      std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "invalid date %04d-%02u-%02u", year, month, day);
    throw DateError(buf);
  }
  days_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw DateError("expected ISO date YYYY-MM-DD, got '" + std::string(iso) + "'");
  }
  int y = 0;
  unsigned m = 0, d = 0;
  const char* p = iso.data();
  auto r1 = std::from_chars(p, p + 4, y);
  auto r2 = std::from_chars(p + 5, p + 7, m);
  auto r3 = std::from_chars(p + 8, p + 10, d);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} || r3.ec != std::errc{} ||
      r1.ptr != p + 4 || r2.ptr != p + 7 || r3.ptr != p + 10) {
    throw DateError("expected ISO date YYYY-MM-DD, got '" + std::string(iso) + "'");
  }
  return Date(y, m, d);
}

int Date::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

int Date::weekday_mon0() const {
  const std::chrono::weekday wd{days_};
  return static_cast<int>(wd.iso_encoding()) - 1;  // ISO: Mon=1..Sun=7
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

Date Date::add_days(int n) const { return Date(days_ + std::chrono::days{n}); }

int Date::days_since(const Date& other) const {
  return static_cast<int>((days_ - other.days_).count());
}

}  // namespace resflow
