#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "resflow/timegrid.hpp"

using namespace resflow;

TEST_CASE("slot_of_hour maps the grid and rejects out-of-range hours") {
  SlotGrid grid;
  CHECK(slot_of_hour(8, grid) == 0);
  CHECK(slot_of_hour(21, grid) == 13);
  CHECK_THROWS_AS(slot_of_hour(22, grid), RangeError);
  CHECK_THROWS_AS(slot_of_hour(7, grid), RangeError);

  // Round trip over the valid range.
  for (int h = grid.first_hour; h < grid.last_hour_exclusive; ++h) {
    CHECK(grid.first_hour + slot_of_hour(h, grid) == h);
  }
}

TEST_CASE("build_mark normalizes all four calendar fields") {
  SlotGrid grid;

  SUBCASE("slot zero gives hour_norm zero") {
    const CalendarMark m = build_mark(Date(2025, 7, 1), 0, grid);
    CHECK(m.hour_norm == 0.0);
  }

  SUBCASE("2025-04-23 is a Wednesday; last slot saturates hour_norm") {
    const CalendarMark m = build_mark(Date(2025, 4, 23), 13, grid);
    CHECK(m.hour_norm == doctest::Approx(1.0));
    CHECK(m.weekday_norm == doctest::Approx(2.0 / 6.0));
    CHECK(m.month_norm == doctest::Approx(4.0 / 12.0));
    CHECK(m.day_norm == doctest::Approx(23.0 / 32.0));
  }

  SUBCASE("leap day is a valid date") {
    const CalendarMark m = build_mark(Date(2024, 2, 29), 7, grid);
    CHECK(m.day_norm == doctest::Approx(29.0 / 32.0));
    CHECK(m.month_norm == doctest::Approx(2.0 / 12.0));
  }

  SUBCASE("invalid dates are rejected") {
    CHECK_THROWS_AS(Date(2025, 2, 29), DateError);
    CHECK_THROWS_AS(Date(2025, 13, 1), DateError);
    CHECK_THROWS_AS(Date::parse("2025-4-23"), DateError);
  }

  SUBCASE("slot outside the grid is rejected") {
    CHECK_THROWS_AS(build_mark(Date(2025, 4, 23), 14, grid), RangeError);
    CHECK_THROWS_AS(build_mark(Date(2025, 4, 23), -1, grid), RangeError);
  }
}

TEST_CASE("all mark fields stay in [0,1] over a full leap-year sweep") {
  SlotGrid grid;
  Date d(2024, 1, 1);
  for (int i = 0; i < 366; ++i, d = d.add_days(1)) {
    for (int s = 0; s < grid.slots_per_day; ++s) {
      const CalendarMark m = build_mark(d, s, grid);
      for (double v : {m.hour_norm, m.weekday_norm, m.month_norm, m.day_norm}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  CHECK(d == Date(2025, 1, 1));  // 2024 really has 366 days
}

TEST_CASE("build_mark is pure: identical inputs give identical outputs") {
  SlotGrid grid;
  const CalendarMark a = build_mark(Date(2025, 8, 9), 5, grid);
  const CalendarMark b = build_mark(Date(2025, 8, 9), 5, grid);
  CHECK(a.hour_norm == b.hour_norm);
  CHECK(a.weekday_norm == b.weekday_norm);
  CHECK(a.month_norm == b.month_norm);
  CHECK(a.day_norm == b.day_norm);
}

TEST_CASE("Date arithmetic and weekday") {
  CHECK(Date(2025, 4, 23).weekday_mon0() == 2);  // Wednesday
  CHECK(Date(2025, 4, 26).is_weekend());         // Saturday
  CHECK_FALSE(Date(2025, 4, 25).is_weekend());
  CHECK(Date(2025, 4, 23).add_days(10) == Date(2025, 5, 3));
  CHECK(Date(2025, 5, 3).days_since(Date(2025, 4, 23)) == 10);
  CHECK(Date::parse("2024-02-29").iso() == "2024-02-29");
}

TEST_CASE("SlotSeries validation catches shape and sign errors") {
  SlotGrid grid;
  SlotSeries s = SlotSeries::zeros(Date(2025, 1, 1), 2, grid, {"East", "West"});
  CHECK_NOTHROW(s.validate());
  s.at(1, 3, 0) = -1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.at(1, 3, 0) = 5.0;
  s.values.conservativeResize(5, 2);
  CHECK_THROWS_AS(s.validate(), ShapeError);
}

TEST_CASE("SlotGrid invariants") {
  SlotGrid bad{14, 8, 21};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  SlotGrid tiny{1, 8, 9};
  CHECK_NOTHROW(tiny.validate());
}
