#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "resflow/date.hpp"
#include "resflow/errors.hpp"

namespace resflow {

using Mat = Eigen::MatrixXd;

// Hourly admission grid: slots_per_day one-hour bins starting at first_hour.
struct SlotGrid {
  int slots_per_day = 14;
  int first_hour = 8;
  int last_hour_exclusive = 22;

  void validate() const;
  bool operator==(const SlotGrid&) const = default;
};

// Maps a clock hour to its slot index; hours outside the grid are rejected.
int slot_of_hour(int hour, const SlotGrid& grid);

// Calendar features for one (date, slot), each normalized into [0,1]:
// slot/(T-1), weekday/6 with Monday=0, month/12, day-of-month/32.
struct CalendarMark {
  double hour_norm = 0.0;
  double weekday_norm = 0.0;
  double month_norm = 0.0;
  double day_norm = 0.0;
};

CalendarMark build_mark(const Date& date, int slot, const SlotGrid& grid);

// Dense per-(day, slot, channel) count grid. Time is row-major over
// (day, slot): row = day * slots_per_day + slot. Carries both entrance
// counts and reservation aggregates, depending on role.
struct SlotSeries {
  Date start_date;
  int num_days = 0;
  SlotGrid grid;
  std::vector<std::string> channels;
  Mat values;  // (num_days * slots_per_day) x channels.size()

  int time_len() const { return num_days * grid.slots_per_day; }
  int num_channels() const { return static_cast<int>(channels.size()); }

  double at(int day, int slot, int ch) const {
    return values(day * grid.slots_per_day + slot, ch);
  }
  double& at(int day, int slot, int ch) {
    return values(day * grid.slots_per_day + slot, ch);
  }

  Date date_of_day(int day) const { return start_date.add_days(day); }
  // Day index of `d`, or -1 when outside the span.
  int day_index(const Date& d) const {
    const int i = d.days_since(start_date);
    return (i >= 0 && i < num_days) ? i : -1;
  }

  double daily_total(int day) const;
  double daily_total(int day, int ch) const;

  // Collapses all channels into a single summed channel.
  SlotSeries sum_channels(const std::string& label = "Total") const;

  static SlotSeries zeros(const Date& start, int num_days, const SlotGrid& grid,
                          std::vector<std::string> channels);

  // Checks shape consistency and that every value is finite and >= 0.
  void validate() const;
};

}  // namespace resflow
