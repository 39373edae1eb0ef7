#include "resflow/timegrid.hpp"

#include <cmath>

namespace resflow {

void SlotGrid::validate() const {
  if (slots_per_day < 1) throw ConfigError("SlotGrid: slots_per_day must be >= 1");
  if (last_hour_exclusive - first_hour != slots_per_day) {
    throw ConfigError("SlotGrid: last_hour_exclusive - first_hour must equal slots_per_day");
  }
}

int slot_of_hour(int hour, const SlotGrid& grid) {
  if (hour < grid.first_hour || hour >= grid.last_hour_exclusive) {
    throw RangeError("hour " + std::to_string(hour) + " outside grid [" +
                     std::to_string(grid.first_hour) + ", " +
                     std::to_string(grid.last_hour_exclusive) + ")");
  }
  return hour - grid.first_hour;
}

CalendarMark build_mark(const Date& date, int slot, const SlotGrid& grid) {
  if (slot < 0 || slot >= grid.slots_per_day) {
    throw RangeError("slot " + std::to_string(slot) + " outside [0, " +
                     std::to_string(grid.slots_per_day - 1) + "]");
  }
  CalendarMark m;
  m.hour_norm = grid.slots_per_day > 1
                    ? static_cast<double>(slot) / (grid.slots_per_day - 1)
                    : 0.0;
  m.weekday_norm = static_cast<double>(date.weekday_mon0()) / 6.0;
  m.month_norm = static_cast<double>(date.month()) / 12.0;
  m.day_norm = static_cast<double>(date.day()) / 32.0;
  return m;
}

double SlotSeries::daily_total(int day) const {
  double s = 0.0;
  for (int c = 0; c < num_channels(); ++c) s += daily_total(day, c);
  return s;
}

double SlotSeries::daily_total(int day, int ch) const {
  double s = 0.0;
  for (int slot = 0; slot < grid.slots_per_day; ++slot) s += at(day, slot, ch);
  return s;
}

SlotSeries SlotSeries::sum_channels(const std::string& label) const {
  SlotSeries out = zeros(start_date, num_days, grid, {label});
  out.values = values.rowwise().sum();
  return out;
}

SlotSeries SlotSeries::zeros(const Date& start, int num_days, const SlotGrid& grid,
                             std::vector<std::string> channels) {
  SlotSeries s;
  s.start_date = start;
  s.num_days = num_days;
  s.grid = grid;
  s.channels = std::move(channels);
  s.values = Mat::Zero(s.time_len(), s.num_channels());
  return s;
}

void SlotSeries::validate() const {
  grid.validate();
  if (num_days < 0) throw ValidationError("SlotSeries: negative num_days");
  if (values.rows() != time_len() || values.cols() != num_channels()) {
    throw ShapeError("SlotSeries: values shape does not match num_days x slots x channels");
  }
  for (int i = 0; i < values.rows(); ++i) {
    for (int j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("SlotSeries: value at row " + std::to_string(i) +
                              " channel " + std::to_string(j) +
                              " is negative or non-finite");
      }
    }
  }
}

}  // namespace resflow
