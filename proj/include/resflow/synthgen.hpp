#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resflow/timegrid.hpp"

namespace resflow {

enum class ShockKind { rain, special_event };

struct ShockSpec {
  Date date;
  double multiplier = 1.0;  // applied to that day's expected attendance
  ShockKind kind = ShockKind::rain;
};

// Configuration of the synthetic entrance/reservation process. Defaults give
// a multi-month two-gate scenario with weekly seasonality, a mild upward
// trend, day-level noise and a handful of shock days.
struct GeneratorConfig {
  Date start_date{2025, 4, 23};
  int num_days = 148;
  std::vector<std::string> gates{"East", "West"};
  std::vector<double> base_daily_mean{1200.0, 800.0};  // per gate
  double weekend_multiplier = 1.4;
  double trend_slope = 0.002;  // relative growth per day
  std::vector<ShockSpec> shock_calendar = default_shocks();
  SlotGrid grid{};
  std::vector<double> intraday_profile = default_intraday_profile();
  double reservation_rate = 0.8;   // fraction of attendees who ever reserve
  double reschedule_prob = 0.15;   // chance a booking is moved once
  double noshow_prob = 0.05;       // reservations never honored
  double lead_time_mean_days = 7.0;
  double noise_cv = 0.08;          // coefficient of variation of daily noise
  std::uint64_t seed = 3407;

  static std::vector<ShockSpec> default_shocks();
  static std::vector<double> default_intraday_profile();

  std::optional<ShockSpec> shock_on(const Date& d) const;
  void validate() const;
};

// One reservation-system update: delta bookings for (target_date, slot, gate)
// recorded on booking_date. Gate is an index into ReservationLog::gates.
struct ResEvent {
  Date booking_date;
  Date target_date;
  int slot = 0;
  int gate = 0;
  int delta = 0;
};

struct ReservationLog {
  std::vector<std::string> gates;
  std::vector<ResEvent> events;
};

// Ground-truth hourly entrance counts; deterministic under config.seed.
SlotSeries generate_attendance(const GeneratorConfig& config);

// Booking/update stream consistent with the given attendance: every attendee
// reserves with probability reservation_rate at a geometric lead time,
// reschedules with probability reschedule_prob, plus no-show bookings,
// pre-announced surges on special-event days and late cancellations on rain
// days. With reschedule_prob = 0 the log contains no negative deltas.
ReservationLog generate_reservations(const SlotSeries& attendance,
                                     const GeneratorConfig& config);

// Cumulative bookings per (target_date, slot, gate) counting only events with
// booking_date <= as_of: the reservation knowledge available at forecast
// time. Span defaults to [min, max] target date present in the log.
SlotSeries aggregate_reservations(const ReservationLog& log, const Date& as_of,
                                  const SlotGrid& grid,
                                  std::optional<Date> span_start = {},
                                  std::optional<int> span_days = {});

}  // namespace resflow
