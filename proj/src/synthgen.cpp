#include "resflow/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "resflow/rng.hpp"

namespace resflow {

namespace {

constexpr double kSurgeFraction = 0.5;   // event-day bookings arriving in the early burst
constexpr int kSurgeLeadMin = 5;         // burst lead-time window, days
constexpr int kSurgeLeadMax = 10;
constexpr double kRainCancelBoost = 1.5; // late-cancellation volume on rain days,
                                         // scaled by reschedule_prob so that
                                         // reschedule_prob = 0 emits no negatives

// Round to integer, keeping the expectation: floor + Bernoulli(frac).
std::int64_t stochastic_round(double x, Rng& rng) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  std::int64_t n = static_cast<std::int64_t>(fl);
  if (frac > 1e-12 && rng.bernoulli(frac)) ++n;
  return n;
}

}  // namespace

std::vector<ShockSpec> GeneratorConfig::default_shocks() {
  return {
      {Date(2025, 5, 14), 0.70, ShockKind::rain},
      {Date(2025, 6, 18), 0.65, ShockKind::rain},
      {Date(2025, 7, 5), 1.60, ShockKind::special_event},
      {Date(2025, 8, 12), 0.75, ShockKind::rain},
      {Date(2025, 8, 30), 1.50, ShockKind::special_event},
  };
}

std::vector<double> GeneratorConfig::default_intraday_profile() {
  // Hours 08..21: morning ramp, midday peak, evening taper.
  const double raw[] = {2, 4, 7, 9, 10, 10, 9, 8, 7, 6, 5, 4, 3, 2};
  double sum = 0.0;
  for (double w : raw) sum += w;
  std::vector<double> p;
  p.reserve(14);
  for (double w : raw) p.push_back(w / sum);
  return p;
}

std::optional<ShockSpec> GeneratorConfig::shock_on(const Date& d) const {
  for (const auto& s : shock_calendar) {
    if (s.date == d) return s;
  }
  return std::nullopt;
}

void GeneratorConfig::validate() const {
  grid.validate();
  if (num_days <= 0) throw ConfigError("generator: num_days must be positive");
  if (gates.empty()) throw ConfigError("generator: at least one gate required");
  if (base_daily_mean.size() != gates.size()) {
    throw ConfigError("generator: base_daily_mean must list one value per gate");
  }
  for (double b : base_daily_mean) {
    if (!(b > 0.0)) throw ConfigError("generator: base_daily_mean must be > 0");
  }
  if (!(weekend_multiplier > 0.0)) throw ConfigError("generator: weekend_multiplier must be > 0");
  if (static_cast<int>(intraday_profile.size()) != grid.slots_per_day) {
    throw ConfigError("generator: intraday_profile must have slots_per_day entries");
  }
  double psum = 0.0;
  for (double w : intraday_profile) {
    if (w < 0.0) throw ConfigError("generator: intraday_profile weights must be >= 0");
    psum += w;
  }
  if (std::abs(psum - 1.0) > 1e-9) {
    throw ConfigError("generator: intraday_profile must sum to 1");
  }
  if (!(reservation_rate > 0.0 && reservation_rate <= 1.0)) {
    throw ConfigError("generator: reservation_rate must be in (0, 1]");
  }
  if (reschedule_prob < 0.0 || reschedule_prob >= 1.0) {
    throw ConfigError("generator: reschedule_prob must be in [0, 1)");
  }
  if (noshow_prob < 0.0 || noshow_prob >= 1.0) {
    throw ConfigError("generator: noshow_prob must be in [0, 1)");
  }
  if (!(lead_time_mean_days > 0.0)) {
    throw ConfigError("generator: lead_time_mean_days must be > 0");
  }
  if (noise_cv < 0.0) throw ConfigError("generator: noise_cv must be >= 0");
  for (const auto& s : shock_calendar) {
    if (s.multiplier < 0.0) throw ConfigError("generator: shock multiplier must be >= 0");
  }
}

SlotSeries generate_attendance(const GeneratorConfig& config) {
  config.validate();
  const int T = config.grid.slots_per_day;
  const int G = static_cast<int>(config.gates.size());
  SlotSeries series = SlotSeries::zeros(config.start_date, config.num_days,
                                        config.grid, config.gates);

  Rng rng(config.seed);
  // Lognormal day factor with mean 1 and the requested coefficient of variation.
  const double sigma2 = std::log1p(config.noise_cv * config.noise_cv);
  const double sigma = std::sqrt(sigma2);

  for (int day = 0; day < config.num_days; ++day) {
    const Date date = config.start_date.add_days(day);
    const auto shock = config.shock_on(date);
    const double shock_mult = shock ? shock->multiplier : 1.0;
    const double trend = 1.0 + config.trend_slope * day;
    if (trend < 0.0) {
      throw ConfigError("generator: trend drives expected attendance negative on day " +
                        date.iso());
    }
    for (int g = 0; g < G; ++g) {
      double lambda = config.base_daily_mean[g] * trend * shock_mult;
      if (date.is_weekend()) lambda *= config.weekend_multiplier;
      if (config.noise_cv > 0.0) lambda *= rng.lognormal(-0.5 * sigma2, sigma);
      if (!std::isfinite(lambda) || lambda < 0.0) {
        throw ConfigError("generator: expected attendance overflow/negative on " + date.iso());
      }
      const std::int64_t total = stochastic_round(lambda, rng);

      // Split the daily total over slots, preserving the total exactly:
      // systematic rounding of the cumulative profile with one uniform offset.
      const double u0 = rng.uniform();
      double cum = 0.0;
      std::int64_t prev = 0;
      for (int slot = 0; slot < T; ++slot) {
        cum += config.intraday_profile[slot] * static_cast<double>(total);
        std::int64_t upto =
            static_cast<std::int64_t>(std::floor(std::min(cum + u0, static_cast<double>(total))));
        upto = std::clamp<std::int64_t>(upto, prev, total);
        if (slot == T - 1) upto = total;
        series.at(day, slot, g) = static_cast<double>(upto - prev);
        prev = upto;
      }
    }
  }
  series.validate();
  return series;
}

ReservationLog generate_reservations(const SlotSeries& attendance,
                                     const GeneratorConfig& config) {
  config.validate();
  if (attendance.grid != config.grid ||
      attendance.channels != config.gates) {
    throw ShapeError("generate_reservations: attendance grid/channels do not match config");
  }
  const int T = config.grid.slots_per_day;
  const int G = static_cast<int>(config.gates.size());
  const double p_lead = 1.0 / (1.0 + config.lead_time_mean_days);

  ReservationLog log;
  log.gates = config.gates;
  // Stream keyed off a distinct seed so attendance and bookings are
  // independently reproducible.
  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

  auto emit = [&log](const Date& booking, const Date& target, int slot, int gate, int delta) {
    log.events.push_back(ResEvent{booking, target, slot, gate, delta});
  };

  for (int day = 0; day < attendance.num_days; ++day) {
    const Date date = attendance.date_of_day(day);
    const auto shock = config.shock_on(date);
    const bool event_day = shock && shock->kind == ShockKind::special_event;
    const bool rain_day = shock && shock->kind == ShockKind::rain;

    for (int g = 0; g < G; ++g) {
      for (int slot = 0; slot < T; ++slot) {
        const std::int64_t n = static_cast<std::int64_t>(attendance.at(day, slot, g));

        for (std::int64_t i = 0; i < n; ++i) {
          if (!rng.bernoulli(config.reservation_rate)) continue;
          std::int64_t lead = rng.geometric(p_lead);
          if (event_day && rng.bernoulli(kSurgeFraction)) {
            // Announcement burst: bookings cluster at a fixed early window.
            lead = rng.uniform_int(kSurgeLeadMin, kSurgeLeadMax);
          }
          if (rng.bernoulli(config.reschedule_prob)) {
            // Booked a nearby later day first, then moved to the attended slot.
            lead = std::max<std::int64_t>(lead, 1);
            const Date first_booking = date.add_days(-static_cast<int>(lead));
            const Date tentative = date.add_days(static_cast<int>(rng.uniform_int(1, 3)));
            const int tentative_slot = static_cast<int>(rng.uniform_int(0, T - 1));
            const std::int64_t move_lead = rng.uniform_int(0, lead - 1);
            const Date move_day = date.add_days(-static_cast<int>(move_lead));
            emit(first_booking, tentative, tentative_slot, g, +1);
            emit(move_day, tentative, tentative_slot, g, -1);
            emit(move_day, date, slot, g, +1);
          } else {
            emit(date.add_days(-static_cast<int>(lead)), date, slot, g, +1);
          }
        }

        // Reservations that are never honored.
        if (config.noshow_prob > 0.0 && n > 0) {
          const double lam = static_cast<double>(n) * config.reservation_rate *
                             config.noshow_prob / (1.0 - config.noshow_prob);
          const std::int64_t m = rng.poisson(lam);
          for (std::int64_t i = 0; i < m; ++i) {
            const std::int64_t lead = rng.geometric(p_lead);
            emit(date.add_days(-static_cast<int>(lead)), date, slot, g, +1);
          }
        }

        // Rain days: extra bookings cancelled in the last two lead days.
        if (rain_day && n > 0 && config.reschedule_prob > 0.0) {
          const double lam =
              static_cast<double>(n) * kRainCancelBoost * config.reschedule_prob;
          const std::int64_t m = rng.poisson(lam);
          for (std::int64_t i = 0; i < m; ++i) {
            const std::int64_t lead_in = 3 + rng.geometric(p_lead);
            const std::int64_t lead_out = rng.uniform_int(1, 2);
            emit(date.add_days(-static_cast<int>(lead_in)), date, slot, g, +1);
            emit(date.add_days(-static_cast<int>(lead_out)), date, slot, g, -1);
          }
        }
      }
    }
  }
  return log;
}

SlotSeries aggregate_reservations(const ReservationLog& log, const Date& as_of,
                                  const SlotGrid& grid,
                                  std::optional<Date> span_start,
                                  std::optional<int> span_days) {
  grid.validate();
  Date start;
  int days = 0;
  if (span_start && span_days) {
    start = *span_start;
    days = *span_days;
  } else if (!log.events.empty()) {
    Date lo = log.events.front().target_date;
    Date hi = lo;
    for (const auto& e : log.events) {
      lo = std::min(lo, e.target_date);
      hi = std::max(hi, e.target_date);
    }
    start = lo;
    days = hi.days_since(lo) + 1;
  }
  SlotSeries out = SlotSeries::zeros(start, days, grid, log.gates);
  for (const auto& e : log.events) {
    if (e.booking_date > as_of) continue;
    const int day = out.day_index(e.target_date);
    if (day < 0) continue;
    if (e.slot < 0 || e.slot >= grid.slots_per_day) {
      throw RangeError("aggregate_reservations: slot out of range in log");
    }
    out.at(day, e.slot, e.gate) += e.delta;
  }
  return out;
}

}  // namespace resflow
