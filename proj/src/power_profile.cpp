#include "ssgd/power_profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ssgd/errors.hpp"
#include "ssgd/io.hpp"
#include "ssgd/rng.hpp"

namespace ssgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t grid_points(double step, double horizon) {
  if (!(step > 0.0)) throw ContractError("profile step must be positive");
  if (!(horizon >= 0.0)) throw ContractError("profile horizon must be nonnegative");
  return static_cast<std::size_t>(std::floor(horizon / step + 1e-9)) + 1;
}

}  // namespace

PowerProfile::PowerProfile(double step, std::vector<double> values, Interpolation interpolation)
    : step_(step), values_(std::move(values)), interpolation_(interpolation) {
  if (!(step_ > 0.0) || !std::isfinite(step_)) throw ContractError("profile step must be positive");
  if (values_.empty()) throw ContractError("profile needs at least one knot");
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractError("profile values must be finite and nonnegative");
    }
  }
  cumulative_.resize(values_.size());
  cumulative_[0] = 0.0;
  for (std::size_t k = 0; k + 1 < values_.size(); ++k) {
    const double area = interpolation_ == Interpolation::kLinear
                            ? 0.5 * step_ * (values_[k] + values_[k + 1])
                            : step_ * values_[k];
    cumulative_[k + 1] = cumulative_[k] + area;
  }
}

std::size_t PowerProfile::segment(double t) const {
  const std::size_t last = values_.size() - 1;
  if (t <= 0.0) return 0;
  const double q = std::floor(t / step_);
  if (q >= static_cast<double>(last)) {
    return t >= knot_time(last) ? last : last - 1;
  }
  auto k = static_cast<std::size_t>(q);
  if (t < knot_time(k) && k > 0) --k;
  if (k < last && t >= knot_time(k + 1)) ++k;
  return k;
}

double PowerProfile::slope(std::size_t k) const {
  if (interpolation_ == Interpolation::kStep || k + 1 >= values_.size()) return 0.0;
  return (values_[k + 1] - values_[k]) / step_;
}

double PowerProfile::value_in_segment(std::size_t k, double t) const {
  return values_[k] + slope(k) * (t - knot_time(k));
}

double PowerProfile::power_at(double t) const { return value_in_segment(segment(t), t); }

double PowerProfile::rest_of_segment(std::size_t k, double t) const {
  const double end = knot_time(k + 1);
  const double len = end - t;
  if (interpolation_ == Interpolation::kStep) return len * values_[k];
  return 0.5 * len * (value_in_segment(k, t) + values_[k + 1]);
}

double PowerProfile::integrate(double t0, double t1) const {
  if (!(t0 >= 0.0) || !(t1 >= t0)) {
    throw ContractError("integrate: need 0 <= t0 <= t1");
  }
  if (t0 == t1) return 0.0;
  const std::size_t last = values_.size() - 1;
  const std::size_t s0 = segment(t0);
  const std::size_t s1 = segment(t1);
  if (s0 == s1) {
    if (s0 == last || interpolation_ == Interpolation::kStep) return (t1 - t0) * values_[s0];
    return 0.5 * (t1 - t0) * (value_in_segment(s0, t0) + value_in_segment(s0, t1));
  }
  double total = rest_of_segment(s0, t0);
  total += cumulative_[s1] - cumulative_[s0 + 1];
  const double a = t1 - knot_time(s1);
  if (s1 == last || interpolation_ == Interpolation::kStep) {
    total += a * values_[s1];
  } else {
    total += 0.5 * a * (values_[s1] + value_in_segment(s1, t1));
  }
  return total;
}

std::int64_t PowerProfile::gradients_completed(double t0, double t1) const {
  return static_cast<std::int64_t>(std::floor(integrate(t0, t1)));
}

double PowerProfile::remaining_work(double t0) const {
  if (values_.back() > 0.0) return kInf;
  const std::size_t last = values_.size() - 1;
  const double end = knot_time(last);
  if (t0 >= end) return 0.0;
  return integrate(t0, end);
}

double PowerProfile::solve_in_segment(std::size_t k, double t_start, double need) const {
  const double v0 = value_in_segment(k, t_start);
  const double s = slope(k);
  double a;
  if (s == 0.0) {
    a = need / v0;
  } else {
    // v0 a + s a^2 / 2 = need, in the cancellation-free form.
    const double disc = std::max(0.0, v0 * v0 + 2.0 * s * need);
    a = 2.0 * need / (v0 + std::sqrt(disc));
  }
  if (k + 1 < values_.size()) a = std::min(a, knot_time(k + 1) - t_start);
  return std::max(a, 0.0);
}

double PowerProfile::raw_time_to_complete(double t0, double units) const {
  const std::size_t last = values_.size() - 1;
  const std::size_t s0 = segment(t0);
  if (s0 == last) {
    if (values_[last] == 0.0) return kInf;
    return t0 + units / values_[last];
  }
  const double first = rest_of_segment(s0, t0);
  if (first >= units) return t0 + solve_in_segment(s0, t0, units);

  const double need = units - first;
  const double base = cumulative_[s0 + 1];
  // First knot k > s0 + 1 whose cumulative work covers the need.
  const auto begin = cumulative_.begin() + static_cast<std::ptrdiff_t>(s0 + 1);
  const auto it = std::lower_bound(begin, cumulative_.end(), base + need);
  if (it == cumulative_.end()) {
    if (values_[last] == 0.0) return kInf;
    const double left = need - (cumulative_[last] - base);
    return knot_time(last) + std::max(left, 0.0) / values_[last];
  }
  const auto k = static_cast<std::size_t>(it - cumulative_.begin());
  const std::size_t j = k - 1;  // segment containing the crossing
  const double done = cumulative_[j] - base;
  return knot_time(j) + solve_in_segment(j, knot_time(j), std::max(need - done, 0.0));
}

double PowerProfile::time_to_complete(double t0, double units) const {
  if (!(t0 >= 0.0)) throw ContractError("time_to_complete: t0 must be nonnegative");
  if (!(units > 0.0)) throw ContractError("time_to_complete: units must be positive");
  if (remaining_work(t0) < units) return kInf;
  double r = raw_time_to_complete(t0, units);
  if (!std::isfinite(r)) return r;
  r = std::max(r, t0);
  // Round to the exact left-most double that integrate() accepts.
  for (int i = 0; i < 256 && integrate(t0, r) < units; ++i) r = std::nextafter(r, kInf);
  for (int i = 0; i < 256 && r > t0; ++i) {
    const double prev = std::nextafter(r, -kInf);
    if (prev < t0 || integrate(t0, prev) < units) break;
    r = prev;
  }
  return r;
}

PowerProfile constant_profile(double power) { return PowerProfile(1.0, {power}); }

std::vector<PowerProfile> generate_chaotic_profiles(std::size_t n, double step, double horizon,
                                                    std::uint64_t seed) {
  const std::size_t points = grid_points(step, horizon);
  std::vector<PowerProfile> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_stream(seed, i, Stream::kProfile);
    const double a = 0.5 + 0.5 * uniform01(rng);
    const double s = 2.0 * std::numbers::pi * uniform01(rng);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> v(points);
    for (std::size_t k = 0; k < points; ++k) {
      const double t = step * static_cast<double>(k);
      v[k] = std::max(std::sin(a * t + s) + noise(rng), 0.0);
    }
    out.emplace_back(step, std::move(v));
  }
  return out;
}

std::vector<PowerProfile> generate_periodic_profiles(std::size_t n, double step, double horizon,
                                                     std::uint64_t seed) {
  const std::size_t points = grid_points(step, horizon);
  std::vector<PowerProfile> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_stream(seed, i, Stream::kProfile);
    const double s = 10.5 + 0.5 * uniform01(rng);
    const double phi = 2.0 * std::numbers::pi * uniform01(rng);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> v(points);
    for (std::size_t k = 0; k < points; ++k) {
      const double t = step * static_cast<double>(k);
      v[k] = std::max(s + 3.0 * std::sin(t + phi) + noise(rng), 0.1);
    }
    out.emplace_back(step, std::move(v));
  }
  return out;
}

std::size_t idle_count(double idle_fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(idle_fraction * static_cast<double>(n) + 1e-9));
}

std::vector<PowerProfile> generate_participation_profiles(const ParticipationSchedule& schedule,
                                                          std::size_t n, double horizon) {
  const double p = schedule.idle_fraction;
  if (!(p >= 0.0) || p >= 1.0) throw ContractError("idle fraction must lie in [0, 1)");
  if (p >= 0.4 && !schedule.allow_out_of_regime) {
    throw OutOfRegimeError("idle fraction must be below 0.4 unless explicitly overridden");
  }
  if (!(schedule.speed > 0.0)) throw ContractError("participation speed must be positive");
  if (n == 0) throw ContractError("participation needs at least one worker");
  const std::size_t intervals = grid_points(schedule.interval, horizon);
  const std::size_t q = idle_count(p, n);

  std::vector<std::vector<double>> values(n, std::vector<double>(intervals, schedule.speed));
  std::vector<double> work(n, 0.0);
  std::vector<std::size_t> order(n);
  Rng rng = make_stream(schedule.seed, 0, Stream::kSchedule);

  for (std::size_t j = 0; j < intervals; ++j) {
    std::vector<std::size_t> idle;
    switch (schedule.mode) {
      case IdleMode::kFixed:
        for (std::size_t r = 0; r < q; ++r) idle.push_back(n - 1 - r);
        break;
      case IdleMode::kRoundRobin:
        for (std::size_t r = 0; r < q; ++r) idle.push_back((j * q + r) % n);
        break;
      case IdleMode::kAdversarialToFastest:
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return work[a] > work[b]; });
        idle.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q));
        break;
      case IdleMode::kRandom:
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t r = 0; r < q; ++r) {
          const auto pick = r + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - r));
          std::swap(order[r], order[std::min(pick, n - 1)]);
        }
        idle.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q));
        break;
    }
    for (std::size_t i : idle) values[i][j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) work[i] += values[i][j] * schedule.interval;
  }

  std::vector<PowerProfile> out;
  out.reserve(n);
  for (auto& v : values) out.emplace_back(schedule.interval, std::move(v), Interpolation::kStep);
  return out;
}

std::vector<PowerProfile> generate_speedup_switch_profiles(std::size_t n, double power,
                                                           double t_switch,
                                                           double fast_multiplier) {
  if (n == 0) throw ContractError("speedup switch needs at least one worker");
  if (!(t_switch > 0.0)) throw ContractError("t_switch must be positive");
  if (!(fast_multiplier >= 1.0)) throw ContractError("fast_multiplier must be >= 1");
  if (!(power > 0.0)) throw ContractError("power must be positive");
  std::vector<PowerProfile> out;
  out.reserve(n);
  out.emplace_back(t_switch, std::vector<double>{power, power * fast_multiplier},
                   Interpolation::kStep);
  for (std::size_t i = 1; i < n; ++i) out.emplace_back(t_switch, std::vector<double>{power});
  return out;
}

std::string profiles_to_csv(std::span<const PowerProfile> profiles) {
  if (profiles.empty()) throw ContractError("profiles_to_csv: no profiles");
  const double step = profiles.front().step();
  const std::size_t points = profiles.front().values().size();
  for (const auto& p : profiles) {
    if (p.step() != step || p.values().size() != points) {
      throw ContractError("profiles_to_csv: profiles must share step and length");
    }
  }
  std::string out = "t";
  for (std::size_t i = 0; i < profiles.size(); ++i) out += ",v_" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t k = 0; k < points; ++k) {
    out += format_double(step * static_cast<double>(k));
    for (const auto& p : profiles) {
      out += ',';
      out += format_double(p.values()[k]);
    }
    out += '\n';
  }
  return out;
}

std::vector<PowerProfile> profiles_from_csv(std::string_view text, Interpolation interpolation) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line != "\r") lines.push_back(line);
    start = nl + 1;
  }
  if (lines.size() < 2) throw ParseError("profile CSV needs a header and at least one row", 0);
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "t") {
    throw ParseError("profile CSV header must start with 't'", 1);
  }
  const std::size_t n = header.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (header[i + 1] != "v_" + std::to_string(i + 1)) {
      throw ParseError("unexpected column name '" + std::string(header[i + 1]) + "'", 1);
    }
  }
  std::vector<double> times;
  std::vector<std::vector<double>> values(n);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != n + 1) {
      throw ParseError("row has " + std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(n + 1),
                       static_cast<int>(r + 1));
    }
    try {
      times.push_back(parse_double(fields[0]));
      for (std::size_t i = 0; i < n; ++i) values[i].push_back(parse_double(fields[i + 1]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), static_cast<int>(r + 1));
    }
  }
  const double step = times.size() > 1 ? times[1] : 1.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] != step * static_cast<double>(k)) {
      throw ParseError("time column is not the uniform grid k * step", static_cast<int>(k + 2), "t");
    }
  }
  std::vector<PowerProfile> out;
  out.reserve(n);
  for (auto& v : values) out.emplace_back(step, std::move(v), interpolation);
  return out;
}

}  // namespace ssgd
