#include "mgsddp/errors.hpp"
#include "mgsddp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mgsddp {

namespace {

constexpr double kWindCapacity = 135.0;
constexpr double kPvCapacity = 86.0;

/// Box-Muller on the portable uniform draw.
class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01(rng_);  // (0, 1]
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double uniform() { return uniform01(rng_); }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double wind_power(double speed) {
  constexpr double cut_in = 3.0, rated = 12.0, cut_out = 25.0;
  if (speed < cut_in || speed >= cut_out) return 0.0;
  if (speed >= rated) return kWindCapacity;
  const double a = speed * speed * speed - cut_in * cut_in * cut_in;
  return kWindCapacity * a / (rated * rated * rated - cut_in * cut_in * cut_in);
}

}  // namespace

TimeSeriesSet synthetic_timeseries(int days, std::uint64_t seed, TimePoint start) {
  if (days < 1) throw ValidationError("synthetic data: days must be positive");
  const int n = days * 24;
  TimeSeriesSet out;
  out.wind.resize(n);
  out.pv.resize(n);
  out.demand.resize(n);
  Normal z(seed);
  double wind_state = 0.0, load_state = 0.0, clear = 0.7;
  for (int i = 0; i < n; ++i) {
    out.timestamps.push_back(start + std::chrono::hours(i));
    const int day = i / 24;
    const double hour = i % 24;
    // Season: phase 0 is midwinter, pi is midsummer.
    const double phase = 2.0 * std::numbers::pi * (day + 0.5) / days;
    const double winter = 0.5 * (1.0 + std::cos(phase));

    wind_state = 0.96 * wind_state + std::sqrt(1.0 - 0.96 * 0.96) * z();
    const double speed = std::max(0.0, 4.6 + 1.6 * winter + 2.6 * wind_state);
    out.wind[i] = wind_power(speed);

    if (i % 24 == 0) clear = std::clamp(0.75 * clear + 0.25 * (0.25 + 0.75 * z.uniform()), 0.1, 1.0);
    const double daylight = 8.0 + 10.0 * (1.0 - winter);
    const double sunrise = 12.5 - daylight / 2.0;
    const double x = (hour + 0.5 - sunrise) / daylight;
    const double shape = x > 0.0 && x < 1.0 ? std::sin(std::numbers::pi * x) : 0.0;
    out.pv[i] = kPvCapacity * (0.35 + 0.45 * (1.0 - winter)) * clear * shape;

    load_state = 0.9 * load_state + std::sqrt(1.0 - 0.81) * z();
    const double morning = std::exp(-0.5 * std::pow((hour - 8.0) / 1.8, 2));
    const double evening = std::exp(-0.5 * std::pow((hour - 18.5) / 2.2, 2));
    const double base = 17.0 + 15.0 * winter;
    out.demand[i] = std::max(1.0, base * (0.75 + 0.35 * morning + 0.5 * evening) + 2.5 * load_state);
  }
  return out;
}

ForecastArchive synthetic_forecasts(const TimeSeriesSet& data, int horizon, int interval,
                                    std::uint64_t seed) {
  if (horizon < 1 || interval < 1) throw ValidationError("synthetic forecasts: horizon and interval must be positive");
  ForecastArchive archive;
  Normal z(seed);
  constexpr double z80 = 0.8416212335729143;  // standard normal 0.8 quantile
  const double caps[3] = {kWindCapacity, kPvCapacity, std::numeric_limits<double>::infinity()};
  for (Eigen::Index s = 0; s + horizon <= data.size(); s += interval) {
    ForecastQuantiles q;
    q.start = data.timestamps[s];
    for (Variable v : kVariables) {
      const int vi = static_cast<int>(v);
      const Eigen::VectorXd& truth = v == Variable::Wind ? data.wind : v == Variable::Pv ? data.pv : data.demand;
      Eigen::MatrixXd& m = q.at(v);
      m.resize(3, horizon);
      double err = 0.0;
      for (int l = 0; l < horizon; ++l) {
        const double actual = truth[s + l];
        const double growth = 0.35 + 0.65 * std::min(1.0, l / 24.0);
        double sigma = 0.0;
        switch (v) {
          case Variable::Wind: sigma = 20.0 * growth; break;
          case Variable::Pv: sigma = actual > 0.0 ? (0.3 * actual + 2.0) * growth : 0.0; break;
          case Variable::Demand: sigma = 3.0 * growth; break;
        }
        err = 0.8 * err + 0.6 * z();
        const double median = std::clamp(actual + sigma * err, 0.0, caps[vi]);
        m(0, l) = std::clamp(median - z80 * sigma, 0.0, caps[vi]);
        m(1, l) = median;
        m(2, l) = std::clamp(median + z80 * sigma, 0.0, caps[vi]);
      }
    }
    archive.issues.push_back(std::move(q));
  }
  return archive;
}

}  // namespace mgsddp
