#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "gbpfusion/forecast/bus_forecasts.hpp"
#include "gbpfusion/fusion/factors.hpp"
#include "gbpfusion/power/case_file.hpp"
#include "gbpfusion/scenario/csv_io.hpp"
#include "gbpfusion/scenario/events.hpp"
#include "test_helpers.hpp"

using namespace gbpfusion;
using namespace gbpfusion::scenario;
using testing_support::source_path;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const power::Network& case14() {
  static const power::Network net(power::parse_case_file(slurp(source_path("data/case14.m"))));
  return net;
}

struct Horizon {
  WeatherSeries weather;
  NationalSeries national;
  ProfileSet profiles;
};

const Horizon& horizon() {
  static const Horizon h = [] {
    Horizon out;
    const auto ts = hourly_range(parse_timestamp("2019-06-03T00:00Z"), 1176);
    out.weather = generate_weather(ts, 42);
    out.national = generate_national_series(out.weather, 42);
    out.profiles = generate_profiles(case14().model, out.national, fusion::default_load_buses(), {1008, 168});
    return out;
  }();
  return h;
}

const HourWindow kWeek{1008, 168};

}  // namespace

TEST_CASE("synthetic national series", "[scenario]") {
  const auto& h = horizon();
  CHECK(h.national.load.minCoeff() > 0.0);
  CHECK(h.national.solar.minCoeff() >= 0.0);
  CHECK(h.national.solar.maxCoeff() > 10.0);
  for (std::size_t i = 0; i < h.weather.size(); ++i) {
    const auto r = static_cast<Index>(i);
    if (h.weather.dni(r) == 0.0 && h.weather.dhi(r) == 0.0) CHECK(h.national.solar(r) == 0.0);
  }
  // Same seed, same series.
  const auto again = generate_national_series(generate_weather(h.weather.timestamps, 42), 42);
  CHECK(again.load == h.national.load);
  CHECK(again.solar == h.national.solar);
}

TEST_CASE("profiles anchor on the validation-week peak", "[scenario]") {
  const auto& p = horizon().profiles;
  const auto& model = case14().model;
  REQUIRE(p.per_bus_demand.rows() == 1176);
  REQUIRE(p.per_bus_demand.cols() == 10);
  CHECK(p.peak_index >= 1008);
  CHECK(p.per_bus_demand.minCoeff() >= 0.0);
  CHECK(p.per_bus_solar.minCoeff() >= 0.0);
  const Matrix net = p.per_bus_net();
  const auto peak = static_cast<Index>(p.peak_index);
  for (Index k = 0; k < 10; ++k) {
    const double pd = model.buses[model.index_of(p.load_buses[static_cast<std::size_t>(k)])].pd;
    CHECK(net(peak, k) == Catch::Approx(pd).epsilon(1e-14));
  }
}

TEST_CASE("profile examples", "[scenario]") {
  const auto& model = case14().model;
  NationalSeries s;
  s.timestamps = hourly_range(parse_timestamp("2019-06-03T00:00Z"), 3);
  s.load = testing_support::vec({50.0, 100.0, 80.0});
  s.solar = testing_support::vec({0.0, 0.0, 30.0});
  const ProfileSet p = generate_profiles(model, s, fusion::default_load_buses());
  CHECK(p.peak_index == 1);

  SECTION("peak hour with zero solar gives the case loads") {
    for (Index k = 0; k < 10; ++k) {
      const double pd = model.buses[model.index_of(p.load_buses[static_cast<std::size_t>(k)])].pd;
      CHECK(p.per_bus_demand(1, k) == pd);
      CHECK(p.per_bus_solar(1, k) == 0.0);
    }
  }
  SECTION("night hour: demand equals net") {
    CHECK((p.per_bus_demand.row(0) - p.per_bus_net().row(0)).norm() == 0.0);
  }
  SECTION("solar split equally over ten buses") {
    double total_pd = 0.0;
    for (int b : p.load_buses) total_pd += model.buses[model.index_of(b)].pd;
    const double national_pu = 30.0 / 100.0 * total_pd;
    CHECK(p.per_bus_solar.row(2).sum() == Catch::Approx(national_pu).epsilon(1e-14));
    for (Index k = 0; k < 10; ++k) CHECK(p.per_bus_solar(2, k) == Catch::Approx(national_pu / 10.0).epsilon(1e-14));
  }
  SECTION("errors") {
    NationalSeries zero = s;
    zero.load.setZero();
    CHECK_THROWS_AS(generate_profiles(model, zero, fusion::default_load_buses()), ConfigError);
    NationalSeries gap = s;
    gap.timestamps[2] += std::chrono::hours{1};
    CHECK_THROWS_AS(generate_profiles(model, gap, fusion::default_load_buses()), ConfigError);
    CHECK_THROWS_AS(generate_profiles(model, s, {3, 99}), ConfigError);
  }
}

TEST_CASE("measurement simulation", "[scenario]") {
  const auto& net = case14();
  const auto& p = horizon().profiles;
  const MeasurementSet ms = simulate_measurements(net, p, NoiseConfig{}, 7, kWeek);
  REQUIRE(ms.size() == 168);
  CHECK(ms.first() == p.timestamps[1008]);

  SECTION("defaults") {
    const NoiseConfig n;
    CHECK(n.power_sd == 0.01);
    CHECK(n.voltage_sd == 0.5e-3);
    CHECK(n.meter_sd == 0.02);
  }
  SECTION("truth satisfies the joint factor every hour") {
    double worst = 0.0;
    for (const auto& h : ms.hours) {
      const Vector r = fusion::joint_residual(net, ms.layout, net.indexer.to_vector(h.true_state), h.true_x2);
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-8);
  }
  SECTION("same seed, same measurements; other seed differs") {
    const MeasurementSet again = simulate_measurements(net, p, NoiseConfig{}, 7, kWeek);
    const MeasurementSet other = simulate_measurements(net, p, NoiseConfig{}, 8, kWeek);
    for (std::size_t i = 0; i < ms.size(); ++i) {
      CHECK(again.hours[i].evidence.y1 == ms.hours[i].evidence.y1);
      CHECK(again.hours[i].evidence.y2 == ms.hours[i].evidence.y2);
    }
    CHECK(other.hours[0].evidence.y2 != ms.hours[0].evidence.y2);
  }
  SECTION("a sub-window reproduces the same hours") {
    const MeasurementSet part = simulate_measurements(net, p, NoiseConfig{}, 7, {1100, 5});
    for (std::size_t i = 0; i < 5; ++i) CHECK(part.hours[i].evidence.y1 == ms.hours[92 + i].evidence.y1);
  }
  SECTION("y1 noise has the configured spread") {
    double ss_p = 0.0, ss_v = 0.0;
    const Index nb = 14;
    for (const auto& h : ms.hours) {
      ss_p += h.y1_noise.head(2 * nb).squaredNorm();
      ss_v += h.y1_noise.tail(nb).squaredNorm();
    }
    CHECK(std::sqrt(ss_p / (168.0 * 28)) == Catch::Approx(0.01).epsilon(0.05));
    CHECK(std::sqrt(ss_v / (168.0 * 14)) == Catch::Approx(0.5e-3).epsilon(0.05));
  }
  SECTION("no forecasts means y3 is unavailable") {
    CHECK(fusion::HourlyEvidence::count(ms.hours[0].evidence.y3_available) == 0);
  }
}

TEST_CASE("meter noise Monte Carlo", "[scenario]") {
  const MeasurementSet ms = simulate_measurements(case14(), horizon().profiles, NoiseConfig{}, 99, {0, 500});
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& h : ms.hours) {
    ss += (h.evidence.y2 - h.true_x2).squaredNorm();
    n += static_cast<std::size_t>(h.true_x2.size());
  }
  REQUIRE(n == 10000);
  CHECK(std::abs(std::sqrt(ss / static_cast<double>(n)) / 0.02 - 1.0) < 0.05);
}

TEST_CASE("power flow divergence names the hour", "[scenario]") {
  NationalSeries s;
  s.timestamps = hourly_range(parse_timestamp("2019-06-03T00:00Z"), 2);
  s.load = testing_support::vec({1.0, 40.0});  // 40x the anchor load
  s.solar = testing_support::vec({0.0, 0.0});
  const ProfileSet p = generate_profiles(case14().model, s, fusion::default_load_buses(), {0, 1});
  try {
    simulate_measurements(case14(), p, NoiseConfig{}, 1);
    FAIL("expected divergence");
  } catch (const PowerFlowDiverged& e) {
    CHECK(std::string(e.what()).find("2019-06-03T01:00:00Z") != std::string::npos);
  }
}

TEST_CASE("scenario events", "[scenario]") {
  const auto& net = case14();
  const MeasurementSet base = simulate_measurements(net, horizon().profiles, NoiseConfig{}, 3, kWeek);
  const Timestamp tail_begin = base.hours[120].timestamp;
  const Timestamp tail_end = base.last();

  SECTION("no events is the identity") {
    const MeasurementSet out = apply_scenario_events(net, base, {});
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(out.hours[i].evidence.y1 == base.hours[i].evidence.y1);
      CHECK(out.hours[i].evidence.y1_available == base.hours[i].evidence.y1_available);
      CHECK(out.hours[i].evidence.y2_available == base.hours[i].evidence.y2_available);
      CHECK(out.hours[i].true_x2 == base.hours[i].true_x2);
    }
  }
  SECTION("observability loss over the last two days") {
    const ScenarioEvent e{EventKind::ObservabilityLoss, tail_begin, tail_end, {3, 4, 9, 10}, 1.0};
    const MeasurementSet out = apply_scenario_events(net, base, {e});
    std::size_t affected = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& ev = out.hours[i].evidence;
      const bool in = i >= 120;
      affected += (fusion::HourlyEvidence::count(ev.y1_available) < 42) ? 1 : 0;
      for (std::size_t b = 0; b < 14; ++b) {
        const int id = net.model.buses[b].id;
        const bool lost = in && (id == 3 || id == 4 || id == 9 || id == 10);
        for (std::size_t q = 0; q < 3; ++q) CHECK(bool(ev.y1_available[q * 14 + b]) == !lost);
      }
      for (std::size_t k = 0; k < 10; ++k) {
        const int id = out.layout.load_buses[k];
        const bool lost = in && (id == 3 || id == 4 || id == 9 || id == 10);
        CHECK(bool(ev.y2_available[2 * k]) == !lost);
        CHECK(bool(ev.y2_available[2 * k + 1]) == !lost);
      }
      CHECK(ev.y1 == base.hours[i].evidence.y1);
    }
    CHECK(affected == 48);
  }
  SECTION("capacity growth changes truth and y1 but not the meter") {
    const ScenarioEvent e{EventKind::SolarCapacityChange, tail_begin, tail_end, {4}, 1.5};
    const MeasurementSet out = apply_scenario_events(net, base, {e});
    const std::size_t k = out.layout.load_slot(4);
    const Index s = fusion::FusionStateLayout::solar_index(k);
    bool y1_changed = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& a = out.hours[i];
      const auto& b = base.hours[i];
      CHECK(a.evidence.y2 == b.evidence.y2);
      const double expect = i >= 120 ? 1.5 * b.true_x2(s) : b.true_x2(s);
      CHECK(a.true_x2(s) == Catch::Approx(expect).epsilon(1e-15));
      if (i < 120) CHECK(a.evidence.y1 == b.evidence.y1);
      if (i >= 120 && b.true_x2(s) > 0.0) y1_changed = y1_changed || a.evidence.y1 != b.evidence.y1;
      const Vector r = fusion::joint_residual(net, out.layout, net.indexer.to_vector(a.true_state), a.true_x2);
      CHECK(r.cwiseAbs().maxCoeff() < 1e-8);
      // Noise draws are reused.
      CHECK(a.y1_noise == b.y1_noise);
    }
    CHECK(y1_changed);
  }
  SECTION("contradictory or out-of-range events") {
    const ScenarioEvent a{EventKind::SolarCapacityChange, tail_begin, tail_end, {4}, 1.5};
    const ScenarioEvent b{EventKind::SolarCapacityChange, base.hours[140].timestamp, tail_end, {4, 5}, 2.0};
    CHECK_THROWS_AS(apply_scenario_events(net, base, {a, b}), ConfigError);
    const ScenarioEvent c{EventKind::SolarCapacityChange, base.first(), base.hours[119].timestamp, {4}, 2.0};
    CHECK_NOTHROW(apply_scenario_events(net, base, {a, c}));
    const ScenarioEvent late{EventKind::ObservabilityLoss, tail_begin, tail_end + std::chrono::hours{1}, {3}, 1.0};
    CHECK_THROWS_AS(apply_scenario_events(net, base, {late}), ConfigError);
    const ScenarioEvent unknown{EventKind::ObservabilityLoss, tail_begin, tail_end, {77}, 1.0};
    CHECK_THROWS_AS(apply_scenario_events(net, base, {unknown}), ConfigError);
    const ScenarioEvent not_load{EventKind::SolarCapacityChange, tail_begin, tail_end, {2}, 1.5};
    CHECK_THROWS_AS(apply_scenario_events(net, base, {not_load}), ConfigError);
  }
}

TEST_CASE("per-bus forecasts over the validation week", "[scenario][forecast]") {
  const auto& h = horizon();
  const auto f = forecast::build_bus_forecasts(h.profiles, h.weather, {0, 1008}, kWeek);
  CHECK(f.set.mean.rows() == 168);
  CHECK(f.set.mean.cols() == 20);
  CHECK(f.set.variance.minCoeff() > 0.0);
  CHECK(f.set.mean.allFinite());
  INFO("demand MAPE " << f.demand_mape << "%");
  CHECK(f.demand_mape < 50.0);
  const MeasurementSet ms = simulate_measurements(case14(), h.profiles, NoiseConfig{}, 1, kWeek, &f.set);
  CHECK(fusion::HourlyEvidence::count(ms.hours[5].evidence.y3_available) == 20);
  CHECK(ms.hours[5].evidence.y3_mean == f.set.mean.row(5).transpose());
}

TEST_CASE("time-series CSV golden file", "[scenario][csv]") {
  const TimeSeriesTable t = read_timeseries_csv(source_path("tests/golden/timeseries.csv"));
  REQUIRE(t.timestamps.size() == 3);
  CHECK(t.at("load")(2) == 38.125);
  CHECK(t.at("solar")(2) == 0.1);
  std::ostringstream out;
  write_timeseries_csv(out, t);
  CHECK(out.str() == slurp(source_path("tests/golden/timeseries.csv")));

  SECTION("parse errors carry line numbers") {
    std::istringstream bad("timestamp,series,value\n2019-06-03T00:00Z,load,1\n2019-06-03T01:00Z,load,x\n");
    try {
      read_timeseries_csv(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 3);
    }
    std::istringstream header("time,series,value\n");
    CHECK_THROWS_AS(read_timeseries_csv(header), ParseError);
    std::istringstream gap("timestamp,series,value\n2019-06-03T00:00Z,load,1\n2019-06-03T02:00Z,load,1\n");
    CHECK_THROWS_AS(read_timeseries_csv(gap), ParseError);
    std::istringstream misaligned(
        "timestamp,series,value\n2019-06-03T00:00Z,load,1\n2019-06-03T01:00Z,solar,1\n");
    CHECK_THROWS_AS(read_timeseries_csv(misaligned), ParseError);
  }
  SECTION("bit-exact round trip of awkward values") {
    TimeSeriesTable r;
    r.timestamps = hourly_range(parse_timestamp("2019-06-03T00:00Z"), 3);
    r.series["x"] = testing_support::vec({1.0 / 3.0, -2.5e-300, 6.02214076e23});
    std::ostringstream o;
    write_timeseries_csv(o, r);
    std::istringstream i(o.str());
    CHECK(read_timeseries_csv(i).at("x") == r.series["x"]);
  }
}

TEST_CASE("weather CSV golden file", "[scenario][csv]") {
  const WeatherSeries w = read_weather_csv(source_path("tests/golden/weather.csv"));
  REQUIRE(w.size() == 2);
  CHECK(w.t_mean(0) == 17.5);
  CHECK(w.dni(0) == 612.5);
  CHECK(w.dhi(1) == 150.0);
  std::ostringstream out;
  write_weather_csv(out, w);
  CHECK(out.str() == slurp(source_path("tests/golden/weather.csv")));

  const auto& synth = horizon().weather;
  std::ostringstream o;
  write_weather_csv(o, synth);
  std::istringstream i(o.str());
  const WeatherSeries back = read_weather_csv(i);
  CHECK(back.timestamps == synth.timestamps);
  CHECK(back.dni == synth.dni);
  CHECK(back.t_max == synth.t_max);
}
