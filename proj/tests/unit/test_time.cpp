#include "catch_amalgamated.hpp"
#include "gbpfusion/scenario/time.hpp"

using namespace gbpfusion;
using namespace gbpfusion::scenario;

TEST_CASE("timestamp parse and format", "[time]") {
  const Timestamp t = parse_timestamp("2019-06-03T13:00:00Z");
  CHECK(format_timestamp(t) == "2019-06-03T13:00:00Z");
  CHECK(parse_timestamp("2019-06-03 13:00") == t);
  CHECK(parse_timestamp("2019-06-03T13:00:00+00:00") == t);
  CHECK(hour_of_day(t) == 13);
  CHECK(day_of_week(t) == 0);  // Monday
  CHECK(day_of_week(parse_timestamp("2019-06-09T23:00Z")) == 6);
  CHECK(day_of_year(parse_timestamp("2019-01-01T00:00Z")) == 1);
  CHECK(day_of_year(t) == 154);
  CHECK(fractional_hour(parse_timestamp("2019-06-03T13:30:00Z")) == 13.5);

  CHECK_THROWS_AS(parse_timestamp("2019-02-30T00:00Z"), ConfigError);
  CHECK_THROWS_AS(parse_timestamp("2019-06-03T25:00Z"), ConfigError);
  CHECK_THROWS_AS(parse_timestamp("2019-06-03T01:00+02:00"), ConfigError);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), ConfigError);
}

TEST_CASE("hourly ranges", "[time]") {
  const auto ts = hourly_range(parse_timestamp("2019-12-31T22:00Z"), 4);
  REQUIRE(ts.size() == 4);
  CHECK(format_timestamp(ts[3]) == "2020-01-01T01:00:00Z");
  CHECK_NOTHROW(require_hourly(ts));
  auto gap = ts;
  gap[2] += std::chrono::minutes{30};
  CHECK_THROWS_AS(require_hourly(gap), ConfigError);
}
