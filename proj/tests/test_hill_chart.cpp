#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"

#include "vspsfc/hill_chart.hpp"

using namespace vspsfc;

TEST_CASE("optimal speed table lookup is exact at grid nodes") {
  HillChart c = testing::test_chart();
  const auto& p_axis = c.power_axis();
  const auto& h_axis = c.head_axis_opt();
  for (std::size_t ip = 0; ip < p_axis.size(); ip += 4) {
    for (std::size_t ih = 0; ih < h_axis.size(); ih += 4) {
      double expected = c.opt_speed_values()[ip * h_axis.size() + ih];
      CHECK(c.optimal_speed(p_axis[ip], h_axis[ih]) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("optimal speed at a cell midpoint is the corner average") {
  HillChart c = testing::test_chart();
  const auto& p_axis = c.power_axis();
  const auto& h_axis = c.head_axis_opt();
  std::size_t ip = 3, ih = 5;
  double pm = 0.5 * (p_axis[ip] + p_axis[ip + 1]);
  double hm = 0.5 * (h_axis[ih] + h_axis[ih + 1]);
  double a = c.opt_speed_values()[ip * h_axis.size() + ih];
  double b = c.opt_speed_values()[ip * h_axis.size() + ih + 1];
  double d = c.opt_speed_values()[(ip + 1) * h_axis.size() + ih];
  double e = c.opt_speed_values()[(ip + 1) * h_axis.size() + ih + 1];
  CHECK(c.optimal_speed(pm, hm) == doctest::Approx((a + b + d + e) / 4.0).epsilon(1e-13));
}

TEST_CASE("queries outside the hull throw unless clamped") {
  HillChart c = testing::test_chart();
  CHECK_THROWS_AS(c.optimal_speed(5.0, 1.0), Error);
  CHECK_THROWS_AS(c.power(2.0, 1.0, 1.0), Error);
  CHECK_NOTHROW(c.optimal_speed(5.0, 1.0, true));
  long before = c.clamped_queries();
  c.power(2.0, 1.0, 1.0, true);
  CHECK(c.clamped_queries() == before + 1);
}

TEST_CASE("power interpolation reproduces the sampled characteristic at nodes") {
  HillChart c = testing::test_chart();
  auto ev = c.power(c.gate_axis()[10], c.speed_axis()[8], c.head_axis()[14]);
  std::size_t i = (10 * c.speed_axis().size() + 8) * c.head_axis().size() + 14;
  CHECK(ev.p_m == doctest::Approx(c.power_values()[i]).epsilon(1e-14));
  CHECK(ev.efficiency == doctest::Approx(c.efficiency_values()[i]).epsilon(1e-14));
}

TEST_CASE("power partials match central differences inside a cell") {
  HillChart c = testing::test_chart();
  double g = 0.6137, w = 0.9523, h = 0.9671;
  auto ev = c.power(g, w, h);
  const double d = 1e-7;
  CHECK(ev.dp_dgate ==
        doctest::Approx((c.power(g + d, w, h).p_m - c.power(g - d, w, h).p_m) / (2 * d)).epsilon(1e-6));
  CHECK(ev.dp_dspeed ==
        doctest::Approx((c.power(g, w + d, h).p_m - c.power(g, w - d, h).p_m) / (2 * d)).epsilon(1e-6));
  CHECK(ev.dp_dhead ==
        doctest::Approx((c.power(g, w, h + d).p_m - c.power(g, w, h - d).p_m) / (2 * d)).epsilon(1e-6));
}

TEST_CASE("gate_for_power inverts the interpolated power curve") {
  HillChart c = testing::test_chart();
  double g = c.gate_for_power(0.55, 0.95, 1.0);
  CHECK(c.power(g, 0.95, 1.0).p_m == doctest::Approx(0.55).epsilon(1e-9));
}

TEST_CASE("efficiency grid stays in (0, 1] and axes are strictly increasing") {
  HillChart c = testing::test_chart();
  CHECK_NOTHROW(c.validate());
  for (double e : c.efficiency_values()) {
    CHECK(e > 0.0);
    CHECK(e <= 1.0);
  }
}
