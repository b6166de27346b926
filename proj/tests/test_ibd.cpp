#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "haid/ibd.hpp"

using namespace haid;

namespace {

TherapyProfile profile_with(double CR, double CF) {
  TherapyProfile prof;
  prof.CR = CR;
  prof.CF = CF;
  return prof;
}

}  // namespace

TEST_CASE("trend arrows follow the magnitude thresholds") {
  CHECK(classify_arrow(3.5).category == ArrowCategory::kDoubleUp);
  CHECK(classify_arrow(3.0).category == ArrowCategory::kDoubleUp);
  CHECK(classify_arrow(2.999).category == ArrowCategory::kSingleUp);
  CHECK(classify_arrow(2.0).category == ArrowCategory::kSingleUp);
  CHECK(classify_arrow(1.999).category == ArrowCategory::kDiagonalUp);
  CHECK(classify_arrow(1.0).category == ArrowCategory::kDiagonalUp);
  CHECK(classify_arrow(0.999).category == ArrowCategory::kFlat);
  CHECK(classify_arrow(0.0).category == ArrowCategory::kFlat);
  CHECK(classify_arrow(-0.999).category == ArrowCategory::kFlat);
  CHECK(classify_arrow(-1.0).category == ArrowCategory::kDiagonalDown);
  CHECK(classify_arrow(-2.0).category == ArrowCategory::kSingleDown);
  CHECK(classify_arrow(-3.0).category == ArrowCategory::kDoubleDown);
  CHECK(classify_arrow(-1.5).roc == -1.5);
  CHECK_THROWS_AS(classify_arrow(std::nan("")), std::invalid_argument);
}

TEST_CASE("adjusted glucose shifts with the arrow and clamps to range") {
  CHECK(adjusted_glucose(160.0, classify_arrow(3.2)) == 260.0);
  CHECK(adjusted_glucose(160.0, classify_arrow(0.0)) == 160.0);
  CHECK(adjusted_glucose(160.0, classify_arrow(-1.5)) == 110.0);
  CHECK(adjusted_glucose(160.0, classify_arrow(2.5)) == 235.0);
  CHECK(adjusted_glucose(160.0, classify_arrow(-3.5)) == 60.0);
  CHECK(adjusted_glucose(100.0, classify_arrow(-4.0)) == 40.0);
  CHECK(adjusted_glucose(550.0, classify_arrow(4.0)) == 600.0);
}

TEST_CASE("bolus adjustment table is total over arrows and bands") {
  const double kDouble[] = {4.5, 3.0, 1.5, 1.0};
  const double kSingle[] = {3.0, 2.0, 1.0, 0.5};
  const double kDiagonal[] = {1.5, 1.0, 0.5, 0.25};
  const struct {
    double cf;
    int band;
  } kProbes[] = {{10.0, 0}, {24.999, 0}, {25.0, 1}, {49.999, 1},
                 {50.0, 2}, {74.999, 2}, {75.0, 3}, {200.0, 3}};

  for (const auto& probe : kProbes) {
    CHECK(roc_cf_adjustment(classify_arrow(3.5), probe.cf) ==
          kDouble[probe.band]);
    CHECK(roc_cf_adjustment(classify_arrow(2.5), probe.cf) ==
          kSingle[probe.band]);
    CHECK(roc_cf_adjustment(classify_arrow(1.5), probe.cf) ==
          kDiagonal[probe.band]);
    CHECK(roc_cf_adjustment(classify_arrow(0.0), probe.cf) == 0.0);
    CHECK(roc_cf_adjustment(classify_arrow(-1.5), probe.cf) ==
          -kDiagonal[probe.band]);
    CHECK(roc_cf_adjustment(classify_arrow(-2.5), probe.cf) ==
          -kSingle[probe.band]);
    CHECK(roc_cf_adjustment(classify_arrow(-3.5), probe.cf) ==
          -kDouble[probe.band]);
  }
  CHECK_THROWS_AS(roc_cf_adjustment(classify_arrow(1.5), 0.0),
                  std::invalid_argument);
}

TEST_CASE("band boundaries resolve toward the higher band") {
  CHECK(roc_cf_adjustment(classify_arrow(3.5), 25.0) == 3.0);
  CHECK(roc_cf_adjustment(classify_arrow(3.5), 50.0) == 1.5);
  CHECK(roc_cf_adjustment(classify_arrow(3.5), 75.0) == 1.0);
}

TEST_CASE("meal bolus combines carbs, trend, correction, and on-board") {
  BolusRequest req;
  req.CHO_announced = 60.0;
  req.G_cur = 160.0;
  req.arrow = classify_arrow(0.0);
  req.profile = profile_with(10.0, 40.0);
  req.iob = 1.0;
  BolusResult res = prandial_bolus(req);
  CHECK(res.amount == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(res.raw == doctest::Approx(6.0).epsilon(1e-12));

  req = BolusRequest{};
  req.G_cur = 120.0;
  res = prandial_bolus(req);
  CHECK(res.amount == 0.0);
  CHECK(res.raw == doctest::Approx(0.0).epsilon(1e-12));

  req = BolusRequest{};
  req.CHO_announced = 30.0;
  req.G_cur = 150.0;
  req.arrow = classify_arrow(3.5);
  req.profile = profile_with(15.0, 30.0);
  res = prandial_bolus(req);
  CHECK(res.amount == doctest::Approx(28.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("negative meal-bolus formula floors at zero but keeps the raw value") {
  BolusRequest req;
  req.G_cur = 120.0;
  req.iob = 5.0;
  const BolusResult res = prandial_bolus(req);
  CHECK(res.amount == 0.0);
  CHECK(res.raw == doctest::Approx(-5.0).epsilon(1e-12));
}

TEST_CASE("meal bolus uses the clamped adjusted glucose") {
  BolusRequest req;
  req.G_cur = 590.0;
  req.arrow = classify_arrow(4.0);
  req.profile = profile_with(10.0, 100.0);
  const BolusResult res = prandial_bolus(req);
  CHECK(res.raw == doctest::Approx(1.0 + (600.0 - 120.0) / 100.0).epsilon(1e-12));
}

TEST_CASE("meal bolus rejects nonsense inputs") {
  BolusRequest req;
  req.CHO_announced = -1.0;
  CHECK_THROWS_AS(prandial_bolus(req), std::invalid_argument);
  req = BolusRequest{};
  req.G_cur = 10.0;
  CHECK_THROWS_AS(prandial_bolus(req), std::invalid_argument);
}

TEST_CASE("meal bolus is monotone in carbs and on-board insulin") {
  BolusRequest base;
  base.G_cur = 150.0;
  base.arrow = classify_arrow(1.2);
  base.profile = profile_with(12.0, 35.0);
  base.iob = 1.0;

  double prev = -1.0;
  for (double cho = 0.0; cho <= 120.0; cho += 10.0) {
    BolusRequest req = base;
    req.CHO_announced = cho;
    const double amount = prandial_bolus(req).amount;
    CHECK(amount >= prev);
    prev = amount;
  }

  prev = 1e18;
  for (double iob = 0.0; iob <= 10.0; iob += 0.5) {
    BolusRequest req = base;
    req.CHO_announced = 40.0;
    req.iob = iob;
    const double amount = prandial_bolus(req).amount;
    CHECK(amount <= prev);
    prev = amount;
  }
}

TEST_CASE("falling trends never enlarge a meal bolus") {
  BolusRequest flat;
  flat.CHO_announced = 50.0;
  flat.G_cur = 170.0;
  flat.arrow = classify_arrow(0.0);
  flat.profile = profile_with(10.0, 40.0);
  const double flat_amount = prandial_bolus(flat).amount;

  for (double roc : {-1.2, -2.4, -3.6}) {
    BolusRequest falling = flat;
    falling.arrow = classify_arrow(roc);
    CHECK(prandial_bolus(falling).amount <= flat_amount);
  }
}

TEST_CASE("correction gains favor climbing trends only") {
  CHECK(correction_alpha(classify_arrow(3.5)) == 1.5);
  CHECK(correction_alpha(classify_arrow(2.5)) == 1.4);
  CHECK(correction_alpha(classify_arrow(1.5)) == 1.3);
  CHECK(correction_alpha(classify_arrow(0.0)) == 1.0);
  CHECK(correction_alpha(classify_arrow(-1.5)) == 1.0);
  CHECK(correction_alpha(classify_arrow(-3.5)) == 1.0);
}

TEST_CASE("correction bolus fires only past the threshold and gates") {
  const TherapyProfile prof = profile_with(10.0, 50.0);
  const CorrectionGate gate;
  GateState state;

  auto res = correction_bolus(1000.0, 220.0, classify_arrow(3.5), prof, 2.0,
                              120.0, gate, state);
  REQUIRE(res.has_value());
  CHECK(res->amount == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(state.last_correction_t == 1000.0);

  // below the threshold: nothing, 180 exactly is not "above"
  state = GateState{};
  CHECK(!correction_bolus(0.0, 170.0, classify_arrow(0.0), prof, 0.0, 120.0,
                          gate, state));
  CHECK(!correction_bolus(0.0, 180.0, classify_arrow(0.0), prof, 0.0, 120.0,
                          gate, state));
}

TEST_CASE("corrections wait out the meal window") {
  const TherapyProfile prof = profile_with(10.0, 50.0);
  const CorrectionGate gate;
  GateState state;
  state.last_meal_announce_t = 900.0;

  CHECK(!correction_bolus(1000.0, 220.0, classify_arrow(0.0), prof, 0.0, 120.0,
                          gate, state));
  CHECK(!correction_bolus(1079.0, 220.0, classify_arrow(0.0), prof, 0.0, 120.0,
                          gate, state));
  auto res = correction_bolus(1080.0, 220.0, classify_arrow(0.0), prof, 0.0,
                              120.0, gate, state);
  REQUIRE(res.has_value());
  CHECK(res->amount == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("corrections are spaced by the refractory window") {
  const TherapyProfile prof = profile_with(10.0, 50.0);
  const CorrectionGate gate;
  GateState state;

  auto first = correction_bolus(0.0, 220.0, classify_arrow(0.0), prof, 0.0,
                                120.0, gate, state);
  REQUIRE(first.has_value());
  CHECK(first->amount > 0.0);

  CHECK(!correction_bolus(20.0, 230.0, classify_arrow(0.0), prof, 0.0, 120.0,
                          gate, state));
  CHECK(!correction_bolus(29.0, 230.0, classify_arrow(0.0), prof, 0.0, 120.0,
                          gate, state));
  auto later = correction_bolus(30.0, 230.0, classify_arrow(0.0), prof, 0.0,
                                120.0, gate, state);
  REQUIRE(later.has_value());
  CHECK(later->amount > 0.0);
}

TEST_CASE("a floored correction leaves the gate untouched") {
  const TherapyProfile prof = profile_with(10.0, 50.0);
  const CorrectionGate gate;
  GateState state;

  auto res = correction_bolus(100.0, 220.0, classify_arrow(0.0), prof, 10.0,
                              120.0, gate, state);
  REQUIRE(res.has_value());
  CHECK(res->amount == 0.0);
  CHECK(res->raw < 0.0);
  CHECK(state.last_correction_t < 0.0);

  // the very next sample may still dose because nothing was delivered
  auto next = correction_bolus(105.0, 220.0, classify_arrow(0.0), prof, 0.0,
                               120.0, gate, state);
  REQUIRE(next.has_value());
  CHECK(next->amount > 0.0);
}
