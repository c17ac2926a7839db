#include "support.h"

#include "pafms/continuous.h"
#include "pafms/errors.h"
#include "pafms/simulate.h"

#include <doctest.h>

#include <sstream>

using namespace pafms;
using support::make_cohort;

namespace
{

struct Forward {
    std::array<double, 6> p{};
    double p030 = 0.0;
};

// Kolmogorov forward equations integrated by classical RK4 with step h; every
// breakpoint used below is a multiple of h.
Forward rk4(const HazardSpec& s, double t_end, double h = 1e-3)
{
    auto deriv = [&](double t, const std::array<double, 6>& y) {
        const double a01 = s.alpha[HazardSpec::a01].rate(t), a02 = s.alpha[HazardSpec::a02].rate(t),
                     a03 = s.alpha[HazardSpec::a03].rate(t), a14 = s.alpha[HazardSpec::a14].rate(t),
                     a15 = s.alpha[HazardSpec::a15].rate(t);
        std::array<double, 6> d{};
        d[0] = -(a01 + a02 + a03) * y[0];
        d[1] = a01 * y[0] - (a14 + a15) * y[1];
        d[2] = a02 * y[0];
        d[3] = a03 * y[0];
        d[4] = a14 * y[1];
        d[5] = a15 * y[1];
        return d;
    };
    std::array<double, 6> y{1, 0, 0, 0, 0, 0};
    double q00 = 1.0, q03 = 0.0;
    const int steps = static_cast<int>(std::llround(t_end / h));
    for (int k = 0; k < steps; ++k) {
        // Rates are sampled inside the step so no evaluation lands on a jump.
        // The no-exposure world (q00, q03) is integrated alongside.
        const double t = k * h;
        auto add       = [](std::array<double, 6> a, const std::array<double, 6>& b, double f) {
            for (std::size_t i = 0; i < 6; ++i) {
                a[i] += f * b[i];
            }
            return a;
        };
        const double tm = t + 1e-9;
        const double te = t + h - 1e-9;
        const auto k1   = deriv(tm, y);
        const auto k2   = deriv(t + h / 2, add(y, k1, h / 2));
        const auto k3   = deriv(t + h / 2, add(y, k2, h / 2));
        const auto k4   = deriv(te, add(y, k3, h));
        for (std::size_t i = 0; i < 6; ++i) {
            y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
        auto q = [&](double tt, double x) {
            return -(s.alpha[HazardSpec::a02].rate(tt) + s.alpha[HazardSpec::a03].rate(tt)) * x;
        };
        const double l1 = q(tm, q00), l2 = q(t + h / 2, q00 + h / 2 * l1), l3 = q(t + h / 2, q00 + h / 2 * l2),
                     l4 = q(te, q00 + h * l3);
        auto r = [&](double tt, double x) { return s.alpha[HazardSpec::a03].rate(tt) * x; };
        q03 += h / 6 *
               (r(tm, q00) + 2 * r(t + h / 2, q00 + h / 2 * l1) + 2 * r(t + h / 2, q00 + h / 2 * l2) +
                r(te, q00 + h * l3));
        q00 += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
    }
    Forward f;
    for (std::size_t i = 0; i < 6; ++i) {
        f.p[i] = y[i];
    }
    f.p030 = q03;
    return f;
}

const char* piecewise_json = R"({
  "alpha01": [{"until": 5, "rate": 0.08}, {"until": 12, "rate": 0.02}],
  "alpha02": [{"until": 10, "rate": 0.03}, {"rate": 0.07}],
  "alpha03": 0.02,
  "alpha14": [{"until": 8, "rate": 0.05}, {"rate": 0.03}],
  "alpha15": 0.04,
  "tau": 40
})";

} // namespace

TEST_CASE("piecewise hazard")
{
    const PiecewiseHazard h({{2.0, 0.5}, {5.0, 0.1}});
    CHECK(h.rate(1.0) == 0.5);
    CHECK(h.rate(2.0) == 0.1);
    CHECK(h.rate(6.0) == 0.0);
    CHECK(h.cumulative(3.0) == doctest::Approx(1.1));
    CHECK(h.cumulative(100.0) == doctest::Approx(1.3));
    CHECK(PiecewiseHazard::constant(0.2).cumulative(10.0) == doctest::Approx(2.0));
    CHECK(PiecewiseHazard().zero());
    CHECK_THROWS_AS(PiecewiseHazard({{5.0, 0.1}, {2.0, 0.1}}), UsageError);
    CHECK_THROWS_AS(PiecewiseHazard({{5.0, -0.1}}), UsageError);
}

TEST_CASE("hazard spec JSON")
{
    const auto s = parse_hazard_spec(piecewise_json);
    CHECK(s.tau == 40.0);
    CHECK(s.alpha[HazardSpec::a01].rate(13.0) == 0.0);
    CHECK(s.alpha[HazardSpec::a02].rate(50.0) == 0.07);
    CHECK(s.alpha[HazardSpec::a03].rate(1e6) == 0.02);
    CHECK_FALSE(s.round_days);

    const auto back = parse_hazard_spec(hazard_spec_json(s));
    for (std::size_t k = 0; k < 5; ++k) {
        for (double t : {0.5, 5.0, 9.0, 11.0, 30.0}) {
            CHECK(back.alpha[k].rate(t) == s.alpha[k].rate(t));
        }
    }
    CHECK(back.tau == s.tau);

    CHECK_THROWS_AS(parse_hazard_spec("{"), UsageError);
    CHECK_THROWS_AS(parse_hazard_spec("[1,2]"), UsageError);
    CHECK_THROWS_AS(parse_hazard_spec(R"({"alpha01": -1})"), UsageError);
    CHECK_THROWS_AS(parse_hazard_spec(R"({"alpha01": 0.1, "tau": 0})"), UsageError);
    CHECK_THROWS_AS(simulate_cohort(parse_hazard_spec("{}"), 10, 1), UsageError);
}

TEST_CASE("simulation is deterministic given the seed")
{
    const auto s = parse_hazard_spec(piecewise_json);
    const auto a = simulate_cohort(s, 300, 42);
    const auto b = simulate_cohort(s, 300, 42);
    const auto c = simulate_cohort(s, 300, 43);
    CHECK(a.subjects() == b.subjects());
    CHECK_FALSE(a.subjects() == c.subjects());
    // Subject i depends only on (seed, i).
    const auto prefix = simulate_cohort(s, 100, 42);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(prefix[i] == a[i]);
    }
}

TEST_CASE("no exposure hazard means no exposures")
{
    const auto c = simulate_cohort(HazardSpec::constant(0.0, 0.05, 0.03, 0.1, 0.1, 50.0), 2000, 3);
    for (const auto& s : c.subjects()) {
        CHECK_FALSE(s.inf_time.has_value());
    }
}

TEST_CASE("administrative and random censoring")
{
    auto spec        = HazardSpec::constant(0.01, 0.01, 0.01, 0.01, 0.01, 10.0);
    spec.censor_rate = 0.05;
    const auto c     = simulate_cohort(spec, 2000, 4);
    std::size_t censored = 0;
    for (const auto& s : c.subjects()) {
        CHECK(s.end_time <= 10.0);
        censored += s.end_status == EndStatus::censored ? 1 : 0;
    }
    CHECK(censored > 1000);
    CHECK(c.horizon() == 10.0);
}

TEST_CASE("rounded days")
{
    auto spec       = parse_hazard_spec(piecewise_json);
    spec.round_days = true;
    const auto c    = simulate_cohort(spec, 3000, 5);
    CHECK(c.integer_times());
    for (const auto& s : c.subjects()) {
        if (s.inf_time) {
            CHECK(*s.inf_time < s.end_time);
        }
    }
}

TEST_CASE("exposure CIF matches its closed form")
{
    const double a01 = 0.05, a0 = 0.05 + 0.05 + 0.02;
    const auto c     = simulate_cohort(HazardSpec::constant(a01, 0.05, 0.02, 0.05, 0.03, 100.0), 50000, 6);
    const auto aj    = aalen_johansen_extended(to_transitions(c));
    double sup       = 0.0;
    for (double t = 1; t <= 60; ++t) {
        const double est = aj[State::exposed](t) + aj[State::discharge_exposed](t) + aj[State::death_exposed](t);
        sup              = std::max(sup, std::abs(est - a01 / a0 * (1.0 - std::exp(-a0 * t))));
    }
    CHECK(sup < 0.01);
}

TEST_CASE("analytic curves: constant hazard closed forms")
{
    const double a01 = 0.05, a02 = 0.05, a03 = 0.02, a14 = 0.05, a15 = 0.03;
    const double a0 = a01 + a02 + a03, a1 = a14 + a15;
    const std::vector<double> grid{0.0, 1.0, 7.5, 30.0, 90.0};
    const auto ac = analytic_curves(HazardSpec::constant(a01, a02, a03, a14, a15, 100.0), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        CHECK(ac.p[0][k] == doctest::Approx(std::exp(-a0 * t)).epsilon(1e-6));
        CHECK(std::abs(ac.p[1][k] - a01 / (a0 - a1) * (std::exp(-a1 * t) - std::exp(-a0 * t))) < 1e-6);
        CHECK(std::abs(ac.p[3][k] - a03 / a0 * (1.0 - std::exp(-a0 * t))) < 1e-6);
        CHECK(std::abs(ac.p030[k] - a03 / (a02 + a03) * (1.0 - std::exp(-(a02 + a03) * t))) < 1e-6);
        double sum = 0.0;
        for (const auto& col : ac.p) {
            sum += col[k];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    CHECK(std::isnan(ac.paf_o[0]));
}

TEST_CASE("analytic curves: piecewise hazards against a forward-equation solver")
{
    const auto spec = parse_hazard_spec(piecewise_json);
    const std::vector<double> grid{3.0, 5.0, 8.0, 12.0, 20.0, 40.0};
    const auto ac   = analytic_curves(spec, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto f = rk4(spec, grid[k]);
        for (std::size_t l = 0; l < 6; ++l) {
            CHECK(std::abs(ac.p[l][k] - f.p[l]) < 1e-6);
        }
        CHECK(std::abs(ac.p030[k] - f.p030) < 1e-6);
        const double pd  = f.p[3] + f.p[5];
        const double cpf = f.p[3] / (f.p[0] + f.p[2] + f.p[3]);
        CHECK(std::abs(ac.death[k] - pd) < 1e-6);
        CHECK(std::abs(ac.cpf[k] - cpf) < 1e-6);
        CHECK(std::abs(ac.paf_o[k] - (pd - cpf) / pd) < 1e-5);
        CHECK(std::abs(ac.paf_c[k] - (pd - f.p030) / pd) < 1e-5);
    }
}

TEST_CASE("analytic PAF_o and PAF_c meet at a long horizon under constant hazards")
{
    const auto ac = analytic_curves(HazardSpec::constant(0.05, 0.05, 0.02, 0.05, 0.03, 400.0), {400.0});
    CHECK(std::abs(ac.paf_o[0] - ac.paf_c[0]) < 1e-6);
}

TEST_CASE("analytic curves: input checks and CSV")
{
    auto spec  = HazardSpec::constant(0.05, 0.05, 0.02, 0.05, 0.03, 100.0);
    spec.gamma = 0.1;
    CHECK_THROWS_AS(analytic_curves(spec, {1.0}), UsageError);
    spec.gamma = 0.0;
    CHECK_THROWS_AS(analytic_curves(spec, {2.0, 1.0}), UsageError);
    CHECK_THROWS_AS(analytic_curves(spec, {}), UsageError);
    std::ostringstream os;
    write_analytic_csv(os, analytic_curves(spec, {1.0}));
    CHECK(os.str().rfind("t,P00,P01,P02,P03,P04,P05,P030,PD,CPF,PAF_o,PAF_c\n1,", 0) == 0);
}

TEST_CASE("brute force on the two-subject cohort")
{
    const auto b = brute_force_estimates(support::two_subject());
    CHECK(b.cpf(1.0) == 1.0);
    CHECK(b.death(1.0) == 0.5);
    CHECK(b.death(2.0) == 1.0);
    CHECK(b.counterfactual(1.0) == 0.5);

    const auto none = brute_force_estimates(
        make_cohort({{"a", std::nullopt, 1.0, EndStatus::discharge}, {"b", 1.0, 2.0, EndStatus::discharge}}));
    CHECK(none.death(2.0) == 0.0);
    CHECK(none.counterfactual(2.0) == 0.0);

    CHECK_THROWS_AS(brute_force_estimates(make_cohort({{"a", std::nullopt, 1.0, EndStatus::censored}})), DataError);
}

TEST_CASE("brute force agrees with the multistate estimators (property)")
{
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 40; ++rep) {
        const auto c    = support::random_cohort(rng, 50, rep % 2 == 0, 0.0);
        const auto r    = to_transitions(c);
        const auto b    = brute_force_estimates(c);
        const auto grid = support::event_times(c);
        CHECK(support::sup_distance(b.death, overall_death_risk(r), grid) < 1e-12);
        CHECK(support::sup_distance(b.cpf, cpf_unexposed(r), grid) < 1e-12);
        CHECK(support::sup_distance(b.counterfactual, cif_counterfactual(r), grid) < 1e-12);
    }
}
