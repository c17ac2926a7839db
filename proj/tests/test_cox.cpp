#include "support.h"

#include "pafms/cox.h"
#include "pafms/errors.h"
#include "pafms/simulate.h"

#include <doctest.h>

#include <sstream>

using namespace pafms;
using support::make_cohort;

namespace
{

// Breslow log partial likelihood by explicit risk-set sums.
double loglik_direct(const CoxData& d, const std::vector<double>& beta)
{
    auto eta = [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t k = 0; k < beta.size(); ++k) {
            s += beta[k] * d.x[i][k];
        }
        return s;
    };
    double ll = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d.event[i]) {
            continue;
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (d.start[j] < d.stop[i] && d.stop[i] <= d.stop[j]) {
                denom += std::exp(eta(j));
            }
        }
        ll += eta(i) - std::log(denom);
    }
    return ll;
}

CoxData random_cox_data(std::mt19937_64& rng, std::size_t n, std::size_t p)
{
    std::uniform_int_distribution<int> day(1, 6);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution ev(0.6), late(0.3);
    CoxData d;
    for (std::size_t k = 0; k < p; ++k) {
        d.terms.push_back("x" + std::to_string(k));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double stop = day(rng);
        d.start.push_back(late(rng) ? stop - 1 : 0.0);
        d.stop.push_back(stop);
        d.event.push_back(ev(rng));
        std::vector<double> x;
        for (std::size_t k = 0; k < p; ++k) {
            x.push_back(z(rng));
        }
        d.x.push_back(x);
    }
    return d;
}

Cohort scale_times(const Cohort& c, double factor)
{
    std::vector<Subject> subjects = c.subjects();
    for (auto& s : subjects) {
        s.end_time *= factor;
        if (s.inf_time) {
            *s.inf_time *= factor;
        }
    }
    return Cohort(subjects, c.covariate_names(), TiePolicy::reject());
}

} // namespace

TEST_CASE("log partial likelihood matches direct risk-set sums (property)")
{
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = random_cox_data(rng, 30, 2);
        const std::vector<double> beta{0.3 * rep / 20.0, -0.7};
        CHECK(cox_log_partial_likelihood(d, beta) == doctest::Approx(loglik_direct(d, beta)).epsilon(1e-12));
    }
}

TEST_CASE("score matches finite differences (property)")
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = random_cox_data(rng, 30, 2);
        const std::vector<double> beta{0.4, -0.2};
        const auto u = cox_score(d, beta);
        for (std::size_t k = 0; k < beta.size(); ++k) {
            const double h = 1e-5;
            auto up = beta, down = beta;
            up[k] += h;
            down[k] -= h;
            const double fd = (loglik_direct(d, up) - loglik_direct(d, down)) / (2 * h);
            CHECK(std::abs(u[k] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("Newton iterations never decrease the log likelihood")
{
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const auto d   = random_cox_data(rng, 60, 2);
        const auto fit = fit_cox(d, "death");
        CHECK(fit.loglik >= fit.loglik_null);
        for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k) {
            CHECK(fit.loglik_trace[k] >= fit.loglik_trace[k - 1] - 1e-12);
        }
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(std::abs(cox_score(d, {fit.terms[0].coef, fit.terms[1].coef})[k]) < 1e-8);
        }
    }
}

TEST_CASE("time-dependent exposure rows")
{
    const auto c = make_cohort({{"a", 2.0, 5.0, EndStatus::death}, {"b", std::nullopt, 3.0, EndStatus::discharge}});
    const auto d = cox_data_td(to_transitions(c), CoxOutcome::death);
    REQUIRE(d.size() == 3);
    CHECK(d.terms == std::vector<std::string>{"exposed"});
    CHECK(d.num_events() == 1);
    const auto m = cox_data_markov(to_transitions(c), CoxOutcome::death);
    REQUIRE(m.size() == 1);
    CHECK(m.start[0] == 2.0);
    CHECK(m.x[0][0] == 2.0);
}

TEST_CASE("rescaling time leaves the coefficient unchanged")
{
    auto spec      = HazardSpec::constant(0.05, 0.05, 0.02, 0.04, 0.04, 60.0);
    const auto c   = simulate_cohort(spec, 800, 5);
    const auto a   = fit_cox_td(to_transitions(c), CoxOutcome::death);
    const auto b   = fit_cox_td(to_transitions(scale_times(c, 24.0)), CoxOutcome::death);
    CHECK(a.terms[0].coef == doctest::Approx(b.terms[0].coef).epsilon(1e-10));
    CHECK(a.terms[0].hr == doctest::Approx(std::exp(a.terms[0].coef)));
    CHECK(a.terms[0].ci_low > 0.0);
    CHECK(a.terms[0].ci_low < a.terms[0].hr);
    CHECK(a.terms[0].hr < a.terms[0].ci_high);
    CHECK(a.terms[0].p > 0.0);
    CHECK(a.terms[0].p <= 1.0);
}

TEST_CASE("no effect of exposure under the null")
{
    auto spec    = HazardSpec::constant(0.05, 0.06, 0.02, 0.06, 0.02, 100.0);
    const auto c = simulate_cohort(spec, 20000, 9);
    const auto r = to_transitions(c);
    for (auto o : {CoxOutcome::death, CoxOutcome::discharge}) {
        const auto fit = fit_cox_td(r, o);
        CHECK(std::abs(fit.terms[0].coef) < 3 * fit.terms[0].se);
        const auto mk = markov_test(r, o);
        CHECK(std::abs(mk.terms[0].coef) < 3 * mk.terms[0].se);
    }
}

TEST_CASE("known exposure effect is recovered")
{
    auto spec    = HazardSpec::constant(0.05, 0.06, 0.02, 0.06, 0.02 * std::exp(0.7), 100.0);
    const auto c = simulate_cohort(spec, 20000, 10);
    const auto t = fit_cox_td(to_transitions(c), CoxOutcome::death).terms[0];
    CHECK(std::abs(t.coef - 0.7) < 3 * t.se);
}

TEST_CASE("markov test recovers gamma")
{
    auto spec   = HazardSpec::constant(0.3, 0.05, 0.02, 0.05, 0.02, 30.0);
    spec.gamma  = 0.5;
    const auto c = simulate_cohort(spec, 5000, 11);
    const auto fit = markov_test(to_transitions(c), CoxOutcome::death);
    CHECK(fit.outcome == "death_after_exposure");
    CHECK(fit.terms[0].name == "inf_time");
    CHECK(std::abs(fit.terms[0].coef - 0.5) < 3 * fit.terms[0].se);
}

TEST_CASE("errors")
{
    const auto c = make_cohort({{"a", 1.0, 3.0, EndStatus::discharge}, {"b", std::nullopt, 2.0, EndStatus::discharge}});
    CHECK_THROWS_AS(fit_cox_td(to_transitions(c), CoxOutcome::death), NumericalError);

    // Perfect separation: only exposed subjects die.
    const auto s = make_cohort({{"a", 1.0, 3.0, EndStatus::death},
                                {"b", 1.0, 4.0, EndStatus::death},
                                {"c", std::nullopt, 5.0, EndStatus::discharge},
                                {"d", std::nullopt, 6.0, EndStatus::discharge}});
    try {
        fit_cox_td(to_transitions(s), CoxOutcome::death);
        FAIL("expected NumericalError");
    }
    catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("exposed") != std::string::npos);
    }
}

TEST_CASE("CSV rows")
{
    CoxFit fit;
    fit.outcome  = "death";
    fit.n_events = 12;
    fit.terms.push_back({"exposed", 0.5, std::exp(0.5), 0.25, 1.0, 2.7, 0.04});
    std::ostringstream os;
    write_cox_rows(os, fit, true);
    const std::string s = os.str();
    CHECK(s.rfind("outcome,term,coef,hr,se,ci_low,ci_high,p,n_events\n", 0) == 0);
    CHECK(s.find("death,exposed,0.5,") != std::string::npos);
    CHECK(s.substr(s.size() - 4) == ",12\n");
}
