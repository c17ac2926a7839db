#ifndef PAFMS_DISCRETE_H
#define PAFMS_DISCRETE_H

#include "pafms/cohort.h"
#include "pafms/step_curve.h"

#include <optional>
#include <string>
#include <vector>

namespace pafms
{

/// One subject-day at risk of a new exposure: the subject was unexposed and
/// still in the unit at the end of day - 1.
struct PersonDayRow {
    std::size_t subject = 0; ///< index into the panel
    int day = 0;
    bool at_risk_in_0 = true;
    bool infected_today = false;
    bool terminal_today = false; ///< unexposed death or discharge on this day
};

struct PersonDayRecords {
    std::vector<PersonDayRow> rows;
    std::vector<std::string> ids;
    std::vector<std::string> covariate_names;
    std::vector<std::vector<CovariateValue>> covariates; ///< per subject, baseline

    /// CSV `id,day,at_risk,infected_today,<covariates>`.
    void write_csv(std::ostream& os) const;
};

PersonDayRecords expand_person_days(const DailyPanel& panel);

/// Unweighted death risk among subjects unexposed until t, evaluated on days 1..days.
StepCurve naive_f01(const DailyPanel& panel);

/// Observed death CIF F1(t) = #{eps_i(t) = 1} / n on days 1..days.
StepCurve observed_death_cif(const DailyPanel& panel);

/**
 * Model for the daily probability of a new exposure,
 * P(A(s) = 1 | eps(s-1) = 0, A(s-1) = 0, baseline covariates).
 *
 * Two kinds exist. A pooled logistic fit scores logistic(beta . x) with
 * x = (1, covariates). The nonparametric model is the empirical daily exposure
 * hazard dN01(s) / Y0(s), where Y0(s) excludes subjects who die or are
 * discharged unexposed on day s (they cannot be exposed that day, so their own
 * daily probability is 0).
 */
class ExposureModel
{
public:
    enum class Kind
    {
        logistic,
        nonparametric,
    };

    static ExposureModel logistic(std::vector<std::string> terms, std::vector<double> beta,
                                  std::vector<double> std_errors = {}, int iterations = 0);
    static ExposureModel nonparametric(std::vector<double> daily_hazard);

    Kind kind() const
    {
        return m_kind;
    }
    /// Term names; the first is "(intercept)".
    const std::vector<std::string>& terms() const
    {
        return m_terms;
    }
    const std::vector<double>& coefficients() const
    {
        return m_beta;
    }
    const std::vector<double>& std_errors() const
    {
        return m_se;
    }
    int iterations() const
    {
        return m_iterations;
    }
    /// Empirical hazard for day s at index s - 1 (nonparametric only).
    const std::vector<double>& daily_hazard() const
    {
        return m_hazard;
    }

    /// Daily exposure probability for a subject-day.
    double probability(const std::vector<double>& covariates, int day, bool terminal_today) const;

private:
    Kind m_kind = Kind::logistic;
    std::vector<std::string> m_terms;
    std::vector<double> m_beta;
    std::vector<double> m_se;
    int m_iterations = 0;
    std::vector<double> m_hazard;
};

/// Maximum-likelihood Bernoulli fit on person-day rows by damped Newton
/// iterations (step halved while the deviance increases). Converged when
/// max |score| < 1e-8. Throws NumericalError without both outcomes, on
/// divergence past |beta| > 30 (naming the term) or after 100 iterations.
ExposureModel fit_pooled_logistic(const PersonDayRecords& records, const std::vector<std::string>& covariate_names);

ExposureModel nonparametric_exposure_model(const DailyPanel& panel);

/// W_{i,0bar,t} for every subject and day.
struct WeightTable {
    int days = 0;
    std::vector<std::string> ids;
    std::vector<double> values; ///< row-major, subject i day t at i * days + t - 1
    /// First day on which the model gave an at-risk subject-day exposure
    /// probability 1; weights from then on lose the mass of those subjects.
    std::optional<int> positivity_day;

    double at(std::size_t i, int t) const
    {
        return values[i * static_cast<std::size_t>(days) + static_cast<std::size_t>(t) - 1];
    }
    /// CSV `id,day,weight`.
    void write_csv(std::ostream& os) const;
};

/// W = p_i(t) / prod_{s <= min(t, T_i)} (1 - p_hat_i(s)), p_i(t) the
/// unexposed-path indicator. Throws NumericalError if a subject still on the
/// unexposed path needs a factor 1 - p_hat <= 0.
WeightTable compute_weights(const DailyPanel& panel, const ExposureModel& model);

/// sum_i 1(eps_i(t) = 1) W_i(t) / sum_i W_i(t) on days 1..days; NaN where the
/// weights sum to zero.
StepCurve ipw_f01(const DailyPanel& panel, const WeightTable& weights);

/// Numeric baseline covariates of every panel subject in the given order.
/// Throws UsageError for categorical values.
std::vector<std::vector<double>> numeric_covariates(const std::vector<std::string>& all_names,
                                                    const std::vector<std::vector<CovariateValue>>& values,
                                                    const std::vector<std::string>& selected);

} // namespace pafms

#endif
