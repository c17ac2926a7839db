#ifndef PAFMS_COX_H
#define PAFMS_COX_H

#include "pafms/cohort.h"

#include <iosfwd>
#include <string>
#include <vector>

namespace pafms
{

enum class CoxOutcome
{
    death,
    discharge,
};

const char* to_string(CoxOutcome o);

/// Counting-process data: one risk interval (start, stop] per row.
struct CoxData {
    std::vector<double> start;
    std::vector<double> stop;
    std::vector<std::uint8_t> event;
    std::vector<std::vector<double>> x; ///< row-major covariates
    std::vector<std::string> terms;

    std::size_t size() const
    {
        return stop.size();
    }
    std::size_t num_events() const;
};

/// Exposure as a 0/1 time-varying covariate (first term `exposed`), plus
/// numeric baseline covariates.
CoxData cox_data_td(const TransitionRecords& records, CoxOutcome outcome,
                    const std::vector<std::string>& extra_covariates = {});

/// State-1 episodes with delayed entry at inf_time; the single covariate is
/// inf_time. The outcome is the post-exposure death or discharge.
CoxData cox_data_markov(const TransitionRecords& records, CoxOutcome outcome);

/// Breslow log partial likelihood and its score.
double cox_log_partial_likelihood(const CoxData& data, const std::vector<double>& beta);
std::vector<double> cox_score(const CoxData& data, const std::vector<double>& beta);

struct CoxTerm {
    std::string name;
    double coef = 0.0;
    double hr = 1.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p = 1.0;
};

struct CoxFit {
    std::string outcome;
    std::vector<CoxTerm> terms;
    double loglik = 0.0;
    double loglik_null = 0.0;
    int iterations = 0;
    std::size_t n_events = 0;
    /// Log partial likelihood after each accepted Newton step.
    std::vector<double> loglik_trace;
};

/// Newton-Raphson with step halving. Converged when max |score| < 1e-8.
/// Throws NumericalError without events, on |beta| > 30 or after 100 iterations.
CoxFit fit_cox(const CoxData& data, const std::string& outcome_label);

CoxFit fit_cox_td(const TransitionRecords& records, CoxOutcome outcome,
                  const std::vector<std::string>& extra_covariates = {});

/// Cox model for the post-exposure hazard with covariate inf_time; a
/// significant coefficient speaks against the Markov assumption.
CoxFit markov_test(const TransitionRecords& records, CoxOutcome outcome);

/// `outcome,term,coef,hr,se,ci_low,ci_high,p,n_events`; header when requested.
void write_cox_rows(std::ostream& os, const CoxFit& fit, bool header);

} // namespace pafms

#endif
