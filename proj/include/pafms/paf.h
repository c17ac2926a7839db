#ifndef PAFMS_PAF_H
#define PAFMS_PAF_H

#include "pafms/cohort.h"
#include "pafms/step_curve.h"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace pafms
{

enum class Estimand
{
    paf_o, ///< attributable: based on P(D(t) = 1 | E(t) = 0)
    paf_c, ///< preventable: based on P(D_0(t) = 1)
};

enum class Estimator
{
    multistate,
    bekaert_naive,
    bekaert_ipw,
};

const char* to_string(Estimand e);
const char* to_string(Estimator e);
/// Accepts `paf_o` / `paf_c`.
Estimand parse_estimand(const std::string& text);
/// Accepts `multistate`, `naive` / `bekaert_naive`, `ipw` / `bekaert_ipw`.
Estimator parse_estimator(const std::string& text);

/// PAF(t) = (P(D(t)) - R(t)) / P(D(t)); NaN where P(D(t)) = 0 or R is undefined.
struct PafCurve {
    StepCurve curve;
    Estimand estimand = Estimand::paf_o;
    Estimator estimator = Estimator::multistate;

    double operator()(double t) const
    {
        return curve.value(t);
    }
    bool defined_at(double t) const
    {
        return curve.defined_at(t);
    }
};

PafCurve paf_o(const StepCurve& overall, const StepCurve& cpf, Estimator estimator = Estimator::multistate);
PafCurve paf_c(const StepCurve& overall, const StepCurve& counterfactual, Estimator estimator = Estimator::multistate);

/// Exposure by deaths table for a time-fixed exposure.
struct FourfoldTable {
    std::uint64_t exposed_cases = 0;
    std::uint64_t exposed_noncases = 0;
    std::uint64_t unexposed_cases = 0;
    std::uint64_t unexposed_noncases = 0;
};

/// NaN without cases or without unexposed subjects.
double paf_fixed(const FourfoldTable& table);

/// Table at time tau: exposed means inf_time <= tau, case means death by tau.
/// Throws DataError for censored subjects.
FourfoldTable fourfold_at(const Cohort& cohort, double tau);

/// round(paf * deaths); throws UsageError for an undefined paf.
std::int64_t preventable_count(double paf, std::uint64_t deaths);

/// Observed deaths with end_time <= t.
std::uint64_t deaths_by(const Cohort& cohort, double t);

struct EstimatorSpec {
    Estimand estimand = Estimand::paf_o;
    Estimator estimator = Estimator::multistate;
    /// IPW only: covariates of a pooled logistic exposure model. Empty selects
    /// the nonparametric daily exposure hazard.
    std::vector<std::string> covariates;
    /// Discrete estimators only: drop censored subjects instead of failing.
    bool allow_drop_censored = false;
};

/// Runs the full pipeline. The discrete estimators use P(D(t)) as the observed
/// death proportion on integer days. Throws UsageError for a pairing that does
/// not target the estimand (naive only estimates PAF_o, IPW only PAF_c).
PafCurve estimate(const Cohort& cohort, const EstimatorSpec& spec);

/// Pointwise percentile band on a fixed grid.
struct CurveWithBands {
    std::vector<double> grid;
    std::vector<double> estimate;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    EstimatorSpec spec;
    /// Per grid point, replicates that produced a defined value.
    std::vector<std::size_t> defined_replicates;
};

/// Nonparametric bootstrap: resample subjects with replacement, rerun the
/// pipeline, take the 2.5% and 97.5% quantiles per grid point. Replicate r
/// draws from a generator seeded by (seed, r), so results do not depend on the
/// number of threads. A point where more than half of the replicates are
/// undefined gets an undefined band.
CurveWithBands bootstrap_ci(const Cohort& cohort, const EstimatorSpec& spec, std::size_t replicates,
                            std::uint64_t seed, const std::vector<double>& grid, double level = 0.95);

/// One multistate PAF curve per level of a baseline covariate.
std::vector<std::pair<std::string, PafCurve>> stratified_paf(const Cohort& cohort, const std::string& covariate,
                                                             Estimand estimand);

/// CSV `t,estimate,lower,upper,defined`.
void write_report(std::ostream& os, const CurveWithBands& bands);
/// Same format for a point estimate on a grid (empty bounds).
void write_report(std::ostream& os, const PafCurve& curve, const std::vector<double>& grid);

/// JSON run manifest.
std::string manifest_json(const EstimatorSpec& spec, const Cohort& cohort, std::size_t replicates,
                          std::uint64_t seed);

/// Type-7 sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double prob);

} // namespace pafms

#endif
