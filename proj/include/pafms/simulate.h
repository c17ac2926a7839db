#ifndef PAFMS_SIMULATE_H
#define PAFMS_SIMULATE_H

#include "pafms/cohort.h"
#include "pafms/step_curve.h"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace pafms
{

/// Piecewise-constant hazard: `rate` applies on [previous until, until).
/// The hazard is 0 after the last piece; an infinite `until` makes the last
/// rate permanent.
struct HazardPiece {
    double until = std::numeric_limits<double>::infinity();
    double rate = 0.0;
};

class PiecewiseHazard
{
public:
    PiecewiseHazard() = default;
    explicit PiecewiseHazard(std::vector<HazardPiece> pieces);
    static PiecewiseHazard constant(double rate)
    {
        return PiecewiseHazard({{std::numeric_limits<double>::infinity(), rate}});
    }

    double rate(double t) const;
    /// Integral of the hazard over [0, t].
    double cumulative(double t) const;
    const std::vector<HazardPiece>& pieces() const
    {
        return m_pieces;
    }
    bool zero() const;

private:
    std::vector<HazardPiece> m_pieces;
};

/// Cause-specific hazards of the extended illness-death model.
struct HazardSpec {
    enum Transition
    {
        a01,
        a02,
        a03,
        a14,
        a15,
    };
    std::array<PiecewiseHazard, 5> alpha;
    /// Post-exposure hazards are multiplied by exp(gamma * inf_time).
    double gamma = 0.0;
    /// Rate of independent exponential censoring from admission.
    double censor_rate = 0.0;
    /// Administrative censoring time.
    double tau = 100.0;
    /// Round times up to whole days (a tie between exposure and end moves the end one day later).
    bool round_days = false;

    /// Throws UsageError for negative rates, unordered breakpoints or tau <= 0.
    void validate() const;
    static HazardSpec constant(double a01, double a02, double a03, double a14, double a15, double tau);
};

/// Parses `{"alpha01":[{"until":10,"rate":0.05},...], ..., "gamma":0,
/// "censor_rate":0, "tau":100, "round_days":false}`. A piece without `until`
/// lasts forever.
HazardSpec parse_hazard_spec(const std::string& json_text);
std::string hazard_spec_json(const HazardSpec& spec);

/// Draws n subjects; subject i uses its own stream seeded by (seed, i).
Cohort simulate_cohort(const HazardSpec& spec, std::size_t n, std::uint64_t seed);

/// Quadrature oracle curves on a grid.
struct AnalyticCurves {
    std::vector<double> grid;
    std::array<std::vector<double>, 6> p; ///< P_0l(0, t)
    std::vector<double> p030;             ///< death without exposure when alpha01 = 0
    std::vector<double> death;            ///< P(D(t) = 1) = P03 + P05
    std::vector<double> cpf;
    std::vector<double> paf_o;
    std::vector<double> paf_c;
    int refinements = 0;
};

/// Cumulative trapezoid rules on a mesh containing every breakpoint and grid
/// point, Richardson-extrapolated and halved until successive results differ
/// by less than 1e-6 in sup-norm. Throws UsageError if gamma != 0 and
/// NumericalError after 20 refinements without convergence.
AnalyticCurves analytic_curves(const HazardSpec& spec, const std::vector<double>& grid);

/// CSV `t,P00,P01,P02,P03,P04,P05,P030,PD,CPF,PAF_o,PAF_c`.
void write_analytic_csv(std::ostream& os, const AnalyticCurves& curves);

/// Counting-based estimates at every distinct event time of a complete-follow-up cohort.
struct BruteForceEstimates {
    StepCurve death;          ///< P(D(t) = 1)
    StepCurve cpf;            ///< P(D(t) = 1 | E(t) = 0)
    StepCurve counterfactual; ///< P030 with exposure treated as censoring
};

/// Throws DataError for censored subjects and UsageError for n > 10000.
BruteForceEstimates brute_force_estimates(const Cohort& cohort);

} // namespace pafms

#endif
