#ifndef PAFMS_CONTINUOUS_H
#define PAFMS_CONTINUOUS_H

#include "pafms/cohort.h"
#include "pafms/step_curve.h"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pafms
{

/// Ordering of events and censorings that share a time.
enum class TieOrder
{
    /// Subjects censored at t are still at risk at t (the usual Kaplan-Meier convention).
    events_first,
    /// Subjects censored at t leave the risk set before the events at t are counted.
    /// This is the convention for a censoring-distribution estimate used as an
    /// inverse-probability weight.
    censorings_first,
};

/// Kaplan-Meier survival curve. `event_flags[i] != 0` marks an event, 0 a censoring.
/// The curve starts at 1 and jumps only at event times.
StepCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> event_flags,
                       TieOrder ties = TieOrder::events_first);

/// Nelson-Aalen increments of one transition: dN_kl(t) and Y_k(t-) at each
/// time with at least one k -> l transition.
struct HazardIncrements {
    std::vector<double> times;
    std::vector<std::size_t> events;
    std::vector<std::size_t> at_risk;

    double increment(std::size_t i) const
    {
        return static_cast<double>(events[i]) / static_cast<double>(at_risk[i]);
    }
    /// Cumulative hazard as a step curve.
    StepCurve cumulative() const;
};

HazardIncrements nelson_aalen(const TransitionRecords& records, State from, State to);

/// Occupation probabilities P_0l(0, t), l = 0..5, of the extended illness-death model.
struct OccupationCurves {
    std::array<StepCurve, num_states> p;
    std::optional<double> truncated_at;

    const StepCurve& operator[](State s) const
    {
        return p[static_cast<std::size_t>(s)];
    }
    /// Largest |sum_l P_0l(t) - 1| over all jump times.
    double max_row_sum_deviation() const;
};

/// Product-integral (Aalen-Johansen) estimator for the six-state model under the
/// Markov assumption. Simultaneous transitions are processed together with risk
/// sets evaluated at t-.
OccupationCurves aalen_johansen_extended(const TransitionRecords& records);

/// Overall death risk P(D(t) = 1) from the two-outcome competing-risks model in
/// which death and discharge are pooled across exposure status.
StepCurve overall_death_risk(const TransitionRecords& records);

/// Death risk among the unexposed at t, P03 / (P00 + P02 + P03), from the
/// competing-risks model with exposure, discharge and death as competing events.
/// NaN from the first time at which nobody is left unexposed.
StepCurve cpf_unexposed(const TransitionRecords& records);

/// Death CIF of the model in which exposure is recoded as censoring at inf_time.
StepCurve cif_counterfactual(const TransitionRecords& records);

/// Same quantity as an inverse-probability-weighted average:
/// (1/n) sum_i N03_i(t) / S(T_i-), where S is the Kaplan-Meier estimate of
/// remaining in the no-exposure risk set (exposure and loss to follow-up as
/// events, unexposed death or discharge as censoring, censorings first at ties).
/// Throws NumericalError if a contributing death has weight 1/0.
StepCurve ht_cif(const TransitionRecords& records);

/// Kaplan-Meier estimate of the exposure-free survival S01 used by ht_cif.
StepCurve exposure_free_survival(const TransitionRecords& records);

} // namespace pafms

#endif
