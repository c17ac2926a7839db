#include "pafms/continuous.h"
#include "pafms/errors.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pafms
{

StepCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> event_flags, TieOrder ties)
{
    if (times.size() != event_flags.size()) {
        throw UsageError("kaplan_meier: times and event flags differ in length");
    }
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return times[a] < times[b];
    });

    StepCurve curve(1.0);
    double surv         = 1.0;
    std::size_t at_risk = times.size();
    std::size_t k       = 0;
    while (k < order.size()) {
        const double t = times[order[k]];
        std::size_t d = 0, c = 0;
        std::size_t j = k;
        for (; j < order.size() && times[order[j]] == t; ++j) {
            (event_flags[order[j]] ? d : c) += 1;
        }
        if (d > 0) {
            const std::size_t risk = ties == TieOrder::events_first ? at_risk : at_risk - c;
            surv *= 1.0 - static_cast<double>(d) / static_cast<double>(risk);
            curve.push(t, surv);
        }
        at_risk -= d + c;
        k = j;
    }
    return curve;
}

StepCurve HazardIncrements::cumulative() const
{
    StepCurve curve(0.0);
    double cum = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        cum += increment(i);
        curve.push(times[i], cum);
    }
    return curve;
}

namespace
{

/// One sojourn in a transient state: at risk on (entry, exit], leaving to `to`
/// (-1 for a censoring).
struct Episode {
    int state;
    double entry;
    double exit;
    int to;
};

struct ProductIntegral {
    std::vector<StepCurve> curves;
    std::optional<double> truncated_at;
};

/**
 * Aalen-Johansen product integral for a model with `num` states started in
 * state 0 at time 0. All transitions sharing a time are processed together with
 * risk sets Y_k(t-) = #{entry < t <= exit}. An observed transition always has a
 * non-empty risk set, so the curves simply stop moving once the data run out;
 * if a transient state still holds mass at that point, the last exit time from
 * it is recorded as the truncation time.
 */
ProductIntegral aalen_johansen(const std::vector<Episode>& episodes, int num)
{
    const auto ns = static_cast<std::size_t>(num);
    std::vector<std::vector<double>> entries(ns), exits(ns);
    std::vector<const Episode*> events;
    for (const auto& e : episodes) {
        entries[static_cast<std::size_t>(e.state)].push_back(e.entry);
        exits[static_cast<std::size_t>(e.state)].push_back(e.exit);
        if (e.to >= 0) {
            events.push_back(&e);
        }
    }
    for (std::size_t k = 0; k < ns; ++k) {
        std::sort(entries[k].begin(), entries[k].end());
        std::sort(exits[k].begin(), exits[k].end());
    }
    std::sort(events.begin(), events.end(), [](const Episode* a, const Episode* b) {
        return a->exit < b->exit;
    });
    std::vector<bool> transient(ns, false);
    for (const auto& e : episodes) {
        transient[static_cast<std::size_t>(e.state)] = true;
    }

    ProductIntegral out;
    out.curves.reserve(ns);
    for (std::size_t k = 0; k < ns; ++k) {
        out.curves.emplace_back(k == 0 ? 1.0 : 0.0);
    }
    std::vector<double> p(ns, 0.0), next(ns);
    p[0] = 1.0;
    std::vector<std::size_t> entry_ptr(ns, 0), exit_ptr(ns, 0);
    std::vector<std::size_t> dn(ns * ns), dtot(ns), risk(ns);
    constexpr double mass_tol = 1e-14;

    std::size_t i = 0;
    while (i < events.size()) {
        const double t = events[i]->exit;
        std::fill(dn.begin(), dn.end(), 0);
        std::fill(dtot.begin(), dtot.end(), 0);
        std::size_t j = i;
        for (; j < events.size() && events[j]->exit == t; ++j) {
            const auto k = static_cast<std::size_t>(events[j]->state);
            dn[k * ns + static_cast<std::size_t>(events[j]->to)] += 1;
            dtot[k] += 1;
        }
        for (std::size_t k = 0; k < ns; ++k) {
            while (entry_ptr[k] < entries[k].size() && entries[k][entry_ptr[k]] < t) {
                ++entry_ptr[k];
            }
            while (exit_ptr[k] < exits[k].size() && exits[k][exit_ptr[k]] < t) {
                ++exit_ptr[k];
            }
            risk[k] = entry_ptr[k] - exit_ptr[k];
        }
        next = p;
        for (std::size_t k = 0; k < ns; ++k) {
            if (dtot[k] == 0 || p[k] == 0.0) {
                continue;
            }
            const double y = static_cast<double>(risk[k]);
            next[k] -= p[k] * (static_cast<double>(dtot[k]) / y);
            for (std::size_t l = 0; l < ns; ++l) {
                if (dn[k * ns + l] != 0) {
                    next[l] += p[k] * (static_cast<double>(dn[k * ns + l]) / y);
                }
            }
        }
        p = next;
        for (std::size_t k = 0; k < ns; ++k) {
            out.curves[k].push(t, p[k]);
        }
        i = j;
    }

    // Follow-up ended while mass was still in a transient state.
    for (std::size_t k = 0; k < ns; ++k) {
        if (transient[k] && p[k] > mass_tol && !exits[k].empty()) {
            const double last = exits[k].back();
            out.truncated_at  = out.truncated_at ? std::min(*out.truncated_at, last) : last;
        }
    }
    return out;
}

int code(State s)
{
    return static_cast<int>(s);
}

} // namespace

HazardIncrements nelson_aalen(const TransitionRecords& records, State from, State to)
{
    std::vector<double> entries, exits, event_times;
    for (const auto& r : records.rows) {
        if (r.from != from) {
            continue;
        }
        entries.push_back(r.t_start);
        exits.push_back(r.t_stop);
        if (r.to == to) {
            event_times.push_back(r.t_stop);
        }
    }
    std::sort(entries.begin(), entries.end());
    std::sort(exits.begin(), exits.end());
    std::sort(event_times.begin(), event_times.end());

    HazardIncrements out;
    std::size_t i = 0;
    while (i < event_times.size()) {
        const double t = event_times[i];
        std::size_t j  = i;
        while (j < event_times.size() && event_times[j] == t) {
            ++j;
        }
        const auto entered = static_cast<std::size_t>(std::lower_bound(entries.begin(), entries.end(), t) - entries.begin());
        const auto left    = static_cast<std::size_t>(std::lower_bound(exits.begin(), exits.end(), t) - exits.begin());
        out.times.push_back(t);
        out.events.push_back(j - i);
        out.at_risk.push_back(entered - left);
        i = j;
    }
    return out;
}

double OccupationCurves::max_row_sum_deviation() const
{
    std::vector<const StepCurve*> ptrs;
    for (const auto& c : p) {
        ptrs.push_back(&c);
    }
    double worst = 0.0;
    for (double t : union_grid(ptrs)) {
        double sum = 0.0;
        for (const auto& c : p) {
            sum += c(t);
        }
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

OccupationCurves aalen_johansen_extended(const TransitionRecords& records)
{
    std::vector<Episode> episodes;
    episodes.reserve(records.rows.size());
    for (const auto& r : records.rows) {
        episodes.push_back({code(r.from), r.t_start, r.t_stop, r.to == State::censored ? -1 : code(r.to)});
    }
    auto pi = aalen_johansen(episodes, num_states);
    OccupationCurves out;
    for (std::size_t k = 0; k < static_cast<std::size_t>(num_states); ++k) {
        out.p[k] = std::move(pi.curves[k]);
        out.p[k].truncated_at = pi.truncated_at;
    }
    out.truncated_at = pi.truncated_at;
    return out;
}

namespace
{

/// Per-subject summary of the first sojourn in state 0.
struct FirstExit {
    double time;
    State to;
};

std::vector<FirstExit> first_exits(const TransitionRecords& records)
{
    std::vector<FirstExit> out(records.num_subjects(), FirstExit{0.0, State::censored});
    for (const auto& r : records.rows) {
        if (r.from == State::admission) {
            out[r.subject] = {r.t_stop, r.to};
        }
    }
    return out;
}

/// Terminal outcome of each subject irrespective of exposure.
std::vector<FirstExit> final_outcomes(const TransitionRecords& records)
{
    std::vector<FirstExit> out(records.num_subjects(), FirstExit{0.0, State::censored});
    for (const auto& r : records.rows) {
        if (r.to != State::exposed) {
            out[r.subject] = {r.t_stop, r.to};
        }
    }
    return out;
}

void require_nonempty(const TransitionRecords& records, const char* what)
{
    if (records.rows.empty()) {
        throw UsageError(std::string(what) + ": no transition records");
    }
}

} // namespace

StepCurve overall_death_risk(const TransitionRecords& records)
{
    require_nonempty(records, "overall_death_risk");
    // 0 = in unit, 1 = discharged alive, 2 = died
    std::vector<Episode> episodes;
    for (const auto& f : final_outcomes(records)) {
        int to = -1;
        if (f.to == State::death_unexposed || f.to == State::death_exposed) {
            to = 2;
        }
        else if (f.to == State::discharge_unexposed || f.to == State::discharge_exposed) {
            to = 1;
        }
        episodes.push_back({0, 0.0, f.time, to});
    }
    auto pi            = aalen_johansen(episodes, 3);
    StepCurve out      = std::move(pi.curves[2]);
    out.truncated_at   = pi.truncated_at;
    return out;
}

StepCurve cpf_unexposed(const TransitionRecords& records)
{
    require_nonempty(records, "cpf_unexposed");
    std::vector<Episode> episodes;
    for (const auto& f : first_exits(records)) {
        episodes.push_back({0, 0.0, f.time, f.to == State::censored ? -1 : code(f.to)});
    }
    auto pi = aalen_johansen(episodes, 4);
    const auto& p00 = pi.curves[0];
    const auto& p02 = pi.curves[2];
    const auto& p03 = pi.curves[3];
    StepCurve out(0.0);
    for (std::size_t k = 0; k < p00.size(); ++k) {
        const double t     = p00.times()[k];
        const double denom = p00.values()[k] + p02.values()[k] + p03.values()[k];
        out.push(t, denom > 0.0 ? p03.values()[k] / denom : undefined_value);
    }
    out.truncated_at = pi.truncated_at;
    return out;
}

StepCurve cif_counterfactual(const TransitionRecords& records)
{
    require_nonempty(records, "cif_counterfactual");
    // 0 = unexposed in unit, 1 = discharged, 2 = died; exposure becomes a censoring.
    std::vector<Episode> episodes;
    for (const auto& f : first_exits(records)) {
        int to = -1;
        if (f.to == State::death_unexposed) {
            to = 2;
        }
        else if (f.to == State::discharge_unexposed) {
            to = 1;
        }
        episodes.push_back({0, 0.0, f.time, to});
    }
    auto pi          = aalen_johansen(episodes, 3);
    StepCurve out    = std::move(pi.curves[2]);
    out.truncated_at = pi.truncated_at;
    return out;
}

StepCurve exposure_free_survival(const TransitionRecords& records)
{
    std::vector<double> times;
    std::vector<std::uint8_t> flags;
    for (const auto& f : first_exits(records)) {
        times.push_back(f.time);
        // Leaving the no-exposure risk set other than by an outcome is the "event".
        flags.push_back(f.to == State::exposed || f.to == State::censored ? 1 : 0);
    }
    return kaplan_meier(times, flags, TieOrder::censorings_first);
}

StepCurve ht_cif(const TransitionRecords& records)
{
    require_nonempty(records, "ht_cif");
    const StepCurve surv = exposure_free_survival(records);
    std::vector<double> death_times;
    for (const auto& f : first_exits(records)) {
        if (f.to == State::death_unexposed) {
            death_times.push_back(f.time);
        }
    }
    std::sort(death_times.begin(), death_times.end());
    const double n = static_cast<double>(records.num_subjects());
    StepCurve out(0.0);
    double sum    = 0.0;
    std::size_t i = 0;
    while (i < death_times.size()) {
        const double t = death_times[i];
        std::size_t j  = i;
        while (j < death_times.size() && death_times[j] == t) {
            ++j;
        }
        const double s = surv.left_limit(t);
        if (!(s > 0.0)) {
            throw NumericalError("ht_cif: exposure-free survival is 0 before death at t=" + format_double(t) +
                                 " (positivity failure)");
        }
        sum += static_cast<double>(j - i) / s;
        out.push(t, sum / n);
        i = j;
    }
    return out;
}

} // namespace pafms
