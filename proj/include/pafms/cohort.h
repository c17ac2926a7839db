#ifndef PAFMS_COHORT_H
#define PAFMS_COHORT_H

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pafms
{

enum class EndStatus
{
    death,
    discharge,
    censored,
};

const char* to_string(EndStatus s);

/// Baseline covariate value: numeric or categorical.
using CovariateValue = std::variant<double, std::string>;

std::string to_string(const CovariateValue& v);

struct Subject {
    std::string id;
    std::optional<double> inf_time; ///< days since admission; empty = never exposed while observed
    double end_time = 0.0;
    EndStatus end_status = EndStatus::censored;
    std::vector<CovariateValue> covariates; ///< ordered like Cohort::covariate_names()

    bool exposed() const
    {
        return inf_time.has_value();
    }
    bool operator==(const Subject&) const = default;
};

/// How a record with inf_time == end_time is resolved.
struct TiePolicy {
    enum class Kind
    {
        reject,
        shift,
    };
    Kind kind = Kind::shift;
    double epsilon = 1e-3;

    static TiePolicy reject()
    {
        return {Kind::reject, 0.0};
    }
    static TiePolicy shift(double eps = 1e-3)
    {
        return {Kind::shift, eps};
    }
    /// Parses `reject` or `shift:<eps>` (plain `shift` uses the default epsilon).
    static TiePolicy parse(const std::string& text);
    std::string to_string() const;
};

/// Structured warning attached to an adjusted or dropped record.
struct Diagnostic {
    std::size_t row = 0; ///< 1-based source line, 0 when not from a file
    std::string id;
    std::string message;
};

/**
 * Immutable collection of validated subjects.
 *
 * Invariants: ids are unique, end_time > 0, 0 < inf_time < end_time when
 * present, and horizon >= every end_time.
 */
class Cohort
{
public:
    Cohort() = default;
    /// Validates every invariant; throws DataError naming the offending subject.
    /// Without an explicit horizon the largest end time is used.
    Cohort(std::vector<Subject> subjects, std::vector<std::string> covariate_names, TiePolicy tie_policy = {},
           std::optional<double> horizon = std::nullopt, std::vector<Diagnostic> diagnostics = {});

    const std::vector<Subject>& subjects() const
    {
        return m_subjects;
    }
    const Subject& operator[](std::size_t i) const
    {
        return m_subjects[i];
    }
    std::size_t size() const
    {
        return m_subjects.size();
    }
    bool empty() const
    {
        return m_subjects.empty();
    }
    const std::vector<std::string>& covariate_names() const
    {
        return m_covariate_names;
    }
    /// Index of a covariate column; throws UsageError if absent.
    std::size_t covariate_index(const std::string& name) const;
    const TiePolicy& tie_policy() const
    {
        return m_tie_policy;
    }
    double horizon() const
    {
        return m_horizon;
    }
    const std::vector<Diagnostic>& diagnostics() const
    {
        return m_diagnostics;
    }
    /// True when every time is a whole number of days.
    bool integer_times() const;
    bool any_censored() const;

    /// Sub-cohort of the given subject indices (ids are kept, duplicates are
    /// renamed `<id>#<k>` so that the result stays a valid cohort).
    Cohort subset(const std::vector<std::size_t>& indices) const;

private:
    std::vector<Subject> m_subjects;
    std::vector<std::string> m_covariate_names;
    TiePolicy m_tie_policy;
    double m_horizon = 0.0;
    std::vector<Diagnostic> m_diagnostics;
};

/// Parses the cohort CSV (`id,inf_time,end_time,end_status[,<covariate>...]`).
/// Throws ParseError naming the row for malformed input.
Cohort parse_cohort(std::istream& source, TiePolicy tie_policy = {}, std::optional<double> horizon = std::nullopt);
Cohort read_cohort_file(const std::string& path, TiePolicy tie_policy = {},
                        std::optional<double> horizon = std::nullopt);
/// Writes the cohort back in the input format.
void write_cohort(std::ostream& os, const Cohort& cohort);

struct CohortSummary {
    std::size_t n = 0;
    std::size_t exposed = 0;
    std::size_t unexposed_deaths = 0;
    std::size_t unexposed_discharges = 0;
    std::size_t unexposed_censored = 0;
    std::size_t exposed_deaths = 0;
    std::size_t exposed_discharges = 0;
    std::size_t exposed_censored = 0;
    double person_days = 0.0;
    double person_days_exposed = 0.0;
};

CohortSummary summarize(const Cohort& cohort);

// ---------------------------------------------------------------------------
// Counting-process view of the extended illness-death model.
//
// 0 admission, 1 exposed, 2 discharge without exposure, 3 death without
// exposure, 4 discharge after exposure, 5 death after exposure.

enum class State : std::int8_t
{
    admission = 0,
    exposed = 1,
    discharge_unexposed = 2,
    death_unexposed = 3,
    discharge_exposed = 4,
    death_exposed = 5,
    censored = -1,
};

inline constexpr int num_states = 6;

struct TransitionRow {
    std::size_t subject = 0; ///< index into TransitionRecords::subject_ids
    State from = State::admission;
    State to = State::censored;
    double t_start = 0.0;
    double t_stop = 0.0;
    bool operator==(const TransitionRow&) const = default;
};

struct TransitionRecords {
    std::vector<TransitionRow> rows;
    std::vector<std::string> subject_ids;
    std::vector<std::string> covariate_names;
    std::vector<std::vector<CovariateValue>> covariates; ///< per subject
    TiePolicy tie_policy;
    double horizon = 0.0;

    std::size_t num_subjects() const
    {
        return subject_ids.size();
    }
};

TransitionRecords to_transitions(const Cohort& cohort);
/// Inverse of to_transitions.
Cohort from_transitions(const TransitionRecords& records);

// ---------------------------------------------------------------------------
// Integer-day panel (complete follow-up only).

struct DailyPanel {
    int days = 0; ///< grid 1..days, days = ceil(horizon)
    std::vector<std::string> ids;
    std::vector<std::vector<CovariateValue>> covariates;
    std::vector<std::string> covariate_names;
    /// exposure[i][s-1] = A_i(s), outcome[i][s-1] = eps_i(s) for s = 1..days.
    std::vector<std::vector<std::uint8_t>> exposure;
    std::vector<std::vector<std::uint8_t>> outcome;
    std::vector<std::string> dropped_ids; ///< censored subjects removed by allow_drop
    std::vector<Diagnostic> diagnostics;

    std::size_t size() const
    {
        return ids.size();
    }
    /// A_i(s) with A_i(0) = 0.
    std::uint8_t a(std::size_t i, int s) const
    {
        return s <= 0 ? 0 : exposure[i][static_cast<std::size_t>(std::min(s, days)) - 1];
    }
    /// eps_i(s) with eps_i(0) = 0.
    std::uint8_t eps(std::size_t i, int s) const
    {
        return s <= 0 ? 0 : outcome[i][static_cast<std::size_t>(std::min(s, days)) - 1];
    }
};

/// Throws DataError listing censored ids unless allow_drop is set.
DailyPanel discretize(const Cohort& cohort, bool allow_drop = false);

} // namespace pafms

#endif
