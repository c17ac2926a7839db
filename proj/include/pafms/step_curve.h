#ifndef PAFMS_STEP_CURVE_H
#define PAFMS_STEP_CURVE_H

#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pafms
{

inline constexpr double undefined_value = std::numeric_limits<double>::quiet_NaN();

/**
 * Right-continuous piecewise-constant function of time.
 *
 * value(t) is the value at the largest jump time <= t, or `initial` before the
 * first jump. A NaN value marks the curve as undefined from that jump on (until
 * a later jump redefines it). Evaluation outside the observed range clamps to
 * the boundary values.
 */
class StepCurve
{
public:
    StepCurve() = default;
    explicit StepCurve(double initial)
        : m_initial(initial)
    {
    }
    StepCurve(std::vector<double> times, std::vector<double> values, double initial = 0.0);

    /// Appends a jump; `t` must exceed the last jump time. A jump to the value
    /// already held is stored anyway so that the grid is preserved.
    void push(double t, double value);

    double operator()(double t) const
    {
        return value(t);
    }
    double value(double t) const;
    /// Value at t-, i.e. at the largest jump strictly before t.
    double left_limit(double t) const;
    bool defined_at(double t) const
    {
        return !std::isnan(value(t));
    }

    /// Evaluates the curve on an arbitrary grid.
    std::vector<double> evaluate(std::span<const double> grid) const;

    const std::vector<double>& times() const
    {
        return m_times;
    }
    const std::vector<double>& values() const
    {
        return m_values;
    }
    double initial() const
    {
        return m_initial;
    }
    std::size_t size() const
    {
        return m_times.size();
    }
    bool empty() const
    {
        return m_times.empty();
    }

    /// Time after which the estimate is no longer identified because a risk set
    /// with positive probability mass ran empty.
    std::optional<double> truncated_at;

private:
    double m_initial = 0.0;
    std::vector<double> m_times;
    std::vector<double> m_values;
};

/// Sorted union of the jump times of all curves.
std::vector<double> union_grid(std::span<const StepCurve* const> curves);

/// Integer days 1..ceil(horizon).
std::vector<double> day_grid(double horizon);

/// Two-column CSV `t,value` at the jump times; undefined values are written as `NA`.
void write_csv(std::ostream& os, const StepCurve& curve);

/// JSON object with times, values (null for undefined) and flags.
std::string to_json(const StepCurve& curve, int indent = -1);

/// Shortest round-trip decimal representation used by all text exports.
std::string format_double(double x);

} // namespace pafms

#endif
