#include "pafms/step_curve.h"
#include "pafms/errors.h"

#include <algorithm>
#include <charconv>
#include <ostream>

#include <json.hpp>

namespace pafms
{

StepCurve::StepCurve(std::vector<double> times, std::vector<double> values, double initial)
    : m_initial(initial)
    , m_times(std::move(times))
    , m_values(std::move(values))
{
    if (m_times.size() != m_values.size()) {
        throw UsageError("StepCurve: times and values differ in length");
    }
    for (std::size_t i = 1; i < m_times.size(); ++i) {
        if (!(m_times[i] > m_times[i - 1])) {
            throw UsageError("StepCurve: jump times must be strictly increasing");
        }
    }
}

void StepCurve::push(double t, double value)
{
    if (!m_times.empty() && !(t > m_times.back())) {
        throw UsageError("StepCurve::push: jump times must be strictly increasing");
    }
    m_times.push_back(t);
    m_values.push_back(value);
}

double StepCurve::value(double t) const
{
    auto it = std::upper_bound(m_times.begin(), m_times.end(), t);
    if (it == m_times.begin()) {
        return m_initial;
    }
    return m_values[static_cast<std::size_t>(it - m_times.begin()) - 1];
}

double StepCurve::left_limit(double t) const
{
    auto it = std::lower_bound(m_times.begin(), m_times.end(), t);
    if (it == m_times.begin()) {
        return m_initial;
    }
    return m_values[static_cast<std::size_t>(it - m_times.begin()) - 1];
}

std::vector<double> StepCurve::evaluate(std::span<const double> grid) const
{
    std::vector<double> out;
    out.reserve(grid.size());
    for (double t : grid) {
        out.push_back(value(t));
    }
    return out;
}

std::vector<double> union_grid(std::span<const StepCurve* const> curves)
{
    std::vector<double> grid;
    for (const auto* c : curves) {
        grid.insert(grid.end(), c->times().begin(), c->times().end());
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

std::vector<double> day_grid(double horizon)
{
    std::vector<double> grid;
    const auto days = static_cast<long>(std::ceil(horizon));
    for (long d = 1; d <= days; ++d) {
        grid.push_back(static_cast<double>(d));
    }
    return grid;
}

std::string format_double(double x)
{
    if (std::isnan(x)) {
        return "NA";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const StepCurve& curve)
{
    os << "t,value\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        os << format_double(curve.times()[i]) << ',' << format_double(curve.values()[i]) << '\n';
    }
}

std::string to_json(const StepCurve& curve, int indent)
{
    nlohmann::json j;
    j["initial"] = std::isnan(curve.initial()) ? nlohmann::json(nullptr) : nlohmann::json(curve.initial());
    j["t"]       = curve.times();
    auto values  = nlohmann::json::array();
    bool any_undefined = std::isnan(curve.initial());
    for (double v : curve.values()) {
        if (std::isnan(v)) {
            values.push_back(nullptr);
            any_undefined = true;
        }
        else {
            values.push_back(v);
        }
    }
    j["value"]        = std::move(values);
    j["undefined"]    = any_undefined;
    j["truncated_at"] = curve.truncated_at ? nlohmann::json(*curve.truncated_at) : nlohmann::json(nullptr);
    return j.dump(indent);
}

} // namespace pafms
