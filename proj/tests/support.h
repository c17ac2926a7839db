// Shared fixtures and independent reference computations for the tests.
#ifndef PAFMS_TESTS_SUPPORT_H
#define PAFMS_TESTS_SUPPORT_H

#include "pafms/cohort.h"
#include "pafms/step_curve.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace support
{

using pafms::Cohort;
using pafms::EndStatus;
using pafms::Subject;

struct Row {
    std::string id;
    std::optional<double> inf;
    double end;
    EndStatus status;
};

inline Cohort make_cohort(const std::vector<Row>& rows, std::optional<double> horizon = std::nullopt)
{
    std::vector<Subject> subjects;
    for (const auto& r : rows) {
        subjects.push_back({r.id, r.inf, r.end, r.status, {}});
    }
    return Cohort(std::move(subjects), {}, pafms::TiePolicy::reject(), horizon);
}

/// A dies unexposed on day 1; B is exposed on day 1 and dies on day 2.
inline Cohort two_subject()
{
    return make_cohort({{"A", std::nullopt, 1.0, EndStatus::death}, {"B", 1.0, 2.0, EndStatus::death}});
}

/// Small random cohort with many ties. Integer times in 1..max_day when
/// `integer` is set, otherwise continuous times.
inline Cohort random_cohort(std::mt19937_64& rng, std::size_t n, bool integer, double censor_share, int max_day = 12)
{
    std::uniform_int_distribution<int> day(1, max_day);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Subject> subjects;
    for (std::size_t i = 0; i < n; ++i) {
        Subject s;
        s.id        = "s" + std::to_string(i);
        double end  = integer ? day(rng) : 0.05 + max_day * unit(rng);
        const double u = unit(rng);
        s.end_status   = u < censor_share ? EndStatus::censored : (unit(rng) < 0.4 ? EndStatus::death : EndStatus::discharge);
        if (unit(rng) < 0.35) {
            if (integer) {
                end = std::max(end, 2.0);
                std::uniform_int_distribution<int> inf(1, static_cast<int>(end) - 1);
                s.inf_time = inf(rng);
            }
            else {
                s.inf_time = end * (0.05 + 0.9 * unit(rng));
            }
        }
        s.end_time = end;
        subjects.push_back(s);
    }
    return Cohort(std::move(subjects), {}, pafms::TiePolicy::reject());
}

/// Sup of |a - b| over a grid; NaN matches only NaN.
inline double sup_distance(const pafms::StepCurve& a, const pafms::StepCurve& b, const std::vector<double>& grid)
{
    double d = 0.0;
    for (double t : grid) {
        const double x = a(t), y = b(t);
        if (std::isnan(x) || std::isnan(y)) {
            d = std::max(d, std::isnan(x) && std::isnan(y) ? 0.0 : INFINITY);
        }
        else {
            d = std::max(d, std::abs(x - y));
        }
    }
    return d;
}

inline std::vector<double> event_times(const Cohort& c)
{
    std::set<double> t;
    for (const auto& s : c.subjects()) {
        t.insert(s.end_time);
        if (s.inf_time) {
            t.insert(*s.inf_time);
        }
    }
    return {t.begin(), t.end()};
}

/// Occupation probabilities of the six-state model by a matrix product
/// integral prod (I + dA(t)) over the distinct transition times, built from
/// per-subject risk intervals. Returns P[0][l] evaluated at each time.
inline std::vector<std::array<double, 6>> matrix_product_integral(const Cohort& c, const std::vector<double>& times)
{
    std::vector<std::array<double, 6>> out;
    Eigen::Matrix<double, 6, 6> P = Eigen::Matrix<double, 6, 6>::Identity();
    for (double t : times) {
        // Risk sets and transition counts at t.
        double y0 = 0, y1 = 0;
        Eigen::Matrix<double, 6, 6> dn = Eigen::Matrix<double, 6, 6>::Zero();
        for (const auto& s : c.subjects()) {
            const double exit0 = s.inf_time ? *s.inf_time : s.end_time;
            if (t <= exit0) {
                y0 += 1;
            }
            if (s.inf_time && *s.inf_time < t && t <= s.end_time) {
                y1 += 1;
            }
            if (s.inf_time && *s.inf_time == t) {
                dn(0, 1) += 1;
            }
            if (s.end_time == t && s.end_status != EndStatus::censored) {
                const bool death = s.end_status == EndStatus::death;
                if (s.inf_time) {
                    dn(1, death ? 5 : 4) += 1;
                }
                else {
                    dn(0, death ? 3 : 2) += 1;
                }
            }
        }
        Eigen::Matrix<double, 6, 6> step = Eigen::Matrix<double, 6, 6>::Identity();
        for (int k : {0, 1}) {
            const double y = k == 0 ? y0 : y1;
            if (y <= 0) {
                continue;
            }
            for (int l = 0; l < 6; ++l) {
                if (l != k && dn(k, l) > 0) {
                    step(k, l) = dn(k, l) / y;
                    step(k, k) -= dn(k, l) / y;
                }
            }
        }
        P = P * step;
        std::array<double, 6> row{};
        for (int l = 0; l < 6; ++l) {
            row[static_cast<std::size_t>(l)] = P(0, l);
        }
        out.push_back(row);
    }
    return out;
}

} // namespace support

#endif
