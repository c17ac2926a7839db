#include "pafms/discrete.h"

#include "pafms/errors.h"
#include "pafms/parallel.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace pafms
{

namespace
{

bool at_risk(const DailyPanel& panel, std::size_t i, int s)
{
    return panel.a(i, s - 1) == 0 && panel.eps(i, s - 1) == 0;
}

bool terminal_unexposed(const DailyPanel& panel, std::size_t i, int s)
{
    return panel.eps(i, s) != 0 && panel.a(i, s) == 0;
}

StepCurve ratio_curve(int days, const std::vector<double>& num, const std::vector<double>& den)
{
    StepCurve curve({}, {}, 0.0);
    for (int t = 1; t <= days; ++t) {
        const auto k = static_cast<std::size_t>(t) - 1;
        curve.push(t, den[k] > 0.0 ? num[k] / den[k] : undefined_value);
    }
    return curve;
}

double expit(double eta)
{
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// -log(1 + exp(-eta)) and -log(1 + exp(eta)) without overflow.
double log_p(double eta)
{
    return -std::log1p(std::exp(-std::abs(eta))) - std::max(-eta, 0.0);
}

double log_one_minus_p(double eta)
{
    return log_p(-eta);
}

} // namespace

void PersonDayRecords::write_csv(std::ostream& os) const
{
    os << "id,day,at_risk,infected_today";
    for (const auto& name : covariate_names) {
        os << ',' << name;
    }
    os << '\n';
    for (const auto& row : rows) {
        os << ids[row.subject] << ',' << row.day << ',' << (row.at_risk_in_0 ? 1 : 0) << ','
           << (row.infected_today ? 1 : 0);
        for (const auto& v : covariates[row.subject]) {
            os << ',' << to_string(v);
        }
        os << '\n';
    }
}

PersonDayRecords expand_person_days(const DailyPanel& panel)
{
    PersonDayRecords out;
    out.ids             = panel.ids;
    out.covariate_names = panel.covariate_names;
    out.covariates      = panel.covariates;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        for (int s = 1; s <= panel.days && at_risk(panel, i, s); ++s) {
            PersonDayRow row;
            row.subject        = i;
            row.day            = s;
            row.infected_today = panel.a(i, s) == 1;
            row.terminal_today = terminal_unexposed(panel, i, s);
            out.rows.push_back(row);
        }
    }
    return out;
}

StepCurve naive_f01(const DailyPanel& panel)
{
    const auto days = static_cast<std::size_t>(panel.days);
    std::vector<double> num(days, 0.0);
    std::vector<double> den(days, 0.0);
    for (std::size_t i = 0; i < panel.size(); ++i) {
        bool on_path = true;
        for (int t = 1; t <= panel.days; ++t) {
            if (panel.eps(i, t - 1) == 0 && panel.a(i, t) == 1) {
                on_path = false;
            }
            if (!on_path) {
                break;
            }
            den[t - 1] += 1.0;
            if (panel.eps(i, t) == 1) {
                num[t - 1] += 1.0;
            }
        }
    }
    return ratio_curve(panel.days, num, den);
}

StepCurve observed_death_cif(const DailyPanel& panel)
{
    const auto days = static_cast<std::size_t>(panel.days);
    std::vector<double> num(days, 0.0);
    const std::vector<double> den(days, static_cast<double>(panel.size()));
    for (std::size_t i = 0; i < panel.size(); ++i) {
        for (int t = 1; t <= panel.days; ++t) {
            if (panel.eps(i, t) == 1) {
                num[t - 1] += 1.0;
            }
        }
    }
    return ratio_curve(panel.days, num, den);
}

ExposureModel ExposureModel::logistic(std::vector<std::string> terms, std::vector<double> beta,
                                      std::vector<double> std_errors, int iterations)
{
    if (terms.size() != beta.size()) {
        throw std::invalid_argument("ExposureModel: term and coefficient counts differ");
    }
    ExposureModel m;
    m.m_kind       = Kind::logistic;
    m.m_terms      = std::move(terms);
    m.m_beta       = std::move(beta);
    m.m_se         = std::move(std_errors);
    m.m_iterations = iterations;
    return m;
}

ExposureModel ExposureModel::nonparametric(std::vector<double> daily_hazard)
{
    ExposureModel m;
    m.m_kind   = Kind::nonparametric;
    m.m_hazard = std::move(daily_hazard);
    return m;
}

double ExposureModel::probability(const std::vector<double>& covariates, int day, bool terminal_today) const
{
    if (m_kind == Kind::nonparametric) {
        if (terminal_today || day < 1 || static_cast<std::size_t>(day) > m_hazard.size()) {
            return 0.0;
        }
        return m_hazard[static_cast<std::size_t>(day) - 1];
    }
    if (covariates.size() + 1 != m_beta.size()) {
        throw std::invalid_argument("ExposureModel: covariate count does not match the fit");
    }
    double eta = m_beta[0];
    for (std::size_t j = 0; j < covariates.size(); ++j) {
        eta += m_beta[j + 1] * covariates[j];
    }
    return expit(eta);
}

std::vector<std::vector<double>> numeric_covariates(const std::vector<std::string>& all_names,
                                                    const std::vector<std::vector<CovariateValue>>& values,
                                                    const std::vector<std::string>& selected)
{
    std::vector<std::size_t> columns;
    for (const auto& name : selected) {
        const auto it = std::find(all_names.begin(), all_names.end(), name);
        if (it == all_names.end()) {
            throw UsageError("unknown covariate '" + name + "'");
        }
        columns.push_back(static_cast<std::size_t>(it - all_names.begin()));
    }
    std::vector<std::vector<double>> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i].reserve(columns.size());
        for (std::size_t k = 0; k < columns.size(); ++k) {
            const auto* x = std::get_if<double>(&values[i][columns[k]]);
            if (x == nullptr) {
                throw UsageError("covariate '" + selected[k] + "' is categorical; only numeric covariates are supported");
            }
            out[i].push_back(*x);
        }
    }
    return out;
}

ExposureModel fit_pooled_logistic(const PersonDayRecords& records, const std::vector<std::string>& covariate_names)
{
    const auto x_subject = numeric_covariates(records.covariate_names, records.covariates, covariate_names);
    const std::size_t p  = covariate_names.size() + 1;
    std::vector<std::string> terms{"(intercept)"};
    terms.insert(terms.end(), covariate_names.begin(), covariate_names.end());

    std::size_t events = 0;
    for (const auto& row : records.rows) {
        events += row.infected_today ? 1 : 0;
    }
    if (events == 0 || events == records.rows.size()) {
        throw NumericalError("exposure model: person-day data need both exposed and unexposed days");
    }

    auto design = [&](const PersonDayRow& row, std::size_t j) {
        return j == 0 ? 1.0 : x_subject[row.subject][j - 1];
    };
    auto deviance = [&](const Eigen::VectorXd& beta) {
        long double ll = 0.0L;
        for (const auto& row : records.rows) {
            double eta = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                eta += beta[static_cast<Eigen::Index>(j)] * design(row, j);
            }
            ll += row.infected_today ? log_p(eta) : log_one_minus_p(eta);
        }
        return -2.0 * static_cast<double>(ll);
    };

    const auto np = static_cast<Eigen::Index>(p);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(np);
    // Start the intercept at the marginal log-odds.
    const double rate = static_cast<double>(events) / static_cast<double>(records.rows.size());
    beta[0]           = std::log(rate / (1.0 - rate));
    double dev        = deviance(beta);
    Eigen::MatrixXd info(np, np);

    for (int iter = 1; iter <= 100; ++iter) {
        Eigen::VectorXd score = Eigen::VectorXd::Zero(np);
        info.setZero();
        Eigen::VectorXd x(np);
        for (const auto& row : records.rows) {
            for (std::size_t j = 0; j < p; ++j) {
                x[static_cast<Eigen::Index>(j)] = design(row, j);
            }
            const double mu = expit(beta.dot(x));
            score += (static_cast<double>(row.infected_today) - mu) * x;
            info.selfadjointView<Eigen::Lower>().rankUpdate(x, mu * (1.0 - mu));
        }
        info = info.selfadjointView<Eigen::Lower>();
        const auto ldlt = info.ldlt();
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
            throw NumericalError("exposure model: singular information matrix (collinear or constant covariates?)");
        }
        const Eigen::VectorXd step = ldlt.solve(score);
        if (score.cwiseAbs().maxCoeff() < 1e-8 && step.cwiseAbs().maxCoeff() < 1e-6) {
            const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(np, np));
            std::vector<double> se(p);
            for (std::size_t j = 0; j < p; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                se[j]         = std::sqrt(cov(jj, jj));
            }
            return ExposureModel::logistic(terms, std::vector<double>(beta.data(), beta.data() + np), se, iter - 1);
        }
        double scale               = 1.0;
        Eigen::VectorXd candidate  = beta + step;
        double cand_dev            = deviance(candidate);
        for (int halving = 0; halving < 30 && !(cand_dev <= dev + 1e-12 * std::abs(dev)); ++halving) {
            scale *= 0.5;
            candidate = beta + scale * step;
            cand_dev  = deviance(candidate);
        }
        beta = candidate;
        dev  = cand_dev;
        for (std::size_t j = 0; j < p; ++j) {
            if (std::abs(beta[static_cast<Eigen::Index>(j)]) > 30.0) {
                throw NumericalError("exposure model diverged (|beta| > 30) for term '" + terms[j] +
                                     "'; the data look separated");
            }
        }
    }
    throw NumericalError("exposure model did not converge in 100 iterations");
}

ExposureModel nonparametric_exposure_model(const DailyPanel& panel)
{
    std::vector<double> hazard(static_cast<std::size_t>(panel.days), 0.0);
    for (int s = 1; s <= panel.days; ++s) {
        std::size_t risk = 0;
        std::size_t exposed = 0;
        std::size_t terminal = 0;
        for (std::size_t i = 0; i < panel.size(); ++i) {
            if (!at_risk(panel, i, s)) {
                continue;
            }
            ++risk;
            exposed += panel.a(i, s) == 1 ? 1 : 0;
            terminal += terminal_unexposed(panel, i, s) ? 1 : 0;
        }
        if (risk > terminal) {
            hazard[static_cast<std::size_t>(s) - 1] =
                static_cast<double>(exposed) / static_cast<double>(risk - terminal);
        }
    }
    return ExposureModel::nonparametric(std::move(hazard));
}

void WeightTable::write_csv(std::ostream& os) const
{
    os << "id,day,weight\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (int t = 1; t <= days; ++t) {
            os << ids[i] << ',' << t << ',' << format_double(at(i, t)) << '\n';
        }
    }
}

WeightTable compute_weights(const DailyPanel& panel, const ExposureModel& model)
{
    std::vector<std::vector<double>> x(panel.size());
    if (model.kind() == ExposureModel::Kind::logistic) {
        std::vector<std::string> names(model.terms().begin() + 1, model.terms().end());
        x = numeric_covariates(panel.covariate_names, panel.covariates, names);
    }

    WeightTable table;
    table.days = panel.days;
    table.ids  = panel.ids;
    table.values.assign(panel.size() * static_cast<std::size_t>(panel.days), 0.0);
    std::vector<int> first_degenerate(panel.size(), std::numeric_limits<int>::max());

    parallel_for(panel.size(), [&](std::size_t i) {
        double survival = 1.0; // prod (1 - p_hat) so far
        for (int t = 1; t <= panel.days; ++t) {
            if (at_risk(panel, i, t)) {
                const double q = 1.0 - model.probability(x[i], t, terminal_unexposed(panel, i, t));
                if (q <= 0.0) {
                    first_degenerate[i] = std::min(first_degenerate[i], t);
                }
                if (panel.a(i, t) == 1) {
                    break; // left the unexposed path; weight 0 from here
                }
                if (q <= 0.0) {
                    throw NumericalError("positivity violation: subject '" + panel.ids[i] + "' on day " +
                                         std::to_string(t) + " has exposure probability 1 but stayed unexposed");
                }
                survival *= q;
            }
            table.values[i * static_cast<std::size_t>(panel.days) + static_cast<std::size_t>(t) - 1] = 1.0 / survival;
        }
    });

    const auto first = std::min_element(first_degenerate.begin(), first_degenerate.end());
    if (first != first_degenerate.end() && *first != std::numeric_limits<int>::max()) {
        table.positivity_day = *first;
    }
    return table;
}

StepCurve ipw_f01(const DailyPanel& panel, const WeightTable& weights)
{
    if (weights.ids.size() != panel.size() || weights.days != panel.days) {
        throw std::invalid_argument("ipw_f01: weight table does not match the panel");
    }
    const auto days = static_cast<std::size_t>(panel.days);
    std::vector<double> num(days, 0.0);
    std::vector<double> den(days, 0.0);
    for (std::size_t i = 0; i < panel.size(); ++i) {
        for (int t = 1; t <= panel.days; ++t) {
            const double w = weights.at(i, t);
            den[t - 1] += w;
            if (panel.eps(i, t) == 1) {
                num[t - 1] += w;
            }
        }
    }
    return ratio_curve(panel.days, num, den);
}

} // namespace pafms
