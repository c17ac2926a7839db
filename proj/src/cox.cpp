#include "pafms/cox.h"

#include "pafms/discrete.h"
#include "pafms/errors.h"
#include "pafms/step_curve.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace pafms
{

namespace
{

constexpr double z975 = 1.959963984540054;

struct Derivatives {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd info;
};

// Risk set at an event time t: start < t <= stop. Times are swept in
// decreasing order, adding rows with stop >= t and removing rows with
// start >= t. Covariates are centred to keep exp() in range.
Derivatives evaluate(const CoxData& data, const Eigen::VectorXd& beta, bool second_order)
{
    const std::size_t n = data.size();
    const auto p        = beta.size();
    Eigen::VectorXd centre = Eigen::VectorXd::Zero(p);
    for (const auto& row : data.x) {
        centre += Eigen::Map<const Eigen::VectorXd>(row.data(), p);
    }
    if (n > 0) {
        centre /= static_cast<double>(n);
    }
    std::vector<Eigen::VectorXd> xc(n);
    std::vector<double> risk(n);
    for (std::size_t i = 0; i < n; ++i) {
        xc[i]   = Eigen::Map<const Eigen::VectorXd>(data.x[i].data(), p) - centre;
        risk[i] = std::exp(xc[i].dot(beta));
    }

    std::vector<std::size_t> by_stop(n);
    std::iota(by_stop.begin(), by_stop.end(), 0);
    std::vector<std::size_t> by_start = by_stop;
    std::sort(by_stop.begin(), by_stop.end(), [&](auto a, auto b) { return data.stop[a] > data.stop[b]; });
    std::sort(by_start.begin(), by_start.end(), [&](auto a, auto b) { return data.start[a] > data.start[b]; });

    using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    long double s0 = 0.0L;
    LVec s1        = LVec::Zero(p);
    LMat s2        = LMat::Zero(p, p);
    auto accumulate = [&](std::size_t i, long double sign) {
        const long double r = sign * risk[i];
        const LVec x        = xc[i].cast<long double>();
        s0 += r;
        s1 += r * x;
        if (second_order) {
            s2 += r * x * x.transpose();
        }
    };

    Derivatives d;
    long double ll = 0.0L;
    LVec score     = LVec::Zero(p);
    LMat info      = LMat::Zero(p, p);
    std::size_t a  = 0; // next row to add
    std::size_t r  = 0; // next row to remove
    std::size_t k  = 0;
    while (k < n) {
        const double t = data.stop[by_stop[k]];
        // Events at t among rows with stop == t.
        std::size_t k_end = k;
        while (k_end < n && data.stop[by_stop[k_end]] == t) {
            ++k_end;
        }
        std::size_t events = 0;
        LVec xsum          = LVec::Zero(p);
        for (std::size_t j = k; j < k_end; ++j) {
            const auto i = by_stop[j];
            if (data.event[i]) {
                ++events;
                xsum += xc[i].cast<long double>();
            }
        }
        k = k_end;
        if (events == 0) {
            continue;
        }
        while (a < n && data.stop[by_stop[a]] >= t) {
            accumulate(by_stop[a++], 1.0L);
        }
        while (r < n && data.start[by_start[r]] >= t) {
            // Only rows already added can be removed; a row with start >= t
            // has stop > t and was added above.
            accumulate(by_start[r++], -1.0L);
        }
        const long double m = static_cast<long double>(events);
        ll += xsum.dot(beta.cast<long double>()) - m * std::log(s0);
        const LVec mean = s1 / s0;
        score += xsum - m * mean;
        if (second_order) {
            info += m * (s2 / s0 - mean * mean.transpose());
        }
    }
    d.loglik = static_cast<double>(ll);
    d.score  = score.cast<double>();
    if (second_order) {
        d.info = info.cast<double>();
    }
    return d;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_beta(const CoxData& data, const std::vector<double>& beta)
{
    if (beta.size() != data.terms.size()) {
        throw std::invalid_argument("cox: coefficient count does not match the terms");
    }
}

} // namespace

const char* to_string(CoxOutcome o)
{
    return o == CoxOutcome::death ? "death" : "discharge";
}

std::size_t CoxData::num_events() const
{
    return static_cast<std::size_t>(std::count(event.begin(), event.end(), 1));
}

CoxData cox_data_td(const TransitionRecords& records, CoxOutcome outcome, const std::vector<std::string>& extra_covariates)
{
    const auto extra = numeric_covariates(records.covariate_names, records.covariates, extra_covariates);
    const State target0 = outcome == CoxOutcome::death ? State::death_unexposed : State::discharge_unexposed;
    const State target1 = outcome == CoxOutcome::death ? State::death_exposed : State::discharge_exposed;
    CoxData data;
    data.terms.push_back("exposed");
    data.terms.insert(data.terms.end(), extra_covariates.begin(), extra_covariates.end());
    for (const auto& row : records.rows) {
        const bool exposed = row.from == State::exposed;
        data.start.push_back(row.t_start);
        data.stop.push_back(row.t_stop);
        data.event.push_back(row.to == (exposed ? target1 : target0) ? 1 : 0);
        std::vector<double> x{exposed ? 1.0 : 0.0};
        x.insert(x.end(), extra[row.subject].begin(), extra[row.subject].end());
        data.x.push_back(std::move(x));
    }
    return data;
}

CoxData cox_data_markov(const TransitionRecords& records, CoxOutcome outcome)
{
    const State target = outcome == CoxOutcome::death ? State::death_exposed : State::discharge_exposed;
    CoxData data;
    data.terms = {"inf_time"};
    for (const auto& row : records.rows) {
        if (row.from != State::exposed) {
            continue;
        }
        data.start.push_back(row.t_start);
        data.stop.push_back(row.t_stop);
        data.event.push_back(row.to == target ? 1 : 0);
        data.x.push_back({row.t_start});
    }
    return data;
}

double cox_log_partial_likelihood(const CoxData& data, const std::vector<double>& beta)
{
    check_beta(data, beta);
    return evaluate(data, to_eigen(beta), false).loglik;
}

std::vector<double> cox_score(const CoxData& data, const std::vector<double>& beta)
{
    check_beta(data, beta);
    const auto d = evaluate(data, to_eigen(beta), false);
    return {d.score.data(), d.score.data() + d.score.size()};
}

CoxFit fit_cox(const CoxData& data, const std::string& outcome_label)
{
    CoxFit fit;
    fit.outcome  = outcome_label;
    fit.n_events = data.num_events();
    if (fit.n_events == 0) {
        throw NumericalError("cox (" + outcome_label + "): no events");
    }
    const auto p         = static_cast<Eigen::Index>(data.terms.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    auto d               = evaluate(data, beta, true);
    fit.loglik_null      = d.loglik;
    fit.loglik_trace.push_back(d.loglik);

    for (int iter = 0;; ++iter) {
        const auto ldlt = d.info.ldlt();
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
            throw NumericalError("cox (" + outcome_label + "): singular information matrix");
        }
        const Eigen::VectorXd step = ldlt.solve(d.score);
        // A vanishing score alone is not enough: under separation the score
        // decays while the Newton step stays near 1.
        if (d.score.cwiseAbs().maxCoeff() < 1e-8 && step.cwiseAbs().maxCoeff() < 1e-6) {
            fit.iterations = iter;
            break;
        }
        if (iter == 100) {
            std::string trace;
            for (double ll : fit.loglik_trace) {
                trace += ' ' + format_double(ll);
            }
            throw NumericalError("cox (" + outcome_label + "): no convergence after 100 iterations; loglik trace:" +
                                 trace);
        }
        double scale               = 1.0;
        Eigen::VectorXd candidate  = beta + step;
        auto next                  = evaluate(data, candidate, true);
        for (int h = 0; h < 30 && !(next.loglik >= d.loglik - 1e-12 * std::abs(d.loglik)); ++h) {
            scale *= 0.5;
            candidate = beta + scale * step;
            next      = evaluate(data, candidate, true);
        }
        beta = candidate;
        d    = std::move(next);
        fit.loglik_trace.push_back(d.loglik);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (std::abs(beta[j]) > 30.0) {
                throw NumericalError("cox (" + outcome_label + "): coefficient of '" +
                                     data.terms[static_cast<std::size_t>(j)] + "' diverged (|beta| > 30)");
            }
        }
    }

    fit.loglik                = d.loglik;
    const Eigen::MatrixXd cov = d.info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    for (Eigen::Index j = 0; j < p; ++j) {
        CoxTerm term;
        term.name    = data.terms[static_cast<std::size_t>(j)];
        term.coef    = beta[j];
        term.hr      = std::exp(term.coef);
        term.se      = std::sqrt(cov(j, j));
        term.ci_low  = std::exp(term.coef - z975 * term.se);
        term.ci_high = std::exp(term.coef + z975 * term.se);
        term.p       = std::erfc(std::abs(term.coef / term.se) / std::sqrt(2.0));
        fit.terms.push_back(term);
    }
    return fit;
}

CoxFit fit_cox_td(const TransitionRecords& records, CoxOutcome outcome, const std::vector<std::string>& extra_covariates)
{
    return fit_cox(cox_data_td(records, outcome, extra_covariates), to_string(outcome));
}

CoxFit markov_test(const TransitionRecords& records, CoxOutcome outcome)
{
    return fit_cox(cox_data_markov(records, outcome), std::string(to_string(outcome)) + "_after_exposure");
}

void write_cox_rows(std::ostream& os, const CoxFit& fit, bool header)
{
    if (header) {
        os << "outcome,term,coef,hr,se,ci_low,ci_high,p,n_events\n";
    }
    for (const auto& t : fit.terms) {
        os << fit.outcome << ',' << t.name << ',' << format_double(t.coef) << ',' << format_double(t.hr) << ','
           << format_double(t.se) << ',' << format_double(t.ci_low) << ',' << format_double(t.ci_high) << ','
           << format_double(t.p) << ',' << fit.n_events << '\n';
    }
}

} // namespace pafms
