#include "pafms/paf.h"

#include "pafms/continuous.h"
#include "pafms/discrete.h"
#include "pafms/errors.h"
#include "pafms/parallel.h"
#include "pafms/random.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace pafms
{

namespace
{

double paf_value(double overall, double reference)
{
    if (!(overall > 0.0) || std::isnan(reference)) {
        return undefined_value;
    }
    return (overall - reference) / overall;
}

PafCurve combine(const StepCurve& overall, const StepCurve& reference, Estimand estimand, Estimator estimator)
{
    const StepCurve* both[] = {&overall, &reference};
    PafCurve out;
    out.estimand  = estimand;
    out.estimator = estimator;
    out.curve     = StepCurve(paf_value(overall.initial(), reference.initial()));
    for (double t : union_grid(both)) {
        out.curve.push(t, paf_value(overall.value(t), reference.value(t)));
    }
    if (overall.truncated_at || reference.truncated_at) {
        out.curve.truncated_at = std::min(overall.truncated_at.value_or(INFINITY),
                                          reference.truncated_at.value_or(INFINITY));
    }
    return out;
}

} // namespace

const char* to_string(Estimand e)
{
    return e == Estimand::paf_o ? "paf_o" : "paf_c";
}

const char* to_string(Estimator e)
{
    switch (e) {
    case Estimator::multistate:
        return "multistate";
    case Estimator::bekaert_naive:
        return "bekaert_naive";
    case Estimator::bekaert_ipw:
        return "bekaert_ipw";
    }
    return "?";
}

Estimand parse_estimand(const std::string& text)
{
    if (text == "paf_o") {
        return Estimand::paf_o;
    }
    if (text == "paf_c") {
        return Estimand::paf_c;
    }
    throw UsageError("unknown estimand '" + text + "' (expected paf_o or paf_c)");
}

Estimator parse_estimator(const std::string& text)
{
    if (text == "multistate") {
        return Estimator::multistate;
    }
    if (text == "naive" || text == "bekaert_naive") {
        return Estimator::bekaert_naive;
    }
    if (text == "ipw" || text == "bekaert_ipw") {
        return Estimator::bekaert_ipw;
    }
    throw UsageError("unknown estimator '" + text + "' (expected multistate, naive or ipw)");
}

PafCurve paf_o(const StepCurve& overall, const StepCurve& cpf, Estimator estimator)
{
    return combine(overall, cpf, Estimand::paf_o, estimator);
}

PafCurve paf_c(const StepCurve& overall, const StepCurve& counterfactual, Estimator estimator)
{
    return combine(overall, counterfactual, Estimand::paf_c, estimator);
}

double paf_fixed(const FourfoldTable& t)
{
    const double cases      = static_cast<double>(t.exposed_cases + t.unexposed_cases);
    const double total      = cases + static_cast<double>(t.exposed_noncases + t.unexposed_noncases);
    const double unexposed  = static_cast<double>(t.unexposed_cases + t.unexposed_noncases);
    if (!(cases > 0.0) || !(unexposed > 0.0)) {
        return undefined_value;
    }
    return paf_value(cases / total, static_cast<double>(t.unexposed_cases) / unexposed);
}

FourfoldTable fourfold_at(const Cohort& cohort, double tau)
{
    FourfoldTable table;
    for (const auto& s : cohort.subjects()) {
        if (s.end_status == EndStatus::censored) {
            throw DataError("fourfold_at: subject '" + s.id + "' is censored");
        }
        const bool exposed = s.inf_time && *s.inf_time <= tau;
        const bool case_   = s.end_status == EndStatus::death && s.end_time <= tau;
        auto& cell         = exposed ? (case_ ? table.exposed_cases : table.exposed_noncases)
                                     : (case_ ? table.unexposed_cases : table.unexposed_noncases);
        ++cell;
    }
    return table;
}

std::int64_t preventable_count(double paf, std::uint64_t deaths)
{
    if (std::isnan(paf)) {
        throw UsageError("preventable_count: PAF is undefined");
    }
    return std::llround(paf * static_cast<double>(deaths));
}

std::uint64_t deaths_by(const Cohort& cohort, double t)
{
    return static_cast<std::uint64_t>(std::count_if(cohort.subjects().begin(), cohort.subjects().end(), [t](const Subject& s) {
        return s.end_status == EndStatus::death && s.end_time <= t;
    }));
}

PafCurve estimate(const Cohort& cohort, const EstimatorSpec& spec)
{
    if (spec.estimator == Estimator::bekaert_naive && spec.estimand != Estimand::paf_o) {
        throw UsageError("the naive estimator estimates paf_o only");
    }
    if (spec.estimator == Estimator::bekaert_ipw && spec.estimand != Estimand::paf_c) {
        throw UsageError("the IPW estimator estimates paf_c only");
    }
    if (!spec.covariates.empty() && spec.estimator != Estimator::bekaert_ipw) {
        throw UsageError("covariates are only used by the IPW estimator");
    }

    if (spec.estimator == Estimator::multistate) {
        const auto records   = to_transitions(cohort);
        const auto overall   = overall_death_risk(records);
        const auto reference = spec.estimand == Estimand::paf_o ? cpf_unexposed(records) : cif_counterfactual(records);
        return combine(overall, reference, spec.estimand, spec.estimator);
    }

    const auto panel   = discretize(cohort, spec.allow_drop_censored);
    const auto overall = observed_death_cif(panel);
    if (spec.estimator == Estimator::bekaert_naive) {
        return combine(overall, naive_f01(panel), spec.estimand, spec.estimator);
    }
    const auto model = spec.covariates.empty() ? nonparametric_exposure_model(panel)
                                               : fit_pooled_logistic(expand_person_days(panel), spec.covariates);
    return combine(overall, ipw_f01(panel, compute_weights(panel, model)), spec.estimand, spec.estimator);
}

double quantile_sorted(const std::vector<double>& sorted, double prob)
{
    if (sorted.empty()) {
        return undefined_value;
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo  = static_cast<std::size_t>(std::floor(h));
    const auto hi  = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CurveWithBands bootstrap_ci(const Cohort& cohort, const EstimatorSpec& spec, std::size_t replicates,
                            std::uint64_t seed, const std::vector<double>& grid, double level)
{
    if (replicates < 2) {
        throw UsageError("bootstrap needs at least 2 replicates");
    }
    if (cohort.empty()) {
        throw UsageError("bootstrap needs a non-empty cohort");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw UsageError("bootstrap confidence level must lie in (0, 1)");
    }
    CurveWithBands out;
    out.grid       = grid;
    out.replicates = replicates;
    out.seed       = seed;
    out.spec       = spec;
    out.estimate   = estimate(cohort, spec).curve.evaluate(grid);

    const std::size_t n = cohort.size();
    std::vector<std::vector<double>> values(replicates);
    parallel_for(replicates, [&](std::size_t r) {
        auto rng = make_stream(seed, r);
        std::vector<std::size_t> draw(n);
        for (auto& d : draw) {
            d = uniform_index(rng, n);
        }
        try {
            values[r] = estimate(cohort.subset(draw), spec).curve.evaluate(grid);
        }
        catch (const NumericalError&) {
            values[r].assign(grid.size(), undefined_value);
        }
    });

    const double alpha = (1.0 - level) / 2.0;
    out.lower.resize(grid.size());
    out.upper.resize(grid.size());
    out.defined_replicates.resize(grid.size());
    std::vector<double> column;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        column.clear();
        for (const auto& v : values) {
            if (!std::isnan(v[g])) {
                column.push_back(v[g]);
            }
        }
        out.defined_replicates[g] = column.size();
        if (2 * column.size() < replicates) {
            out.lower[g] = out.upper[g] = undefined_value;
            continue;
        }
        std::sort(column.begin(), column.end());
        out.lower[g] = quantile_sorted(column, alpha);
        out.upper[g] = quantile_sorted(column, 1.0 - alpha);
    }
    return out;
}

std::vector<std::pair<std::string, PafCurve>> stratified_paf(const Cohort& cohort, const std::string& covariate,
                                                             Estimand estimand)
{
    const std::size_t column = cohort.covariate_index(covariate);
    std::map<std::string, std::vector<std::size_t>> levels;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        levels[to_string(cohort[i].covariates[column])].push_back(i);
    }
    std::vector<std::pair<std::string, PafCurve>> out;
    for (const auto& [level, members] : levels) {
        out.emplace_back(level, estimate(cohort.subset(members), {estimand, Estimator::multistate, {}, false}));
    }
    return out;
}

void write_report(std::ostream& os, const CurveWithBands& bands)
{
    os << "t,estimate,lower,upper,defined\n";
    for (std::size_t g = 0; g < bands.grid.size(); ++g) {
        os << format_double(bands.grid[g]) << ',' << format_double(bands.estimate[g]) << ','
           << format_double(bands.lower[g]) << ',' << format_double(bands.upper[g]) << ','
           << (std::isnan(bands.estimate[g]) ? 0 : 1) << '\n';
    }
}

void write_report(std::ostream& os, const PafCurve& curve, const std::vector<double>& grid)
{
    os << "t,estimate,lower,upper,defined\n";
    for (double t : grid) {
        const double v = curve(t);
        os << format_double(t) << ',' << format_double(v) << ",NA,NA," << (std::isnan(v) ? 0 : 1) << '\n';
    }
}

std::string manifest_json(const EstimatorSpec& spec, const Cohort& cohort, std::size_t replicates, std::uint64_t seed)
{
    nlohmann::ordered_json j;
    j["estimand"]            = to_string(spec.estimand);
    j["estimator"]           = to_string(spec.estimator);
    j["covariates"]          = spec.covariates;
    j["allow_drop_censored"] = spec.allow_drop_censored;
    j["tie_policy"]          = cohort.tie_policy().to_string();
    j["horizon"]             = cohort.horizon();
    j["n"]                   = cohort.size();
    j["B"]                   = replicates;
    j["seed"]                = seed;
    return j.dump(2);
}

} // namespace pafms
