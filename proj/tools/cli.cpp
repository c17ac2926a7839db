#include "cli.h"

#include "pafms/continuous.h"
#include "pafms/cox.h"
#include "pafms/discrete.h"
#include "pafms/errors.h"
#include "pafms/paf.h"
#include "pafms/simulate.h"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace pafms::cli
{

namespace
{

double deviation(double a, double b)
{
    if (std::isnan(a) && std::isnan(b)) {
        return 0.0;
    }
    if (std::isnan(a) || std::isnan(b)) {
        return INFINITY;
    }
    return std::abs(a - b);
}

double max_deviation(const StepCurve& a, const StepCurve& b, const std::vector<double>& grid)
{
    double d = 0.0;
    for (double t : grid) {
        d = std::max(d, deviation(a(t), b(t)));
    }
    return d;
}

CheckResult compare(std::string name, double dev, double tol, std::string note = {})
{
    return {std::move(name), dev < tol, false, dev, std::move(note)};
}

CheckResult skipped(std::string name, std::string why)
{
    return {std::move(name), true, true, 0.0, std::move(why)};
}

std::vector<double> days_before(int days, std::optional<int> limit)
{
    std::vector<double> grid;
    for (int t = 1; t <= days && (!limit || t < *limit); ++t) {
        grid.push_back(t);
    }
    return grid;
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Options {
    std::string input;
    std::string tie_policy = "shift:0.001";
    std::string estimand   = "paf_o";
    std::string estimator  = "multistate";
    std::string grid       = "days";
    std::optional<double> at;
    std::size_t B = 0;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string covariates;
    std::string stratify;
    bool markov_test         = false;
    bool allow_drop_censored = false;
    std::size_t n            = 0;
};

class Runner
{
public:
    Runner(const Options& o, std::ostream& out, std::ostream& err)
        : m_o(o)
        , m_out(out)
        , m_err(err)
    {
    }

    /// Writes to <out-dir>/<name> or to the output stream.
    void emit(const std::string& name, const std::function<void(std::ostream&)>& write) const
    {
        if (m_o.out_dir.empty()) {
            write(m_out);
            return;
        }
        std::filesystem::create_directories(m_o.out_dir);
        const auto path = std::filesystem::path(m_o.out_dir) / name;
        std::ofstream file(path, std::ios::binary);
        if (!file) {
            throw DataError("cannot write '" + path.string() + "'");
        }
        write(file);
        m_err << "wrote " << path.string() << '\n';
    }

    Cohort cohort() const
    {
        if (m_o.input.empty()) {
            throw UsageError("--input is required");
        }
        Cohort c = read_cohort_file(m_o.input, TiePolicy::parse(m_o.tie_policy));
        for (const auto& d : c.diagnostics()) {
            m_err << "warning: row " << d.row << " (id " << d.id << "): " << d.message << '\n';
        }
        return c;
    }

    EstimatorSpec spec() const
    {
        EstimatorSpec s;
        s.estimand            = parse_estimand(m_o.estimand);
        s.estimator           = parse_estimator(m_o.estimator);
        s.covariates          = split_list(m_o.covariates);
        s.allow_drop_censored = m_o.allow_drop_censored;
        return s;
    }

    void warn_dropped(const Cohort& c, const EstimatorSpec& s) const
    {
        if (s.estimator == Estimator::multistate || !s.allow_drop_censored) {
            return;
        }
        for (const auto& subject : c.subjects()) {
            if (subject.end_status == EndStatus::censored) {
                m_err << "warning: id " << subject.id << ": censored subject dropped from the daily panel\n";
            }
        }
    }

    std::vector<double> grid_for(const Cohort& c, const StepCurve& curve) const
    {
        if (m_o.grid == "days") {
            return day_grid(c.horizon());
        }
        if (m_o.grid == "jumps") {
            return curve.times();
        }
        throw UsageError("--grid must be days or jumps");
    }

    int validate() const
    {
        const Cohort c = cohort();
        m_out << "ok: " << c.size() << " subjects, horizon " << format_double(c.horizon()) << ", "
              << c.diagnostics().size() << " warnings\n";
        return ok;
    }

    int summary() const
    {
        const auto s = summarize(cohort());
        m_out << "n," << s.n << "\nexposed," << s.exposed << "\nunexposed_deaths," << s.unexposed_deaths
              << "\nunexposed_discharges," << s.unexposed_discharges << "\nunexposed_censored," << s.unexposed_censored
              << "\nexposed_deaths," << s.exposed_deaths << "\nexposed_discharges," << s.exposed_discharges
              << "\nexposed_censored," << s.exposed_censored << "\nperson_days," << format_double(s.person_days)
              << "\nperson_days_exposed," << format_double(s.person_days_exposed) << '\n';
        return ok;
    }

    int estimate_cmd() const
    {
        const Cohort c   = cohort();
        const auto sp    = spec();
        if (!m_o.stratify.empty()) {
            if (sp.estimator != Estimator::multistate) {
                throw UsageError("--stratify uses the multistate estimator");
            }
            for (const auto& [level, curve] : stratified_paf(c, m_o.stratify, sp.estimand)) {
                emit("paf_" + m_o.stratify + "_" + level + ".csv", [&](std::ostream& os) {
                    if (m_o.out_dir.empty()) {
                        os << "# " << m_o.stratify << " = " << level << '\n';
                    }
                    write_report(os, curve, grid_for(c, curve.curve));
                });
            }
            return ok;
        }
        warn_dropped(c, sp);
        const auto curve = estimate(c, sp);
        if (m_o.at) {
            const double v = curve(*m_o.at);
            m_out << format_double(v) << '\n';
            if (!std::isnan(v)) {
                const auto deaths = deaths_by(c, *m_o.at);
                m_err << "deaths by t: " << deaths << ", cases attributable/preventable: "
                      << preventable_count(v, deaths) << '\n';
            }
            return ok;
        }
        emit(std::string(to_string(sp.estimand)) + "_" + to_string(sp.estimator) + ".csv",
             [&](std::ostream& os) { write_report(os, curve, grid_for(c, curve.curve)); });
        if (!m_o.out_dir.empty()) {
            emit("manifest.json", [&](std::ostream& os) { os << manifest_json(sp, c, 0, 0) << '\n'; });
        }
        return ok;
    }

    int bootstrap() const
    {
        if (!m_o.seed) {
            throw UsageError("bootstrap requires --seed");
        }
        if (m_o.B < 2) {
            throw UsageError("bootstrap requires --B >= 2");
        }
        const Cohort c    = cohort();
        const auto sp     = spec();
        warn_dropped(c, sp);
        const auto point  = estimate(c, sp);
        auto grid         = grid_for(c, point.curve);
        if (m_o.at) {
            grid = {*m_o.at};
        }
        const auto bands = bootstrap_ci(c, sp, m_o.B, *m_o.seed, grid);
        emit("bootstrap.csv", [&](std::ostream& os) { write_report(os, bands); });
        if (!m_o.out_dir.empty()) {
            emit("manifest.json", [&](std::ostream& os) { os << manifest_json(sp, c, m_o.B, *m_o.seed) << '\n'; });
        }
        return ok;
    }

    int cox() const
    {
        const Cohort c     = cohort();
        const auto records = to_transitions(c);
        const auto extra   = split_list(m_o.covariates);
        std::vector<CoxFit> fits;
        if (m_o.markov_test) {
            if (!extra.empty()) {
                throw UsageError("--markov-test does not take --covariates");
            }
            fits.push_back(markov_test(records, CoxOutcome::death));
            fits.push_back(markov_test(records, CoxOutcome::discharge));
        }
        else {
            fits.push_back(fit_cox_td(records, CoxOutcome::death, extra));
            fits.push_back(fit_cox_td(records, CoxOutcome::discharge, extra));
        }
        emit("cox.csv", [&](std::ostream& os) {
            for (std::size_t k = 0; k < fits.size(); ++k) {
                write_cox_rows(os, fits[k], k == 0);
            }
        });
        return ok;
    }

    int simulate() const
    {
        if (!m_o.seed) {
            throw UsageError("simulate requires --seed");
        }
        if (m_o.n == 0) {
            throw UsageError("simulate requires --n >= 1");
        }
        if (m_o.input.empty()) {
            throw UsageError("--input (hazard spec JSON) is required");
        }
        const auto hs = parse_hazard_spec(read_text(m_o.input));
        const auto c  = simulate_cohort(hs, m_o.n, *m_o.seed);
        emit("cohort.csv", [&](std::ostream& os) { write_cohort(os, c); });
        return ok;
    }

    int oracle() const
    {
        if (m_o.input.empty()) {
            throw UsageError("--input (hazard spec JSON) is required");
        }
        const auto hs = parse_hazard_spec(read_text(m_o.input));
        std::vector<double> grid{0.0};
        if (m_o.at) {
            grid = {*m_o.at};
        }
        else if (m_o.grid == "days") {
            const auto days = day_grid(hs.tau);
            grid.insert(grid.end(), days.begin(), days.end());
        }
        else {
            throw UsageError("oracle supports --grid days or --at");
        }
        const auto curves = analytic_curves(hs, grid);
        emit("oracle.csv", [&](std::ostream& os) { write_analytic_csv(os, curves); });
        return ok;
    }

    int check() const
    {
        const auto results = run_checks(cohort());
        bool all           = true;
        for (const auto& r : results) {
            m_out << (r.skipped ? "SKIP" : r.passed ? "PASS" : "FAIL") << ' ' << r.name;
            if (!r.skipped) {
                m_out << " max_dev=" << format_double(r.max_deviation);
            }
            if (!r.note.empty()) {
                m_out << " (" << r.note << ')';
            }
            m_out << '\n';
            all = all && r.passed;
        }
        return all ? ok : numerical;
    }

private:
    const Options& m_o;
    std::ostream& m_out;
    std::ostream& m_err;
};

} // namespace

std::vector<CheckResult> run_checks(const Cohort& cohort, double tol)
{
    std::vector<CheckResult> out;
    const auto records = to_transitions(cohort);

    const auto occupation = aalen_johansen_extended(records);
    out.push_back(compare("occupation probabilities sum to 1", occupation.max_row_sum_deviation(), tol));

    const auto counterfactual = cif_counterfactual(records);
    try {
        const auto ht               = ht_cif(records);
        const StepCurve* both[]     = {&ht, &counterfactual};
        out.push_back(compare("ht_cif == cif_counterfactual", max_deviation(ht, counterfactual, union_grid(both)), tol));
    }
    catch (const NumericalError& e) {
        out.push_back({"ht_cif == cif_counterfactual", false, false, INFINITY, e.what()});
    }

    const bool complete = !cohort.any_censored();
    if (complete && cohort.size() <= 10000) {
        const auto brute    = brute_force_estimates(cohort);
        const auto overall  = overall_death_risk(records);
        const auto cpf      = cpf_unexposed(records);
        const auto& grid    = brute.death.times();
        out.push_back(compare("overall_death_risk == proportion", max_deviation(overall, brute.death, grid), tol));
        out.push_back(compare("cpf_unexposed == proportion", max_deviation(cpf, brute.cpf, grid), tol));
        out.push_back(compare("cif_counterfactual == explicit loop",
                              max_deviation(counterfactual, brute.counterfactual, grid), tol));
    }
    else {
        out.push_back(skipped("brute-force proportions", complete ? "more than 10000 subjects" : "censored subjects"));
    }

    if (!complete || !cohort.integer_times()) {
        const std::string why = complete ? "non-integer times" : "censored subjects";
        out.push_back(skipped("naive_f01 == cpf_unexposed", why));
        out.push_back(skipped("ipw_f01 == cif_counterfactual", why));
        out.push_back(skipped("paf_o multistate == naive", why));
        out.push_back(skipped("paf_c multistate == ipw", why));
        out.push_back(skipped("fourfold table == paf_o(tau)", why));
        return out;
    }

    const auto panel   = discretize(cohort);
    const auto days    = days_before(panel.days, std::nullopt);
    const auto cpf     = cpf_unexposed(records);
    out.push_back(compare("naive_f01 == cpf_unexposed", max_deviation(naive_f01(panel), cpf, days), tol));

    const auto weights = compute_weights(panel, nonparametric_exposure_model(panel));
    const auto ipw_days = days_before(panel.days, weights.positivity_day);
    const std::string note =
        weights.positivity_day ? "days before positivity failure on day " + std::to_string(*weights.positivity_day)
                               : std::string();
    out.push_back(compare("ipw_f01 == cif_counterfactual",
                          max_deviation(ipw_f01(panel, weights), counterfactual, ipw_days), tol, note));

    const auto ms_o = estimate(cohort, {Estimand::paf_o, Estimator::multistate, {}, false});
    const auto nv_o = estimate(cohort, {Estimand::paf_o, Estimator::bekaert_naive, {}, false});
    out.push_back(compare("paf_o multistate == naive", max_deviation(ms_o.curve, nv_o.curve, days), tol));
    const auto ms_c = estimate(cohort, {Estimand::paf_c, Estimator::multistate, {}, false});
    const auto iw_c = estimate(cohort, {Estimand::paf_c, Estimator::bekaert_ipw, {}, false});
    out.push_back(compare("paf_c multistate == ipw", max_deviation(ms_c.curve, iw_c.curve, ipw_days), tol, note));

    const double tau = cohort.horizon();
    out.push_back(compare("fourfold table == paf_o(tau)", deviation(paf_fixed(fourfold_at(cohort, tau)), ms_o(tau)), tol));
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"Population-attributable fractions for time-dependent exposures", "paf_msm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "paf_msm 1.0");

    auto add_input = [&](CLI::App* sub, const char* what) {
        sub->add_option("--input", o.input, what)->required();
    };
    auto add_tie = [&](CLI::App* sub) {
        sub->add_option("--tie-policy", o.tie_policy, "reject | shift[:eps] for inf_time == end_time")
            ->capture_default_str();
    };
    auto add_estimator = [&](CLI::App* sub) {
        sub->add_option("--estimand", o.estimand, "paf_o | paf_c")->capture_default_str();
        sub->add_option("--estimator", o.estimator, "multistate | naive | ipw")->capture_default_str();
        sub->add_option("--grid", o.grid, "days | jumps")->capture_default_str();
        sub->add_option("--at", o.at, "single evaluation time");
        sub->add_option("--covariates", o.covariates, "comma-separated baseline covariates of the IPW exposure model");
        sub->add_flag("--allow-drop-censored", o.allow_drop_censored,
                      "drop censored subjects from the discrete estimators");
    };
    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", o.out_dir, "output directory (default: stdout)"); };

    auto* validate = app.add_subcommand("validate", "check a cohort CSV against the schema and invariants");
    add_input(validate, "cohort CSV");
    add_tie(validate);

    auto* summary = app.add_subcommand("summary", "counts by exposure and outcome");
    add_input(summary, "cohort CSV");
    add_tie(summary);

    auto* estimate_sub = app.add_subcommand("estimate", "PAF curve for an estimand/estimator pair");
    add_input(estimate_sub, "cohort CSV");
    add_tie(estimate_sub);
    add_estimator(estimate_sub);
    add_out(estimate_sub);
    estimate_sub->add_option("--stratify", o.stratify, "one multistate curve per level of this covariate");

    auto* bootstrap = app.add_subcommand("bootstrap", "percentile bootstrap band for a PAF curve");
    add_input(bootstrap, "cohort CSV");
    add_tie(bootstrap);
    add_estimator(bootstrap);
    add_out(bootstrap);
    bootstrap->add_option("--B", o.B, "number of replicates")->required();
    bootstrap->add_option("--seed", o.seed, "random seed")->required();

    auto* cox = app.add_subcommand("cox", "hazard ratios of exposure for death and discharge");
    add_input(cox, "cohort CSV");
    add_tie(cox);
    add_out(cox);
    cox->add_option("--covariates", o.covariates, "comma-separated numeric baseline covariates");
    cox->add_flag("--markov-test", o.markov_test, "fit post-exposure hazards on inf_time instead");

    auto* simulate = app.add_subcommand("simulate", "draw a cohort from a hazard specification");
    add_input(simulate, "hazard spec JSON");
    add_out(simulate);
    simulate->add_option("--n", o.n, "number of subjects")->required();
    simulate->add_option("--seed", o.seed, "random seed")->required();

    auto* oracle = app.add_subcommand("oracle", "quadrature curves of a hazard specification");
    add_input(oracle, "hazard spec JSON");
    add_out(oracle);
    oracle->add_option("--grid", o.grid, "days")->capture_default_str();
    oracle->add_option("--at", o.at, "single evaluation time");

    auto* check = app.add_subcommand("check", "run the estimator equivalence suite on a cohort");
    add_input(check, "cohort CSV");
    add_tie(check);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    Runner runner(o, out, err);
    try {
        if (*validate) {
            return runner.validate();
        }
        if (*summary) {
            return runner.summary();
        }
        if (*estimate_sub) {
            return runner.estimate_cmd();
        }
        if (*bootstrap) {
            return runner.bootstrap();
        }
        if (*cox) {
            return runner.cox();
        }
        if (*simulate) {
            return runner.simulate();
        }
        if (*oracle) {
            return runner.oracle();
        }
        if (*check) {
            return runner.check();
        }
    }
    catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return data;
    }
    catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return numerical;
    }
    catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return usage;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return numerical;
    }
    return usage;
}

} // namespace pafms::cli
