#include "pafms/simulate.h"

#include "pafms/errors.h"
#include "pafms/parallel.h"
#include "pafms/random.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace pafms
{

namespace
{

constexpr const char* transition_keys[] = {"alpha01", "alpha02", "alpha03", "alpha14", "alpha15"};
constexpr double inf = std::numeric_limits<double>::infinity();

struct Draw {
    double time = inf;
    int cause = -1; ///< index into the hazard list
};

/// First event time after `from` for competing hazards scaled by `scale`,
/// given a unit exponential `e` and a uniform `u` for the cause.
Draw first_event(const std::vector<const PiecewiseHazard*>& hs, double scale, double from, double e, double u)
{
    std::vector<double> cuts;
    for (const auto* h : hs) {
        for (const auto& piece : h->pieces()) {
            if (piece.until > from && std::isfinite(piece.until)) {
                cuts.push_back(piece.until);
            }
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(inf);

    double a         = from;
    double remaining = e;
    for (double b : cuts) {
        const double mid = std::isfinite(b) ? 0.5 * (a + b) : a;
        std::vector<double> rates;
        double total = 0.0;
        for (const auto* h : hs) {
            rates.push_back(scale * h->rate(mid));
            total += rates.back();
        }
        if (total > 0.0 && total * (b - a) >= remaining) {
            Draw d;
            d.time         = a + remaining / total;
            double target  = u * total;
            d.cause        = static_cast<int>(rates.size()) - 1;
            for (std::size_t k = 0; k < rates.size(); ++k) {
                if (target < rates[k]) {
                    d.cause = static_cast<int>(k);
                    break;
                }
                target -= rates[k];
            }
            return d;
        }
        remaining -= total * (b - a);
        a = b;
    }
    return {};
}

double exponential(std::mt19937_64& rng)
{
    return -std::log1p(-uniform01(rng));
}

} // namespace

PiecewiseHazard::PiecewiseHazard(std::vector<HazardPiece> pieces)
    : m_pieces(std::move(pieces))
{
    double prev = 0.0;
    for (const auto& p : m_pieces) {
        if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) {
            throw UsageError("hazard rates must be finite and non-negative");
        }
        if (!(p.until > prev)) {
            throw UsageError("hazard breakpoints must be positive and increasing");
        }
        prev = p.until;
    }
}

double PiecewiseHazard::rate(double t) const
{
    for (const auto& p : m_pieces) {
        if (t < p.until) {
            return p.rate;
        }
    }
    return 0.0;
}

double PiecewiseHazard::cumulative(double t) const
{
    double sum  = 0.0;
    double prev = 0.0;
    for (const auto& p : m_pieces) {
        if (t <= prev) {
            break;
        }
        sum += p.rate * (std::min(t, p.until) - prev);
        prev = p.until;
    }
    return sum;
}

bool PiecewiseHazard::zero() const
{
    return std::all_of(m_pieces.begin(), m_pieces.end(), [](const HazardPiece& p) { return p.rate == 0.0; });
}

void HazardSpec::validate() const
{
    for (const auto& h : alpha) {
        PiecewiseHazard check(h.pieces());
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw UsageError("tau must be positive and finite");
    }
    if (!(censor_rate >= 0.0) || !std::isfinite(censor_rate)) {
        throw UsageError("censor_rate must be finite and non-negative");
    }
    if (!std::isfinite(gamma)) {
        throw UsageError("gamma must be finite");
    }
}

HazardSpec HazardSpec::constant(double a01, double a02, double a03, double a14, double a15, double tau)
{
    HazardSpec spec;
    spec.alpha = {PiecewiseHazard::constant(a01), PiecewiseHazard::constant(a02), PiecewiseHazard::constant(a03),
                  PiecewiseHazard::constant(a14), PiecewiseHazard::constant(a15)};
    spec.tau   = tau;
    return spec;
}

HazardSpec parse_hazard_spec(const std::string& json_text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    }
    catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("hazard spec: ") + e.what());
    }
    if (!j.is_object()) {
        throw UsageError("hazard spec: expected a JSON object");
    }
    HazardSpec spec;
    try {
        for (std::size_t k = 0; k < 5; ++k) {
            const auto it = j.find(transition_keys[k]);
            if (it == j.end()) {
                continue;
            }
            std::vector<HazardPiece> pieces;
            if (it->is_number()) {
                pieces.push_back({inf, it->get<double>()});
            }
            else {
                for (const auto& piece : *it) {
                    HazardPiece hp;
                    hp.rate = piece.at("rate").get<double>();
                    if (piece.contains("until") && !piece["until"].is_null()) {
                        hp.until = piece["until"].get<double>();
                    }
                    pieces.push_back(hp);
                }
            }
            spec.alpha[k] = PiecewiseHazard(std::move(pieces));
        }
        spec.gamma       = j.value("gamma", 0.0);
        spec.censor_rate = j.value("censor_rate", 0.0);
        spec.tau         = j.value("tau", spec.tau);
        spec.round_days  = j.value("round_days", false);
    }
    catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("hazard spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string hazard_spec_json(const HazardSpec& spec)
{
    nlohmann::ordered_json j;
    for (std::size_t k = 0; k < 5; ++k) {
        nlohmann::ordered_json pieces = nlohmann::ordered_json::array();
        for (const auto& p : spec.alpha[k].pieces()) {
            nlohmann::ordered_json piece;
            if (std::isfinite(p.until)) {
                piece["until"] = p.until;
            }
            piece["rate"] = p.rate;
            pieces.push_back(piece);
        }
        j[transition_keys[k]] = pieces;
    }
    j["gamma"]       = spec.gamma;
    j["censor_rate"] = spec.censor_rate;
    j["tau"]         = spec.tau;
    j["round_days"]  = spec.round_days;
    return j.dump(2);
}

Cohort simulate_cohort(const HazardSpec& spec, std::size_t n, std::uint64_t seed)
{
    spec.validate();
    if (n == 0) {
        throw UsageError("simulate: n must be at least 1");
    }
    if (std::all_of(spec.alpha.begin(), spec.alpha.end(), [](const PiecewiseHazard& h) { return h.zero(); })) {
        throw UsageError("simulate: all hazards are zero");
    }
    const std::vector<const PiecewiseHazard*> from0 = {&spec.alpha[0], &spec.alpha[1], &spec.alpha[2]};
    const std::vector<const PiecewiseHazard*> from1 = {&spec.alpha[3], &spec.alpha[4]};

    std::vector<Subject> subjects(n);
    parallel_for(n, [&](std::size_t i) {
        auto rng        = make_stream(seed, i);
        const double e_c = exponential(rng);
        const double c   = spec.censor_rate > 0.0 ? std::min(spec.tau, e_c / spec.censor_rate) : spec.tau;
        const double e0  = exponential(rng);
        const double u0  = uniform01(rng);
        const double e1  = exponential(rng);
        const double u1  = uniform01(rng);

        Subject& s = subjects[i];
        s.id       = std::to_string(i + 1);
        const Draw d0 = first_event(from0, 1.0, 0.0, e0, u0);
        if (!(d0.time < c)) {
            s.end_time   = c;
            s.end_status = EndStatus::censored;
        }
        else if (d0.cause != 0) {
            s.end_time   = d0.time;
            s.end_status = d0.cause == 1 ? EndStatus::discharge : EndStatus::death;
        }
        else {
            s.inf_time    = d0.time;
            const Draw d1 = first_event(from1, std::exp(spec.gamma * d0.time), d0.time, e1, u1);
            if (!(d1.time < c)) {
                s.end_time   = c;
                s.end_status = EndStatus::censored;
            }
            else {
                s.end_time   = d1.time;
                s.end_status = d1.cause == 0 ? EndStatus::discharge : EndStatus::death;
            }
        }
        if (spec.round_days) {
            s.end_time = std::ceil(s.end_time);
            if (s.inf_time) {
                s.inf_time = std::ceil(*s.inf_time);
                if (*s.inf_time >= s.end_time) {
                    s.end_time = *s.inf_time + 1.0;
                }
            }
        }
    });
    double horizon = spec.tau;
    for (const auto& s : subjects) {
        horizon = std::max(horizon, s.end_time);
    }
    return Cohort(std::move(subjects), {}, TiePolicy::reject(), horizon);
}

namespace
{

struct Integrated {
    std::array<std::vector<double>, 6> p;
    std::vector<double> p030;
};

// Cumulative trapezoid rules on a mesh with spacing at most h; values at the
// requested points.
Integrated integrate(const HazardSpec& spec, const std::vector<double>& knots, const std::vector<double>& points,
                     double h)
{
    std::vector<double> mesh{0.0};
    for (double k : knots) {
        const double a  = mesh.back();
        const auto m    = static_cast<std::size_t>(std::max(1.0, std::ceil((k - a) / h - 1e-9)));
        for (std::size_t j = 1; j < m; ++j) {
            mesh.push_back(a + (k - a) * static_cast<double>(j) / static_cast<double>(m));
        }
        mesh.push_back(k);
    }
    const auto& al = spec.alpha;
    auto a0        = [&](double t) { return al[0].cumulative(t) + al[1].cumulative(t) + al[2].cumulative(t); };
    auto a0_zeroed = [&](double t) { return al[1].cumulative(t) + al[2].cumulative(t); };
    auto l1        = [&](double t) { return al[3].cumulative(t) + al[4].cumulative(t); };

    Integrated out;
    for (auto& v : out.p) {
        v.reserve(points.size());
    }
    double p01 = 0.0, p02 = 0.0, p03 = 0.0, p04 = 0.0, p05 = 0.0, p030 = 0.0;
    std::size_t next_point = 0;
    auto emit = [&](double t) {
        while (next_point < points.size() && points[next_point] == t) {
            out.p[0].push_back(std::exp(-a0(t)));
            out.p[1].push_back(p01);
            out.p[2].push_back(p02);
            out.p[3].push_back(p03);
            out.p[4].push_back(p04);
            out.p[5].push_back(p05);
            out.p030.push_back(p030);
            ++next_point;
        }
    };
    emit(0.0);
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
        const double u = mesh[k], v = mesh[k + 1], w = v - u, mid = 0.5 * (u + v);
        const double q0u = std::exp(-a0(u)), q0v = std::exp(-a0(v));
        const double z0u = std::exp(-a0_zeroed(u)), z0v = std::exp(-a0_zeroed(v));
        const double r01 = al[0].rate(mid), r02 = al[1].rate(mid), r03 = al[2].rate(mid);
        const double r14 = al[3].rate(mid), r15 = al[4].rate(mid);
        p02 += 0.5 * w * r02 * (q0u + q0v);
        p03 += 0.5 * w * r03 * (q0u + q0v);
        p030 += 0.5 * w * r03 * (z0u + z0v);
        const double decay = std::exp(-(l1(v) - l1(u)));
        const double p01v  = p01 * decay + 0.5 * w * r01 * (q0u * decay + q0v);
        p04 += 0.5 * w * r14 * (p01 + p01v);
        p05 += 0.5 * w * r15 * (p01 + p01v);
        p01 = p01v;
        emit(v);
    }
    return out;
}

double sup_diff(const Integrated& a, const Integrated& b)
{
    double d = 0.0;
    for (std::size_t l = 0; l < 6; ++l) {
        for (std::size_t i = 0; i < a.p[l].size(); ++i) {
            d = std::max(d, std::abs(a.p[l][i] - b.p[l][i]));
        }
    }
    for (std::size_t i = 0; i < a.p030.size(); ++i) {
        d = std::max(d, std::abs(a.p030[i] - b.p030[i]));
    }
    return d;
}

Integrated richardson(const Integrated& coarse, const Integrated& fine)
{
    Integrated out = fine;
    auto combine   = [](std::vector<double>& f, const std::vector<double>& c) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            f[i] = (4.0 * f[i] - c[i]) / 3.0;
        }
    };
    for (std::size_t l = 0; l < 6; ++l) {
        combine(out.p[l], coarse.p[l]);
    }
    combine(out.p030, coarse.p030);
    out.p[0] = fine.p[0]; // closed form
    return out;
}

double ratio(double num, double den)
{
    return den > 0.0 ? num / den : undefined_value;
}

} // namespace

AnalyticCurves analytic_curves(const HazardSpec& spec, const std::vector<double>& grid)
{
    spec.validate();
    if (spec.gamma != 0.0) {
        throw UsageError("analytic curves require gamma = 0 (Markov model)");
    }
    if (grid.empty()) {
        throw UsageError("analytic curves need a non-empty grid");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0) || !std::isfinite(grid[i]) || (i > 0 && grid[i] < grid[i - 1])) {
            throw UsageError("analytic grid must be finite, non-negative and sorted");
        }
    }
    const double t_max = grid.back();
    std::vector<double> knots;
    for (const auto& h : spec.alpha) {
        for (const auto& p : h.pieces()) {
            if (p.until < t_max) {
                knots.push_back(p.until);
            }
        }
    }
    for (double t : grid) {
        if (t > 0.0) {
            knots.push_back(t);
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    double h              = 1.0;
    Integrated coarse     = integrate(spec, knots, grid, h);
    Integrated fine       = integrate(spec, knots, grid, h / 2.0);
    Integrated estimate   = richardson(coarse, fine);
    int refinements       = 1;
    for (;; ++refinements) {
        if (refinements > 20) {
            throw NumericalError("analytic curves: quadrature did not converge after 20 refinements");
        }
        h /= 2.0;
        coarse          = std::move(fine);
        fine            = integrate(spec, knots, grid, h / 2.0);
        Integrated next = richardson(coarse, fine);
        const double d  = sup_diff(next, estimate);
        estimate        = std::move(next);
        if (d < 1e-6) {
            break;
        }
    }

    AnalyticCurves out;
    out.grid        = grid;
    out.p           = estimate.p;
    out.p030        = estimate.p030;
    out.refinements = refinements;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = out.p[3][i] + out.p[5][i];
        out.death.push_back(d);
        out.cpf.push_back(ratio(out.p[3][i], out.p[0][i] + out.p[2][i] + out.p[3][i]));
        out.paf_o.push_back(d > 0.0 ? (d - out.cpf.back()) / d : undefined_value);
        out.paf_c.push_back(d > 0.0 ? (d - out.p030[i]) / d : undefined_value);
    }
    return out;
}

void write_analytic_csv(std::ostream& os, const AnalyticCurves& c)
{
    os << "t,P00,P01,P02,P03,P04,P05,P030,PD,CPF,PAF_o,PAF_c\n";
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        os << format_double(c.grid[i]);
        for (const auto& p : c.p) {
            os << ',' << format_double(p[i]);
        }
        os << ',' << format_double(c.p030[i]) << ',' << format_double(c.death[i]) << ',' << format_double(c.cpf[i])
           << ',' << format_double(c.paf_o[i]) << ',' << format_double(c.paf_c[i]) << '\n';
    }
}

BruteForceEstimates brute_force_estimates(const Cohort& cohort)
{
    if (cohort.size() > 10000) {
        throw UsageError("brute_force_estimates is limited to 10000 subjects");
    }
    if (cohort.any_censored()) {
        throw DataError("brute_force_estimates needs complete follow-up");
    }
    const auto& subjects = cohort.subjects();
    std::vector<double> times;
    for (const auto& s : subjects) {
        times.push_back(s.end_time);
        if (s.inf_time) {
            times.push_back(*s.inf_time);
        }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    const double n = static_cast<double>(subjects.size());
    BruteForceEstimates out{StepCurve(0.0), StepCurve(0.0), StepCurve(0.0)};
    double surv = 1.0; // probability of no unexposed terminal event yet, exposure censored
    double cif  = 0.0;
    for (double t : times) {
        std::size_t deaths = 0, unexposed_deaths = 0, unexposed = 0;
        std::size_t at_risk = 0, d_death = 0, d_discharge = 0;
        for (const auto& s : subjects) {
            const bool died_by = s.end_status == EndStatus::death && s.end_time <= t;
            deaths += died_by ? 1 : 0;
            const bool exposed_by = s.inf_time && *s.inf_time <= t;
            if (!exposed_by) {
                ++unexposed;
                unexposed_deaths += died_by ? 1 : 0;
            }
            const double exit = s.inf_time ? *s.inf_time : s.end_time;
            if (exit >= t) {
                ++at_risk;
                if (!s.inf_time && s.end_time == t) {
                    (s.end_status == EndStatus::death ? d_death : d_discharge) += 1;
                }
            }
        }
        out.death.push(t, static_cast<double>(deaths) / n);
        out.cpf.push(t, unexposed > 0 ? static_cast<double>(unexposed_deaths) / static_cast<double>(unexposed)
                                      : undefined_value);
        if (at_risk > 0) {
            const double y = static_cast<double>(at_risk);
            cif += surv * static_cast<double>(d_death) / y;
            surv *= 1.0 - static_cast<double>(d_death + d_discharge) / y;
        }
        out.counterfactual.push(t, cif);
    }
    return out;
}

} // namespace pafms
