#include "pafms/cohort.h"
#include "pafms/errors.h"
#include "pafms/step_curve.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pafms
{

const char* to_string(EndStatus s)
{
    switch (s) {
    case EndStatus::death:
        return "death";
    case EndStatus::discharge:
        return "discharge";
    case EndStatus::censored:
        return "censored";
    }
    return "?";
}

std::string to_string(const CovariateValue& v)
{
    if (const auto* d = std::get_if<double>(&v)) {
        return format_double(*d);
    }
    return std::get<std::string>(v);
}

TiePolicy TiePolicy::parse(const std::string& text)
{
    if (text == "reject") {
        return reject();
    }
    if (text == "shift") {
        return shift();
    }
    if (text.rfind("shift:", 0) == 0) {
        const std::string num = text.substr(6);
        double eps            = 0.0;
        auto res              = std::from_chars(num.data(), num.data() + num.size(), eps);
        if (res.ec != std::errc() || res.ptr != num.data() + num.size() || !(eps > 0.0) || !std::isfinite(eps)) {
            throw UsageError("tie policy: epsilon must be a positive number, got '" + num + "'");
        }
        return shift(eps);
    }
    throw UsageError("tie policy must be 'reject' or 'shift:<eps>', got '" + text + "'");
}

std::string TiePolicy::to_string() const
{
    return kind == Kind::reject ? std::string("reject") : "shift:" + format_double(epsilon);
}

namespace
{

void validate_subject(const Subject& s)
{
    if (s.id.empty()) {
        throw DataError("subject with empty id");
    }
    if (!(s.end_time > 0.0) || !std::isfinite(s.end_time)) {
        throw DataError("subject " + s.id + ": end_time must be positive");
    }
    if (s.inf_time) {
        if (!(*s.inf_time > 0.0) || !(*s.inf_time < s.end_time)) {
            throw DataError("subject " + s.id + ": inf_time must satisfy 0 < inf_time < end_time");
        }
    }
}

} // namespace

Cohort::Cohort(std::vector<Subject> subjects, std::vector<std::string> covariate_names, TiePolicy tie_policy,
               std::optional<double> horizon, std::vector<Diagnostic> diagnostics)
    : m_subjects(std::move(subjects))
    , m_covariate_names(std::move(covariate_names))
    , m_tie_policy(tie_policy)
    , m_diagnostics(std::move(diagnostics))
{
    std::unordered_set<std::string> seen;
    double max_end = 0.0;
    for (const auto& s : m_subjects) {
        validate_subject(s);
        if (s.covariates.size() != m_covariate_names.size()) {
            throw DataError("subject " + s.id + ": expected " + std::to_string(m_covariate_names.size()) +
                            " covariates");
        }
        if (!seen.insert(s.id).second) {
            throw DataError("duplicate id " + s.id);
        }
        max_end = std::max(max_end, s.end_time);
    }
    if (horizon) {
        if (!(*horizon > 0.0) || *horizon < max_end) {
            throw DataError("horizon must be positive and no smaller than the largest end_time");
        }
        m_horizon = *horizon;
    }
    else {
        m_horizon = m_subjects.empty() ? 1.0 : max_end;
    }
}

std::size_t Cohort::covariate_index(const std::string& name) const
{
    auto it = std::find(m_covariate_names.begin(), m_covariate_names.end(), name);
    if (it == m_covariate_names.end()) {
        throw UsageError("unknown covariate '" + name + "'");
    }
    return static_cast<std::size_t>(it - m_covariate_names.begin());
}

bool Cohort::integer_times() const
{
    auto whole = [](double x) {
        return std::floor(x) == x;
    };
    return std::all_of(m_subjects.begin(), m_subjects.end(), [&](const Subject& s) {
        return whole(s.end_time) && (!s.inf_time || whole(*s.inf_time));
    });
}

bool Cohort::any_censored() const
{
    return std::any_of(m_subjects.begin(), m_subjects.end(), [](const Subject& s) {
        return s.end_status == EndStatus::censored;
    });
}

Cohort Cohort::subset(const std::vector<std::size_t>& indices) const
{
    std::vector<Subject> out;
    out.reserve(indices.size());
    std::unordered_map<std::size_t, std::size_t> copies;
    for (std::size_t idx : indices) {
        Subject s           = m_subjects.at(idx);
        const std::size_t k = copies[idx]++;
        if (k > 0) {
            s.id += "#" + std::to_string(k);
        }
        out.push_back(std::move(s));
    }
    return Cohort(std::move(out), m_covariate_names, m_tie_policy, m_horizon);
}

// ---------------------------------------------------------------------------
// CSV

namespace
{

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        fields.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

std::optional<double> parse_number(const std::string& s)
{
    if (s.empty()) {
        return std::nullopt;
    }
    const char* b = s.data();
    if (*b == '+') {
        ++b;
    }
    double v = 0.0;
    auto res = std::from_chars(b, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

double parse_time(const std::string& field, const char* name, std::size_t row)
{
    auto v = parse_number(field);
    if (!v) {
        throw ParseError(row, std::string(name) + " is not a number: '" + field + "'");
    }
    if (*v < 0.0) {
        throw ParseError(row, std::string("negative ") + name);
    }
    return *v;
}

} // namespace

Cohort parse_cohort(std::istream& source, TiePolicy tie_policy, std::optional<double> horizon)
{
    std::string line;
    std::size_t row = 0;
    std::vector<std::string> header;
    while (std::getline(source, line)) {
        ++row;
        if (!trim(line).empty()) {
            header = split_fields(line);
            break;
        }
    }
    if (header.empty()) {
        throw ParseError(row, "missing header");
    }
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        header[0] = header[0].substr(3);
    }
    static const char* required[] = {"id", "inf_time", "end_time", "end_status"};
    if (header.size() < 4) {
        throw ParseError(row, "header must start with id,inf_time,end_time,end_status");
    }
    for (std::size_t k = 0; k < 4; ++k) {
        if (header[k] != required[k]) {
            throw ParseError(row, "header column " + std::to_string(k + 1) + " must be '" + required[k] + "'");
        }
    }
    std::vector<std::string> covariate_names(header.begin() + 4, header.end());
    for (const auto& name : covariate_names) {
        if (name.empty()) {
            throw ParseError(row, "empty covariate name in header");
        }
    }

    std::vector<Subject> subjects;
    std::vector<Diagnostic> diagnostics;
    std::unordered_map<std::string, std::size_t> id_rows;
    while (std::getline(source, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
        }
        Subject s;
        s.id = fields[0];
        if (s.id.empty()) {
            throw ParseError(row, "empty id");
        }
        if (auto [it, inserted] = id_rows.emplace(s.id, row); !inserted) {
            throw ParseError(row, "duplicate id '" + s.id + "' (first seen on row " + std::to_string(it->second) +
                                      ")");
        }
        if (!fields[1].empty()) {
            s.inf_time = parse_time(fields[1], "inf_time", row);
        }
        s.end_time = parse_time(fields[2], "end_time", row);
        if (!(s.end_time > 0.0)) {
            throw ParseError(row, "end_time must be positive");
        }
        const std::string& status = fields[3];
        if (status == "death") {
            s.end_status = EndStatus::death;
        }
        else if (status == "discharge") {
            s.end_status = EndStatus::discharge;
        }
        else if (status == "censored") {
            s.end_status = EndStatus::censored;
        }
        else {
            throw ParseError(row, "unknown end_status '" + status + "'");
        }
        if (s.inf_time) {
            if (!(*s.inf_time > 0.0)) {
                throw ParseError(row, "inf_time must be positive");
            }
            if (*s.inf_time > s.end_time) {
                throw ParseError(row, "inf_time > end_time");
            }
            if (*s.inf_time == s.end_time) {
                if (tie_policy.kind == TiePolicy::Kind::reject) {
                    throw ParseError(row, "inf_time == end_time (tie policy reject)");
                }
                const double shifted = s.end_time - tie_policy.epsilon;
                if (!(shifted > 0.0)) {
                    throw ParseError(row, "inf_time == end_time and shift would make inf_time non-positive");
                }
                diagnostics.push_back({row, s.id,
                                       "inf_time equal to end_time " + format_double(s.end_time) + "; shifted to " +
                                           format_double(shifted)});
                s.inf_time = shifted;
            }
        }
        for (std::size_t k = 4; k < fields.size(); ++k) {
            if (fields[k].empty()) {
                throw ParseError(row, "missing value for covariate '" + header[k] + "'");
            }
            if (auto v = parse_number(fields[k])) {
                s.covariates.emplace_back(*v);
            }
            else {
                s.covariates.emplace_back(fields[k]);
            }
        }
        subjects.push_back(std::move(s));
    }
    if (horizon) {
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            if (subjects[i].end_time > *horizon) {
                throw DataError("subject " + subjects[i].id + ": end_time exceeds horizon " +
                                format_double(*horizon));
            }
        }
    }
    return Cohort(std::move(subjects), std::move(covariate_names), tie_policy, horizon, std::move(diagnostics));
}

Cohort read_cohort_file(const std::string& path, TiePolicy tie_policy, std::optional<double> horizon)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return parse_cohort(in, tie_policy, horizon);
}

void write_cohort(std::ostream& os, const Cohort& cohort)
{
    os << "id,inf_time,end_time,end_status";
    for (const auto& name : cohort.covariate_names()) {
        os << ',' << name;
    }
    os << '\n';
    for (const auto& s : cohort.subjects()) {
        os << s.id << ',' << (s.inf_time ? format_double(*s.inf_time) : std::string()) << ','
           << format_double(s.end_time) << ',' << to_string(s.end_status);
        for (const auto& c : s.covariates) {
            os << ',' << to_string(c);
        }
        os << '\n';
    }
}

CohortSummary summarize(const Cohort& cohort)
{
    CohortSummary out;
    out.n = cohort.size();
    for (const auto& s : cohort.subjects()) {
        out.person_days += s.end_time;
        if (s.exposed()) {
            ++out.exposed;
            out.person_days_exposed += s.end_time - *s.inf_time;
            switch (s.end_status) {
            case EndStatus::death:
                ++out.exposed_deaths;
                break;
            case EndStatus::discharge:
                ++out.exposed_discharges;
                break;
            case EndStatus::censored:
                ++out.exposed_censored;
                break;
            }
        }
        else {
            switch (s.end_status) {
            case EndStatus::death:
                ++out.unexposed_deaths;
                break;
            case EndStatus::discharge:
                ++out.unexposed_discharges;
                break;
            case EndStatus::censored:
                ++out.unexposed_censored;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transitions

TransitionRecords to_transitions(const Cohort& cohort)
{
    TransitionRecords rec;
    rec.covariate_names = cohort.covariate_names();
    rec.tie_policy      = cohort.tie_policy();
    rec.horizon         = cohort.horizon();
    rec.rows.reserve(cohort.size() * 2);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const Subject& s = cohort[i];
        rec.subject_ids.push_back(s.id);
        rec.covariates.push_back(s.covariates);
        if (s.exposed()) {
            rec.rows.push_back({i, State::admission, State::exposed, 0.0, *s.inf_time});
            State to = State::censored;
            if (s.end_status == EndStatus::death) {
                to = State::death_exposed;
            }
            else if (s.end_status == EndStatus::discharge) {
                to = State::discharge_exposed;
            }
            rec.rows.push_back({i, State::exposed, to, *s.inf_time, s.end_time});
        }
        else {
            State to = State::censored;
            if (s.end_status == EndStatus::death) {
                to = State::death_unexposed;
            }
            else if (s.end_status == EndStatus::discharge) {
                to = State::discharge_unexposed;
            }
            rec.rows.push_back({i, State::admission, to, 0.0, s.end_time});
        }
    }
    return rec;
}

Cohort from_transitions(const TransitionRecords& records)
{
    std::vector<Subject> subjects(records.num_subjects());
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        subjects[i].id         = records.subject_ids[i];
        subjects[i].covariates = records.covariates[i];
    }
    for (const auto& r : records.rows) {
        Subject& s = subjects.at(r.subject);
        if (r.to == State::exposed) {
            s.inf_time = r.t_stop;
            continue;
        }
        s.end_time = r.t_stop;
        switch (r.to) {
        case State::death_unexposed:
        case State::death_exposed:
            s.end_status = EndStatus::death;
            break;
        case State::discharge_unexposed:
        case State::discharge_exposed:
            s.end_status = EndStatus::discharge;
            break;
        default:
            s.end_status = EndStatus::censored;
            break;
        }
    }
    return Cohort(std::move(subjects), records.covariate_names, records.tie_policy, records.horizon);
}

// ---------------------------------------------------------------------------
// Daily panel

DailyPanel discretize(const Cohort& cohort, bool allow_drop)
{
    std::vector<std::string> censored;
    for (const auto& s : cohort.subjects()) {
        if (s.end_status == EndStatus::censored) {
            censored.push_back(s.id);
        }
    }
    if (!censored.empty() && !allow_drop) {
        std::string list;
        for (std::size_t k = 0; k < censored.size(); ++k) {
            list += (k ? "," : "") + censored[k];
        }
        throw DataError("discrete estimators require complete follow-up; censored subjects: " + list);
    }

    DailyPanel panel;
    panel.days            = static_cast<int>(std::ceil(cohort.horizon()));
    panel.covariate_names = cohort.covariate_names();
    panel.dropped_ids     = censored;
    for (const auto& id : censored) {
        panel.diagnostics.push_back({0, id, "censored subject dropped from daily panel"});
    }
    const auto days = static_cast<std::size_t>(panel.days);
    for (const auto& s : cohort.subjects()) {
        if (s.end_status == EndStatus::censored) {
            continue;
        }
        std::vector<std::uint8_t> a(days, 0), e(days, 0);
        const std::uint8_t code = s.end_status == EndStatus::death ? 1 : 2;
        for (std::size_t d = 1; d <= days; ++d) {
            const double day = static_cast<double>(d);
            a[d - 1]         = (s.inf_time && *s.inf_time <= day) ? 1 : 0;
            e[d - 1]         = s.end_time <= day ? code : 0;
        }
        panel.ids.push_back(s.id);
        panel.covariates.push_back(s.covariates);
        panel.exposure.push_back(std::move(a));
        panel.outcome.push_back(std::move(e));
    }
    return panel;
}

} // namespace pafms
