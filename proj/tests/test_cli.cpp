#include "cli.h"

#include "support.h"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using pafms::cli::run;

namespace
{

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "paf_msm");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class TempDir
{
public:
    TempDir()
    {
        static int counter = 0;
        m_path = fs::temp_directory_path() / ("paf_msm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(m_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(m_path, ec);
    }
    std::string write(const std::string& name, const std::string& text) const
    {
        std::ofstream(m_path / name) << text;
        return (m_path / name).string();
    }
    std::string read(const std::string& name) const
    {
        std::ifstream in(m_path / name);
        return {std::istreambuf_iterator<char>(in), {}};
    }
    std::string path(const std::string& name = "") const
    {
        return (m_path / name).string();
    }

private:
    fs::path m_path;
};

const char* hazards = R"({"alpha01": [{"until": 6, "rate": 0.15}], "alpha02": 0.08, "alpha03": 0.03,
                          "alpha14": 0.06, "alpha15": 0.05, "tau": 400, "round_days": true})";

} // namespace

TEST_CASE("usage errors exit 1")
{
    CHECK(cli({}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"estimate"}).code == 1);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("validate reports the offending row and exits 2")
{
    TempDir d;
    const auto bad = d.write("bad.csv", "id,inf_time,end_time,end_status\n1,,4,death\n2,7,5,death\n");
    const auto r   = cli({"validate", "--input", bad});
    CHECK(r.code == 2);
    CHECK(r.err.find("row 3") != std::string::npos);

    const auto good = d.write("good.csv", "id,inf_time,end_time,end_status\n1,,4,death\n2,3,5,death\n");
    CHECK(cli({"validate", "--input", good}).code == 0);
    CHECK(cli({"validate", "--input", d.path("missing.csv")}).code == 2);
}

TEST_CASE("shifted ties are reported as warnings")
{
    TempDir d;
    const auto f = d.write("tie.csv", "id,inf_time,end_time,end_status\n1,4,4,death\n2,,3,death\n");
    const auto r = cli({"validate", "--input", f});
    CHECK(r.code == 0);
    CHECK(r.err.find("row 2") != std::string::npos);
    CHECK(cli({"validate", "--input", f, "--tie-policy", "reject"}).code == 2);
}

TEST_CASE("simulate, check and estimate end to end")
{
    TempDir d;
    const auto spec = d.write("spec.json", hazards);
    const auto sim  = cli({"simulate", "--input", spec, "--n", "300", "--seed", "7"});
    REQUIRE(sim.code == 0);
    const auto cohort = d.write("cohort.csv", sim.out);

    const auto check = cli({"check", "--input", cohort});
    CHECK(check.code == 0);
    CHECK(check.out.find("FAIL") == std::string::npos);
    CHECK(check.out.find("PASS paf_c multistate == ipw") != std::string::npos);

    const auto est = cli({"estimate", "--input", cohort, "--estimand", "paf_c", "--estimator", "multistate"});
    CHECK(est.code == 0);
    CHECK(est.out.rfind("t,estimate,lower,upper,defined\n", 0) == 0);

    const auto at = cli({"estimate", "--input", cohort, "--estimand", "paf_o", "--estimator", "naive", "--at", "20"});
    CHECK(at.code == 0);
    CHECK(at.err.find("deaths by t") != std::string::npos);

    const auto mismatched = cli({"estimate", "--input", cohort, "--estimand", "paf_c", "--estimator", "naive"});
    CHECK(mismatched.code == 1);

    CHECK(cli({"summary", "--input", cohort}).out.find("n,300") != std::string::npos);
    CHECK(cli({"cox", "--input", cohort}).code == 0);
    CHECK(cli({"cox", "--input", cohort, "--markov-test"}).out.find("inf_time") != std::string::npos);
}

TEST_CASE("outputs are identical across runs")
{
    TempDir d;
    const auto spec = d.write("spec.json", hazards);
    const auto a    = cli({"simulate", "--input", spec, "--n", "150", "--seed", "11"});
    const auto b    = cli({"simulate", "--input", spec, "--n", "150", "--seed", "11"});
    CHECK(a.out == b.out);
    const auto cohort = d.write("cohort.csv", a.out);
    const std::vector<std::string> boot{"bootstrap", "--input", cohort, "--estimand", "paf_c", "--estimator",
                                        "multistate", "--B", "40", "--seed", "3"};
    const auto x = cli(boot);
    const auto y = cli(boot);
    CHECK(x.code == 0);
    CHECK(x.out == y.out);
}

TEST_CASE("bootstrap and simulate require a seed")
{
    TempDir d;
    const auto spec = d.write("spec.json", hazards);
    CHECK(cli({"simulate", "--input", spec, "--n", "10"}).code == 1);
    const auto cohort = d.write("cohort.csv", cli({"simulate", "--input", spec, "--n", "50", "--seed", "1"}).out);
    CHECK(cli({"bootstrap", "--input", cohort, "--B", "10"}).code == 1);
}

TEST_CASE("--out writes files and a manifest")
{
    TempDir d;
    const auto spec   = d.write("spec.json", hazards);
    const auto cohort = d.write("cohort.csv", cli({"simulate", "--input", spec, "--n", "80", "--seed", "2"}).out);
    const auto r = cli({"bootstrap", "--input", cohort, "--estimand", "paf_o", "--estimator", "multistate", "--B", "20",
                        "--seed", "9", "--out", d.path("run")});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(d.path("run/bootstrap.csv")));
    CHECK(d.read("run/manifest.json").find("\"seed\": 9") != std::string::npos);
}

TEST_CASE("oracle and discrete data errors")
{
    TempDir d;
    const auto spec = d.write("spec.json", R"({"alpha01": 0.05, "alpha02": 0.05, "alpha03": 0.02,
                                               "alpha14": 0.05, "alpha15": 0.03, "tau": 10})");
    const auto r    = cli({"oracle", "--input", spec});
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 12);

    const auto censored = d.write("c.csv", "id,inf_time,end_time,end_status\n1,,4,censored\n2,1,3,death\n");
    CHECK(cli({"estimate", "--input", censored, "--estimand", "paf_c", "--estimator", "ipw"}).code == 2);
    const auto dropped =
        cli({"estimate", "--input", censored, "--estimand", "paf_c", "--estimator", "ipw", "--allow-drop-censored"});
    CHECK(dropped.code == 0);
    CHECK(dropped.err.find("id 1: censored subject dropped") != std::string::npos);
}
