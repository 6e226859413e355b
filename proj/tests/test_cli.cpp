#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("sadic_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    Result run(const std::string& args, const std::string& env = "") const {
        std::string out = path("stdout.txt"), err = path("stderr.txt");
        std::string cmd = env + " " + SADIC_CLI_PATH + std::string(" ") + args + " >" + out + " 2>" + err;
        int st = std::system(cmd.c_str());
        return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(out), slurp(err)};
    }

    fs::path dir_;
};

const std::string kForm = R"('{"dim":3,"places":{"inf":[[1,0,0],[0,1,0],[0,0,-2]]}}')";

}  // namespace

TEST_F(Cli, ZetaPrintsValueWithEulerCheck) {
    auto r = run("zeta --d 2 --primes 2 --tol 1e-9 --manifest " + path("m.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("d,primes,series,error_bound,terms,euler,delta"), std::string::npos);
    EXPECT_NE(r.out.find(",1.2337005501"), std::string::npos);
    auto m = json::parse(slurp(path("m.json")));
    EXPECT_EQ(m["command"], "zeta");
    EXPECT_TRUE(m["seed"].is_null());
    EXPECT_TRUE(m["versions"].contains("gmp"));
    EXPECT_TRUE(m["wall_ms"].is_number());
}

TEST_F(Cli, SameSeedSameBytesAcrossThreadCounts) {
    const std::string base = "moment-mc --space affine --d 2 --primes 2 --f disk:2 --order 2 --n 3000 --seed 7 ";
    ASSERT_EQ(run(base + "--threads 1 --out " + path("a.csv")).code, 0);
    ASSERT_EQ(run(base + "--threads 4 --out " + path("b.csv")).code, 0);
    ASSERT_EQ(run(base + "--out " + path("c.csv"), "SADIC_THREADS=3").code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("c.csv")));
    EXPECT_EQ(json::parse(slurp(path("c.json")))["inputs"]["threads"], "3");
    ASSERT_EQ(run("moment-mc --space affine --d 2 --primes 2 --f disk:2 --order 2 --n 3000 --seed 8 --out " + path("d.csv")).code, 0);
    EXPECT_NE(slurp(path("a.csv")), slurp(path("d.csv")));
}

TEST_F(Cli, SweepIsReproducibleAndHasTheDocumentedColumns) {
    const std::string args = "sweep --form " + kForm + " --primes 3 --ladder '8:0;16:1' --c-inf 4 --q 2 --w 1,0,1 --no-timing ";
    ASSERT_EQ(run(args + "--threads 1 --out " + path("a.csv")).code, 0);
    ASSERT_EQ(run(args + "--threads 3 --out " + path("b.csv")).code, 0);
    auto a = slurp(path("a.csv"));
    EXPECT_EQ(a, slurp(path("b.csv")));
    EXPECT_EQ(a.substr(0, a.find('\n')), "T_inf,t_3,N,vol_I,prediction,ratio,wall_ms");
    auto m = json::parse(slurp(path("a.json")));
    EXPECT_FALSE(m["results"]["partial"].get<bool>());
    EXPECT_TRUE(m["results"]["c_Q"].is_number());
}

TEST_F(Cli, ManifestReplaysTheRun) {
    ASSERT_EQ(run("variance --d 2 --primes 2 --f disk:1.5 --f-tp 1 --M 5,10 --n 2000 --seed 11 --out " + path("a.csv")).code, 0);
    auto m = json::parse(slurp(path("a.json")));
    EXPECT_EQ(m["seed"], 11);
    EXPECT_EQ(m["inputs"]["f-tp"], "1");
    // the command comes from the manifest as well
    ASSERT_EQ(run("--config " + path("a.json") + " --out " + path("b.csv")).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    auto m2 = json::parse(slurp(path("b.json")));
    EXPECT_EQ(m["inputs"], m2["inputs"]);
}

TEST_F(Cli, FormFromFileIsInlinedIntoTheManifest) {
    {
        std::ofstream f(path("form.json"));
        f << R"({"dim":3,"places":{"inf":[["1/2",0,0],[0,"1/2",0],[0,0,-1]],"3":[["1/2",0,0],[0,"1/2",0],[0,0,-1]]},"shift":["1/3",0,0]})";
    }
    auto r = run("count --form " + path("form.json") + " --primes 3 --T-inf 12 --t-p 0 --c-inf 2 --no-timing --out " + path("a.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    auto m = json::parse(slurp(path("a.json")));
    EXPECT_EQ(m["inputs"]["form"].get<std::string>().front(), '{');
    fs::remove(path("form.json"));
    ASSERT_EQ(run("--config " + path("a.json") + " --out " + path("b.csv")).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(Cli, ConfigErrorsExitTwo) {
    EXPECT_EQ(run("moment-mc --d 2 --primes 2 --n 10").code, 2);  // no seed
    EXPECT_EQ(run("variance --d 2 --n 10").code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("zeta --bogus 1").code, 2);
    EXPECT_EQ(run("zeta --d x").code, 2);
    EXPECT_EQ(run("count --form '{\"dim\":3}' --primes 3").code, 2);
    EXPECT_EQ(run("moment-mc --seed 1 --exact --d 3 --primes 2 --n 10").code, 2);
    {
        std::ofstream f(path("cfg.json"));
        f << R"({"command":"zeta","d":3,"nonsense":1})";
    }
    EXPECT_EQ(run("--config " + path("cfg.json")).code, 2);
    auto r = run("sweep --form " + kForm + " --primes 3 --ladder '8:0' --kappa 1");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("[0, 1)"), std::string::npos) << r.err;
}

TEST_F(Cli, BudgetExhaustionExitsThreeAndKeepsRows) {
    auto r = run("sweep --form " + kForm + " --primes 3 --ladder '8:0;300:2' --c-inf 4 --max-candidates 50000 --no-timing --out " +
                 path("a.csv"));
    EXPECT_EQ(r.code, 3);
    auto csv = slurp(path("a.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);  // header and the first rung
    auto m = json::parse(slurp(path("a.json")));
    EXPECT_TRUE(m["results"]["partial"].get<bool>());
    EXPECT_EQ(m["exit_code"], 3);
}

TEST_F(Cli, ConfigFileAndFlagOverride) {
    {
        std::ofstream f(path("cfg.json"));
        f << R"({"command":"group-order","d":2,"q":5})";
    }
    auto r = run("--config " + path("cfg.json") + " --manifest " + path("m.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("2,5,120,"), std::string::npos);
    r = run("group-order --config " + path("cfg.json") + " --q 3 --manifest " + path("m.json"));
    EXPECT_NE(r.out.find("2,3,24,"), std::string::npos);
}

TEST_F(Cli, RescaleCheckAndOrbit) {
    auto r = run("rescale-check --form " + kForm + " --primes 3 --q 2 --w 1,0,1 --T-inf 20 --c-inf 6 --manifest " + path("m.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find(",true"), std::string::npos);
    r = run("orbit --d 2 --q 5 --w 1,0 --t 1,3,7,9 --manifest " + path("m.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("representative,7,"), std::string::npos);
}

TEST_F(Cli, MomentRhsNegativeControlChangesValue) {
    auto a = run("moment-rhs --primes 3 --t-max 10 --a-max 10 --depth 2 --manifest " + path("m.json"));
    auto b = run("moment-rhs --primes 3 --t-max 10 --a-max 10 --depth 2 --no-gcd-filter --manifest " + path("m.json"));
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_NE(a.out, b.out);
}
