#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

// end-to-end checks of the command-line tool: exit codes and output shapes

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_tool(const std::string& args) {
    std::string out_path = "cli_test_output.tmp";
    std::string cmd = std::string(SM_TOOL_PATH) + " " + args + " > " + out_path + " 2>&1";
    int rc = std::system(cmd.c_str());
    std::ifstream in(out_path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::remove(out_path.c_str());
    int code = -1;
    if (rc != -1) code = WEXITSTATUS(rc);
    return {code, ss.str()};
}

std::string model(const char* name) { return std::string(SM_MODEL_DIR) + "/" + name; }

} // namespace

TEST_CASE("validate: exit codes reflect the conditions") {
    CHECK(run_tool("validate --model " + model("geometric.json")).exit_code == 0);
    RunResult periodic = run_tool("validate --model " + model("periodic.json"));
    CHECK(periodic.exit_code == 1);
    CHECK(periodic.output.find("E (aperiodic return times): FAIL") != std::string::npos);
    RunResult disc = run_tool("validate --model " + model("disconnected.json"));
    CHECK(disc.exit_code == 1);
    CHECK(disc.output.find("B (communication avoiding absorption): FAIL") != std::string::npos);
    CHECK(disc.output.find("unreachable") != std::string::npos);
}

TEST_CASE("validate: json format carries the manifest") {
    RunResult r = run_tool("validate --model " + model("geometric.json") + " --format json");
    CHECK(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["condition_B"] == true);
    CHECK(j["manifest"]["command"] == "validate");
    CHECK(j["manifest"]["version"] == "0.1.0");
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run_tool("validate").exit_code == 2);                         // missing --model
    CHECK(run_tool("frobnicate --model x").exit_code == 2);             // unknown subcommand
    CHECK(run_tool("validate --model no_such_file.json").exit_code == 2);
    CHECK(run_tool("validate --model " + model("geometric.json") + " --format csv").exit_code ==
          2);
}

TEST_CASE("simulate: csv format lists estimates with oracle values") {
    RunResult r = run_tool("simulate --model " + model("quasi2.json") +
                           " --eps 0.1 --horizon 20 --trials 20000 --seed 3 --format csv");
    CHECK(r.exit_code == 0);
    CHECK(r.output.rfind("# manifest: ", 0) == 0);
    CHECK(r.output.find("state,p_hat,se,oracle") != std::string::npos);
}

TEST_CASE("expand: geometric model prints the log-series coefficients") {
    RunResult r = run_tool("expand --model " + model("geometric.json") +
                           " --order 4 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["regime"] == "pseudo-stationary");
    CHECK(std::fabs(j["rho0"].get<double>()) <= 1e-15);
    std::vector<double> c = j["c"].get<std::vector<double>>();
    REQUIRE(c.size() == 4);
    for (int n = 1; n <= 4; ++n) CHECK(std::fabs(c[n - 1] - 1.0 / n) <= 1e-10);
}

TEST_CASE("expand: quasi model at low order, and order zero") {
    RunResult r = run_tool("expand --model " + model("quasi.json") + " --order 2 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["regime"] == "quasi-stationary");
    CHECK(std::fabs(j["rho0"].get<double>() - std::log(2.0)) <= 1e-12);
    std::vector<double> c = j["c"].get<std::vector<double>>();
    REQUIRE(c.size() == 2);
    CHECK(std::fabs(c[0] - 1.0) <= 1e-10);
    CHECK(std::fabs(c[1] - 0.5) <= 1e-10);
    // order zero: just the limit exponent
    RunResult r0 = run_tool("expand --model " + model("quasi.json") + " --order 0 --format json");
    REQUIRE(r0.exit_code == 0);
    nlohmann::json j0 = nlohmann::json::parse(r0.output);
    CHECK(j0["c"].empty());
    CHECK(std::fabs(j0["rho0"].get<double>() - std::log(2.0)) <= 1e-12);
}

TEST_CASE("expand: rational backend emits exact fractions") {
    RunResult r = run_tool("expand --model " + model("geometric.json") +
                           " --order 5 --rational --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    std::vector<std::string> c = j["rational"]["c"].get<std::vector<std::string>>();
    REQUIRE(c.size() == 5);
    CHECK(c[0] == "1");
    CHECK(c[1] == "1/2");
    CHECK(c[2] == "1/3");
    CHECK(c[3] == "1/4");
    CHECK(c[4] == "1/5");
}

TEST_CASE("expand: periodic model is rejected with exit 1") {
    CHECK(run_tool("expand --model " + model("periodic.json") + " --order 2").exit_code == 1);
}

TEST_CASE("verify: ratios settle for the bundled corpus model") {
    RunResult r = run_tool("verify --model " + model("threestate.json") +
                           " --order 2 --r 1 --lambda 1 --eps 0.04,0.02,0.01 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["monotone"] == true);
    CHECK(j["within_tolerance"] == true);
    CHECK(j["rows"].size() == 3 * 2 * 2);
}

TEST_CASE("verify: csv output starts with the manifest comment") {
    RunResult r = run_tool("verify --model " + model("geometric.json") +
                           " --order 1 --eps 0.04,0.02 --format csv");
    CHECK(r.exit_code == 0);
    CHECK(r.output.rfind("# manifest: ", 0) == 0);
    CHECK(r.output.find("eps,n,i,j,predicted,oracle,ratio") != std::string::npos);
}

TEST_CASE("simulate: agrees with the oracle and is seed-stable") {
    std::string args = "simulate --model " + model("geometric.json") +
                       " --eps 0.1 --horizon 10 --trials 40000 --seed 7 --format json";
    RunResult a = run_tool(args);
    REQUIRE(a.exit_code == 0);
    RunResult b = run_tool(args);
    nlohmann::json ja = nlohmann::json::parse(a.output);
    nlohmann::json jb = nlohmann::json::parse(b.output);
    CHECK(ja["p_hat"] == jb["p_hat"]);
    CHECK(ja["within_4se"] == true);
}

TEST_CASE("--out writes the payload to a file") {
    std::string path = "cli_out_test.json";
    RunResult r = run_tool("validate --model " + model("geometric.json") +
                           " --format json --out " + path);
    CHECK(r.exit_code == 0);
    CHECK(r.output.empty());
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    CHECK(j["condition_A"] == true);
    std::remove(path.c_str());
}

TEST_CASE("oracle: dumps the exact arrays as CSV") {
    RunResult r = run_tool("oracle --model " + model("quasi.json") +
                           " --eps 0.0 --horizon 8 --format csv");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.rfind("# manifest: ", 0) == 0);
    std::istringstream is(r.output);
    std::string line;
    std::getline(is, line); // manifest
    std::getline(is, line);
    CHECK(line == "n,g,h_1,P_1,absorbed");
    std::getline(is, line); // n = 0
    CHECK(line.substr(0, 4) == "0,0,");
    // survivals halve each step at the limit
    std::getline(is, line);
    CHECK(line.find("0.5") != std::string::npos);
}
