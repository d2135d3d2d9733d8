#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tpm/commands.hpp"

using namespace tpm;
using tpm_test::fixture;
using json = nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const fs::path dir = fs::temp_directory_path() /
                         ("tpm_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

double column_sum(const std::vector<std::vector<std::string>>& rows, std::size_t col) {
    double s = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) s += std::stod(rows[i].at(col));
    return s;
}

json qubit_doc() { return read_json(fixture("qubit_weak_conservation.json")); }

fs::path write_doc(const fs::path& dir, const json& doc) {
    const auto path = dir / "scenario.json";
    std::ofstream(path) << doc.dump(2);
    return path;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

template <typename F>
Run run(F&& cmd, const CommandOptions& opt) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cmd(opt, out, err);
    return {code, out.str(), err.str()};
}

std::optional<json> find_check(const json& report, const std::string& name) {
    for (const auto& c : report.at("checks")) {
        if (c.at("name") == name) return json(c);
    }
    return std::nullopt;
}

} // namespace

TEST(ScenarioFile, QubitFixtureLoads) {
    const auto ls = load_scenario(fixture("qubit_weak_conservation.json"));
    EXPECT_FALSE(ls.probes_defaulted);
    EXPECT_EQ(ls.scenario.space().total(), 8);
    EXPECT_EQ(ls.file.expected_fail, (std::vector<std::string>{"full_conservation"}));
    EXPECT_DOUBLE_EQ(ls.file.tolerances.check_tol, 1e-10);
}

TEST(ScenarioFile, RoundTripIsExact) {
    for (const char* name : {"eigenstate_xi.json", "plus_state_probe.json", "padded_three_outcome.json"}) {
        const auto original = read_scenario_file(fixture(name));
        const auto dir = scratch(std::string(name).substr(0, 5));
        write_scenario_file(dir / "copy.json", original);
        const auto copy = read_scenario_file(dir / "copy.json");
        EXPECT_EQ(copy.hamiltonian, original.hamiltonian) << name;
        EXPECT_EQ(copy.process_unitary, original.process_unitary) << name;
        ASSERT_EQ(copy.probes.size(), original.probes.size());
        for (std::size_t j = 0; j < copy.probes.size(); ++j) {
            EXPECT_EQ(copy.probes[j].probe_energies, original.probes[j].probe_energies);
            EXPECT_EQ(copy.probes[j].explicit_unitary.has_value(), original.probes[j].explicit_unitary.has_value());
            if (copy.probes[j].explicit_unitary) {
                EXPECT_EQ(*copy.probes[j].explicit_unitary, *original.probes[j].explicit_unitary);
            }
        }
        EXPECT_EQ(copy.state.matrix, original.state.matrix);
        EXPECT_EQ(copy.state.amplitudes, original.state.amplitudes);
        EXPECT_EQ(copy.thetas, original.thetas);
        EXPECT_EQ(copy.expected_fail, original.expected_fail);
        EXPECT_EQ(scenario_digest(copy), scenario_digest(original));
    }
}

TEST(ScenarioFile, DigestTracksContent) {
    auto s = read_scenario_file(fixture("pointer_equal.json"));
    const auto before = scenario_digest(s);
    EXPECT_EQ(before.size(), 16u);
    s.thetas[0] += 0.5;
    EXPECT_NE(scenario_digest(s), before);
}

TEST(ScenarioFile, NonUnitaryProcessNamesTheField) {
    auto doc = qubit_doc();
    doc["system"]["process_unitary"] = json::array({json::array({1, 0}), json::array({0, 2})});
    try {
        build_scenario(parse_scenario(doc));
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.field(), "system.process_unitary");
    }
}

TEST(ScenarioFile, NonHermitianHamiltonianNamesTheField) {
    auto doc = qubit_doc();
    doc["system"]["hamiltonian"] = json::array({json::array({0, 1}), json::array({0, 1})});
    try {
        build_scenario(parse_scenario(doc));
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.field(), "system.hamiltonian");
    }
}

TEST(ScenarioFile, StructuralErrors) {
    EXPECT_THROW(parse_scenario(json::array()), ScenarioError);
    auto no_system = qubit_doc();
    no_system.erase("system");
    EXPECT_THROW(parse_scenario(no_system), ScenarioError);
    auto bad_version = qubit_doc();
    bad_version["version"] = "tpm-scenario/99";
    EXPECT_THROW(parse_scenario(bad_version), ScenarioError);
    auto one_probe = qubit_doc();
    one_probe["probes"].erase(1);
    EXPECT_THROW(parse_scenario(one_probe), ScenarioError);
    auto bad_kind = qubit_doc();
    bad_kind["state"]["kind"] = "thermal";
    EXPECT_THROW(parse_scenario(bad_kind), ScenarioError);
    auto ragged = qubit_doc();
    ragged["system"]["hamiltonian"] = json::array({json::array({0, 1}), json::array({0})});
    EXPECT_THROW(parse_scenario(ragged), ScenarioError);
    auto bad_scalar = qubit_doc();
    bad_scalar["system"]["hamiltonian"][0][0] = "zero";
    EXPECT_THROW(parse_scenario(bad_scalar), ScenarioError);
}

TEST(ScenarioFile, ProbeErrorsNameTheProbe) {
    auto doc = qubit_doc();
    doc["probes"][1]["explicit_unitary"] = json::array({json::array({1, 0}), json::array({0, 1})});
    try {
        build_scenario(parse_scenario(doc));
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.field(), "probes[1].explicit_unitary");
    }
    auto small = qubit_doc();
    small["probes"][0].erase("explicit_unitary");
    small["probes"][0]["dim"] = 1;
    small["probes"][0]["probe_energies"] = json::array({0.0});
    EXPECT_THROW(build_scenario(parse_scenario(small)), ScenarioError);
}

TEST(ScenarioFile, ComplexScalarsAsPairs) {
    const auto s = read_scenario_file(fixture("eigenstate_xi.json"));
    EXPECT_EQ(s.hamiltonian(0, 1), Complex(0.0, 0.5));
    EXPECT_EQ(json_io::read_scalar(json::array({1.5, -2.0}), "x"), Complex(1.5, -2.0));
    EXPECT_EQ(json_io::read_scalar(json(3), "x"), Complex(3.0, 0.0));
    EXPECT_THROW(json_io::read_scalar(json::array({1.0}), "x"), ScenarioError);
}

TEST(ScenarioFile, MissingProbesAreDefaulted) {
    const auto ls = load_scenario(fixture("trivial_probes.json"));
    EXPECT_TRUE(ls.probes_defaulted);
    const auto n = static_cast<Index>(ls.scenario.system().size());
    EXPECT_EQ(ls.scenario.probe(0).probe_dim(), n);
    EXPECT_EQ(max_abs(ls.scenario.probe(1).probe_hamiltonian().matrix()), 0.0);
}

TEST(Output, NumbersUseSeventeenDigits) {
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(-0.5), "-0.5");
    EXPECT_EQ(format_number(0.0), "0");
    EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
    EXPECT_THROW(format_number(std::numeric_limits<double>::quiet_NaN()), InvariantViolation);
    EXPECT_THROW(format_number(INFINITY), InvariantViolation);
}

TEST(Output, CsvHeaders) {
    const auto ls = load_scenario(fixture("qubit_weak_conservation.json"));
    std::ostringstream joint;
    write_joint_csv(joint, tpm_joint(ls.scenario.system(), ls.scenario.process(), ls.state));
    EXPECT_TRUE(joint.str().starts_with("m,n,w,p\n"));
    std::ostringstream ext;
    write_extended_csv(ext, extended_tpm(ls.scenario, ls.state));
    EXPECT_TRUE(ext.str().starts_with("m,mu,nu,n,mu2,nu2,W,p\n"));
}

TEST(Output, ExpectedFailMatching) {
    const std::vector<std::string> list{"weak_conservation", "self_consistency.probe0"};
    EXPECT_TRUE(is_expected_fail(list, "weak_conservation"));
    EXPECT_TRUE(is_expected_fail(list, "weak_conservation.probe1"));
    EXPECT_TRUE(is_expected_fail(list, "self_consistency.probe0"));
    EXPECT_FALSE(is_expected_fail(list, "self_consistency"));
    EXPECT_FALSE(is_expected_fail(list, "weak"));
    EXPECT_FALSE(is_expected_fail(list, "three_way_agreement"));
}

TEST(Output, ExitCodeRules) {
    ReportCheck ok;
    ok.name = "a";
    ok.pass = true;
    ReportCheck failing;
    failing.name = "b";
    EXPECT_EQ(checks_exit_code({ok}), 0);
    EXPECT_EQ(checks_exit_code({ok, failing}), 1);
    failing.expected_fail = true;
    EXPECT_EQ(checks_exit_code({ok, failing}), 0);
    failing.expected_fail = false;
    failing.gating = false;
    EXPECT_EQ(checks_exit_code({ok, failing}), 0);
}

TEST(Commands, RunTpmWritesTables) {
    const auto dir = scratch("out");
    CommandOptions opt;
    opt.scenario = fixture("pointer_equal.json");
    opt.out = dir;
    const auto r = run(cmd_run_tpm, opt);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    const auto joint = read_csv(dir / "joint.csv");
    ASSERT_FALSE(joint.empty());
    EXPECT_EQ(joint[0], (std::vector<std::string>{"m", "n", "w", "p"}));
    EXPECT_NEAR(column_sum(joint, 3), 1.0, 1e-9);
    const auto dist = read_csv(dir / "distribution.csv");
    EXPECT_EQ(dist[0], (std::vector<std::string>{"w", "p"}));
    EXPECT_NEAR(column_sum(dist, 1), 1.0, 1e-9);
    const auto report = read_json(dir / "report.json");
    EXPECT_EQ(report.at("exit_code"), 0);
    EXPECT_EQ(report.at("command"), "run-tpm");
}

TEST(Commands, RunExtendedWritesTables) {
    const auto dir = scratch("out");
    CommandOptions opt;
    opt.scenario = fixture("padded_three_outcome.json");
    opt.out = dir;
    const auto r = run(cmd_run_extended, opt);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    const auto ext = read_csv(dir / "extended.csv");
    EXPECT_EQ(ext[0], (std::vector<std::string>{"m", "mu", "nu", "n", "mu2", "nu2", "W", "p"}));
    EXPECT_NEAR(column_sum(ext, 7), 1.0, 1e-9);
    const auto report = read_json(dir / "report.json");
    const auto fl = find_check(report, "first_law");
    ASSERT_TRUE(fl.has_value());
    EXPECT_EQ(fl->at("pass"), true);
}

TEST(Commands, TrivialProbesReproduceSystemDistribution) {
    const auto dir = scratch("out");
    CommandOptions opt;
    opt.scenario = fixture("trivial_probes.json");
    opt.out = dir;
    const auto r = run(cmd_run_extended, opt);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "distribution.csv"), slurp(dir / "system_distribution.csv"));
    EXPECT_EQ(read_json(dir / "report.json").at("probes_defaulted"), true);
}

TEST(Commands, DocFormatWritesOnlyTheReport) {
    const auto dir = scratch("out");
    CommandOptions opt;
    opt.scenario = fixture("qubit_weak_conservation.json");
    opt.out = dir;
    opt.format = "doc";
    EXPECT_EQ(run(cmd_run_extended, opt).code, kExitOk);
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_FALSE(fs::exists(dir / "extended.csv"));
}

TEST(Commands, ReportNumbersAreFiniteAndConsistent) {
    const auto dir = scratch("out");
    CommandOptions opt;
    opt.scenario = fixture("eigenstate_xi.json");
    opt.out = dir;
    opt.count = 10;
    EXPECT_EQ(run(cmd_verify, opt).code, kExitOk);
    const auto report = read_json(dir / "report.json");
    const double tol = report.at("tolerances").at("check_tol").get<double>();
    for (const auto& c : report.at("checks")) {
        const double dev = c.at("max_deviation").get<double>();
        EXPECT_TRUE(std::isfinite(dev));
        if (c.at("name") != "three_way_agreement" && c.at("name") != "dilation.probe0" &&
            c.at("name") != "dilation.probe1" && !c.at("name").get<std::string>().starts_with("weak_conservation")) {
            EXPECT_EQ(c.at("pass").get<bool>(), dev <= tol) << c.dump();
        }
    }
}

TEST(Commands, VerifyHonoursExpectedFailures) {
    CommandOptions opt;
    opt.scenario = fixture("qubit_weak_conservation.json");
    opt.count = 10;
    const auto r = run(cmd_verify, opt);
    EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS weak_conservation.probe0"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("FAIL (expected) full_conservation.probe0"), std::string::npos) << r.out;

    const auto dir = scratch("in");
    auto doc = qubit_doc();
    doc.erase("expected_fail");
    opt.scenario = write_doc(dir, doc);
    EXPECT_EQ(run(cmd_verify, opt).code, kExitCheckFailed);
}

TEST(Commands, VerifySubsetOfChecks) {
    CommandOptions opt;
    opt.scenario = fixture("plus_state_probe.json");
    opt.checks = {"self_consistency"};
    const auto r = run(cmd_verify, opt);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("self_consistency"), std::string::npos);
    EXPECT_EQ(r.out.find("first_law"), std::string::npos);

    opt.checks = {"no_such_check"};
    EXPECT_EQ(run(cmd_verify, opt).code, kExitInputError);
}

TEST(Commands, InputErrorsExitTwo) {
    const auto dir = scratch("in");
    CommandOptions opt;
    opt.out = dir / "out";
    opt.scenario = dir / "missing.json";
    EXPECT_EQ(run(cmd_run_tpm, opt).code, kExitInputError);

    auto doc = qubit_doc();
    doc["system"]["process_unitary"] = json::array({json::array({1, 0}), json::array({0, 2})});
    opt.scenario = write_doc(dir, doc);
    const auto r = run(cmd_run_extended, opt);
    EXPECT_EQ(r.code, kExitInputError);
    EXPECT_NE(r.err.find("system.process_unitary"), std::string::npos) << r.err;

    CommandOptions no_out;
    no_out.scenario = fixture("pointer_equal.json");
    EXPECT_EQ(run(cmd_run_tpm, no_out).code, kExitInputError);

    CommandOptions bad_tol;
    bad_tol.scenario = fixture("pointer_equal.json");
    bad_tol.tol = -1.0;
    EXPECT_EQ(run(cmd_verify, bad_tol).code, kExitInputError);
}

TEST(Commands, SweepIsDeterministic) {
    CommandOptions opt;
    opt.mode = "pointer-equal";
    opt.seed = 3;
    opt.count = 6;
    opt.out = scratch("a");
    opt.threads = 1;
    EXPECT_EQ(run(cmd_sweep, opt).code, kExitOk);
    const auto first = slurp(opt.out / "sweep.csv");
    opt.out = scratch("b");
    opt.threads = 2;
    EXPECT_EQ(run(cmd_sweep, opt).code, kExitOk);
    EXPECT_EQ(slurp(opt.out / "sweep.csv"), first);
    const auto rows = read_csv(opt.out / "sweep.csv");
    EXPECT_EQ(rows.size(), 7u);
    EXPECT_EQ(rows[0][0], "index");
    const auto summary = read_json(opt.out / "summary.json");
    EXPECT_TRUE(summary.contains("checks"));
}

TEST(Commands, SweepRejectsBadArguments) {
    CommandOptions opt;
    opt.out = scratch("out");
    opt.mode = "bogus";
    EXPECT_EQ(run(cmd_sweep, opt).code, kExitInputError);
    opt.mode = "eigenstate-xi";
    opt.count = 0;
    EXPECT_EQ(run(cmd_sweep, opt).code, kExitInputError);
    opt.count = 2;
    opt.system_min = 1;
    EXPECT_EQ(run(cmd_sweep, opt).code, kExitInputError);
}
