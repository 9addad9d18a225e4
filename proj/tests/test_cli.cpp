#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "panelssm/cli.hpp"
#include "panelssm/csv.hpp"
#include "panelssm/errors.hpp"
#include "panelssm/panel_io.hpp"

using namespace panelssm;

namespace {

using Entries = std::vector<std::pair<std::string, std::string>>;

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

ExperimentConfig base_pfilter(const std::string& out) {
    ExperimentConfig c;
    c.command = "pfilter";
    c.U = 2;
    c.N = 8;
    c.seed = 17;
    c.J = 60;
    c.reps = 3;
    c.out = out;
    return c;
}

}  // namespace

TEST_CASE("kv text parsing skips comments and splits at the first equals") {
    const std::string text =
        "# a comment\n"
        "\n"
        "command = pfilter\n"
        "  param =  r 0.25  \n"
        "note = a=b=c\n";
    auto e = parse_kv_text(text);
    REQUIRE(e.size() == 3);
    CHECK(e[0] == std::pair<std::string, std::string>{"command", "pfilter"});
    CHECK(e[1] == std::pair<std::string, std::string>{"param", "r 0.25"});
    CHECK(e[2] == std::pair<std::string, std::string>{"note", "a=b=c"});

    CHECK(parse_kv_text("").empty());
    CHECK_THROWS_WITH_AS(parse_kv_text("ok = 1\nbroken line\n"), doctest::Contains("line 2"),
                         ConfigError);
    CHECK_THROWS_AS(parse_kv_text(" = value\n"), ConfigError);

    auto round = parse_kv_text(format_kv_text(e));
    CHECK(round == e);
}

TEST_CASE("parse_config dispatches every key") {
    const Entries entries = {
        {"command", "profile"},
        {"model", "gompertz"},
        {"U", "3"},
        {"N", "25"},
        {"param", "r 0.12"},
        {"param", "tau[unit2] 0.2"},
        {"seed", "99"},
        {"data_seed", "100"},
        {"workers", "4"},
        {"out", "results"},
        {"J", "500"},
        {"reps", "7"},
        {"M", "40"},
        {"nseq", "2"},
        {"rw_sd", "sigma 0.02"},
        {"rw_sd", "tau 0.05 0.01"},
        {"cooling", "hyperbolic"},
        {"cooling_fraction", "0.25"},
        {"marginalize", "true"},
        {"max_failures", "5"},
        {"block_reps", "2"},
        {"lower", "sigma 0.05"},
        {"upper", "sigma 0.2"},
        {"focal", "r"},
        {"grid", "0.02 0.3 15"},
        {"nprof", "3"},
        {"eval_reps", "4"},
        {"eval_J", "800"},
        {"span", "0.6"},
        {"level", "0.9"},
        {"input", "profile.csv"},
    };
    auto c = parse_config(entries);
    CHECK(c.command == "profile");
    CHECK(c.U == 3);
    CHECK(c.N == 25);
    REQUIRE(c.overrides.size() == 2);
    CHECK(c.overrides[1].first == "tau[unit2]");
    CHECK(c.overrides[1].second == 0.2);
    CHECK(*c.seed == 99);
    CHECK(*c.data_seed == 100);
    CHECK(c.workers == 4);
    CHECK(c.J == 500);
    CHECK(c.M == 40);
    CHECK(c.nseq == 2);
    CHECK(c.rw_sd.intensity("sigma", "", 0) == 0.02);
    CHECK(c.rw_sd.intensity("tau", "", 0) == 0.05);
    CHECK(c.rw_sd.intensity("tau", "", 3) == 0.01);
    CHECK(c.cooling.type == CoolingType::hyperbolic);
    CHECK(c.cooling.fraction_50 == 0.25);
    CHECK(c.marginalize);
    CHECK(c.max_failures == 5);
    CHECK(*c.block_reps == 2);
    CHECK(c.lower.size() == 1);
    CHECK(c.focal == "r");
    CHECK(c.grid_lo == 0.02);
    CHECK(c.grid_hi == 0.3);
    CHECK(c.grid_count == 15);
    CHECK(c.nprof == 3);
    CHECK(c.eval_reps == 4);
    CHECK(c.eval_J == 800);
    CHECK(c.span == 0.6);
    CHECK(c.level == 0.9);
    CHECK(c.input == "profile.csv");
}

TEST_CASE("parse_config rejects malformed entries") {
    CHECK_THROWS_WITH_AS(parse_config({{"commnad", "pfilter"}}), doctest::Contains("commnad"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config({{"U", "-3"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"U", "3.5"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"seed", "abc"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"span", "wide"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"param", "r"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"rw_sd", "sigma"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"rw_sd", "sigma -0.1"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"cooling", "linear"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"marginalize", "maybe"}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"grid", "0.1 0.2"}}), ConfigError);
}

TEST_CASE("config entries echo to a fixpoint") {
    const Entries raw = {
        {"command", "mif2"},   {"U", "2"},          {"N", "10"},
        {"param", "r 0.15"},   {"seed", "5"},       {"rw_sd", "r 0.02"},
        {"rw_sd", "tau 0.03"}, {"nseq", "2"},       {"lower", "r 0.05"},
        {"upper", "r 0.3"},    {"workers", "2"},    {"marginalize", "1"},
        {"out", "somewhere"},  {"cooling_fraction", "0.4"},
    };
    auto c1 = parse_config(raw);
    const auto e1 = config_entries(c1);
    auto c2 = parse_config(e1);
    const auto e2 = config_entries(c2);
    CHECK(e1 == e2);
    CHECK(format_kv_text(e1) == format_kv_text(e2));
    CHECK(c2.rw_sd.intensity("tau", "", 0) == 0.03);
    CHECK(*c2.data_seed == 5);
}

TEST_CASE("validate_config walks every failure branch") {
    auto valid = base_pfilter("out");
    CHECK_NOTHROW(validate_config(valid));

    auto c = valid;
    c.command = "plot";
    CHECK_THROWS_WITH_AS(validate_config(c), doctest::Contains("plot"), ConfigError);
    c = valid;
    c.out = "";
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c = valid;
    c.workers = 0;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c = valid;
    c.U = 0;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c.data_dir = "somewhere";
    CHECK_NOTHROW(validate_config(c));
    c = valid;
    c.seed.reset();
    CHECK_THROWS_WITH_AS(validate_config(c), doctest::Contains("seed"), ConfigError);
    c = valid;
    c.J = 0;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c = valid;
    c.reps = 0;
    CHECK_THROWS_AS(validate_config(c), ConfigError);

    ExperimentConfig k;
    k.command = "kalman";
    k.data_dir = "somewhere";
    CHECK_NOTHROW(validate_config(k));
    k.data_dir.clear();
    k.U = 2;
    k.N = 5;
    CHECK_THROWS_AS(validate_config(k), ConfigError);

    ExperimentConfig m;
    m.command = "mif2";
    m.U = 2;
    m.N = 5;
    m.seed = 1;
    CHECK_THROWS_WITH_AS(validate_config(m), doctest::Contains("rw_sd"), ConfigError);
    m.rw_sd.set("r", 0.02);
    CHECK_NOTHROW(validate_config(m));
    m.M = 0;
    CHECK_THROWS_AS(validate_config(m), ConfigError);
    m.M = 10;
    m.cooling.fraction_50 = 0.0;
    CHECK_THROWS_WITH_AS(validate_config(m), doctest::Contains("cooling"), ConfigError);
    m.cooling.fraction_50 = 0.5;
    m.lower = {{"r", 0.05}};
    CHECK_THROWS_WITH_AS(validate_config(m), doctest::Contains("upper"), ConfigError);
    m.upper = {{"r", 0.3}};
    CHECK_NOTHROW(validate_config(m));
    m.lower.clear();
    m.upper.clear();
    m.nseq = 3;
    CHECK_THROWS_WITH_AS(validate_config(m), doctest::Contains("nseq"), ConfigError);

    ExperimentConfig pr;
    pr.command = "profile";
    pr.U = 2;
    pr.N = 5;
    pr.seed = 1;
    pr.rw_sd.set("sigma", 0.02);
    CHECK_THROWS_WITH_AS(validate_config(pr), doctest::Contains("focal"), ConfigError);
    pr.focal = "r";
    CHECK_THROWS_WITH_AS(validate_config(pr), doctest::Contains("grid"), ConfigError);
    pr.grid_lo = 0.3;
    pr.grid_hi = 0.1;
    pr.grid_count = 5;
    CHECK_THROWS_AS(validate_config(pr), ConfigError);
    pr.grid_lo = 0.05;
    pr.grid_hi = 0.3;
    CHECK_NOTHROW(validate_config(pr));
    pr.nprof = 0;
    CHECK_THROWS_AS(validate_config(pr), ConfigError);
    pr.nprof = 2;
    pr.lower = {{"r", 0.01}};
    pr.upper = {{"r", 0.5}};
    CHECK_THROWS_WITH_AS(validate_config(pr), doctest::Contains("focal"), ConfigError);

    ExperimentConfig mc;
    mc.command = "mcap";
    CHECK_THROWS_WITH_AS(validate_config(mc), doctest::Contains("input"), ConfigError);
    mc.input = "profile.csv";
    CHECK_THROWS_WITH_AS(validate_config(mc), doctest::Contains("focal"), ConfigError);
    mc.focal = "r";
    CHECK_NOTHROW(validate_config(mc));
    mc.level = 1.0;
    CHECK_THROWS_AS(validate_config(mc), ConfigError);
    mc.level = 0.95;
    mc.span = 0.0;
    CHECK_THROWS_AS(validate_config(mc), ConfigError);
}

TEST_CASE("simulate writes a reloadable panel and a manifest that reruns identically") {
    const std::string dir = testutil::temp_dir("cli_sim");
    ExperimentConfig c;
    c.command = "simulate";
    c.U = 2;
    c.N = 6;
    c.seed = 7;
    c.out = dir + "/a";
    REQUIRE(run(c) == kExitOk);
    CHECK(file_exists(c.out + "/panel/panel.txt"));
    CHECK(file_exists(c.out + "/panel/params.csv"));
    CHECK(file_exists(c.out + "/plot.csv"));
    CHECK(file_exists(c.out + "/manifest.txt"));

    auto plot = read_csv(c.out + "/plot.csv");
    CHECK(plot.columns == std::vector<std::string>{"unit", "time", "name", "value"});
    CHECK(plot.rows.size() == 12);

    auto loaded = load_panel(c.out + "/panel");
    CHECK(loaded.unit_count() == 2);
    CHECK(loaded.units[0].n_obs() == 6);

    auto c2 = parse_config_file(c.out + "/manifest.txt");
    c2.out = dir + "/b";
    REQUIRE(run(c2) == kExitOk);
    CHECK(testutil::slurp(c2.out + "/plot.csv") == testutil::slurp(c.out + "/plot.csv"));
    CHECK(testutil::slurp(c2.out + "/panel/panel.txt") ==
          testutil::slurp(c.out + "/panel/panel.txt"));
    CHECK(testutil::slurp(c2.out + "/panel/data_1_unit1.csv") ==
          testutil::slurp(c.out + "/panel/data_1_unit1.csv"));
    CHECK(testutil::slurp(c2.out + "/panel/params.csv") ==
          testutil::slurp(c.out + "/panel/params.csv"));
}

TEST_CASE("pfilter produces the documented table and reruns from its manifest") {
    const std::string dir = testutil::temp_dir("cli_pf");
    auto c = base_pfilter(dir + "/a");
    REQUIRE(run(c) == kExitOk);

    const std::string text = testutil::slurp(c.out + "/pfilter.csv");
    auto t = read_csv(c.out + "/pfilter.csv");
    CHECK(t.columns == std::vector<std::string>{"replicate", "unit", "loglik", "se"});
    CHECK(t.rows.size() == 3 * 3 + 2);
    CHECK(t.rows[0][0] == "1");
    CHECK(t.rows[0][1] == "unit1");
    CHECK(t.rows[2][1] == "");
    CHECK(t.rows[9][0] == "lambda1");
    CHECK(t.rows[10][0] == "lambda2");
    CHECK(parse_double(t.rows[10][3]) >= 0.0);
    CHECK(to_csv(t) == text);

    auto c2 = parse_config_file(c.out + "/manifest.txt");
    c2.out = dir + "/b";
    REQUIRE(run(c2) == kExitOk);
    CHECK(testutil::slurp(c2.out + "/pfilter.csv") == text);

    const std::string manifest = testutil::slurp(c.out + "/manifest.txt");
    CHECK(manifest.find("# exit 0") != std::string::npos);
    CHECK(manifest.find("data_seed = 17") != std::string::npos);
}

TEST_CASE("pfilter can read a saved panel directory") {
    const std::string dir = testutil::temp_dir("cli_data");
    ExperimentConfig sim;
    sim.command = "simulate";
    sim.U = 2;
    sim.N = 6;
    sim.seed = 3;
    sim.out = dir + "/sim";
    REQUIRE(run(sim) == kExitOk);

    ExperimentConfig c;
    c.command = "pfilter";
    c.data_dir = sim.out + "/panel";
    c.seed = 21;
    c.J = 50;
    c.reps = 2;
    c.out = dir + "/pf";
    REQUIRE(run(c) == kExitOk);
    auto t = read_csv(c.out + "/pfilter.csv");
    CHECK(t.rows.size() == 2 * 3 + 2);

    ExperimentConfig k;
    k.command = "kalman";
    k.data_dir = sim.out + "/panel";
    k.out = dir + "/ka";
    REQUIRE(run(k) == kExitOk);
    auto kt = read_csv(k.out + "/kalman.csv");
    CHECK(kt.columns == std::vector<std::string>{"unit", "loglik"});
    CHECK(kt.rows.size() == 3);
    CHECK(kt.rows[2][0] == "");

    k.out = dir + "/kb";
    REQUIRE(run(k) == kExitOk);
    CHECK(testutil::slurp(dir + "/kb/kalman.csv") == testutil::slurp(dir + "/ka/kalman.csv"));
}

TEST_CASE("usage errors exit with code 2 and leave error.txt, not artifacts") {
    const std::string dir = testutil::temp_dir("cli_usage");
    auto c = base_pfilter(dir + "/out");
    c.J = 0;
    CHECK(run(c) == kExitUsage);
    CHECK(file_exists(c.out + "/error.txt"));
    CHECK(!file_exists(c.out + "/pfilter.csv"));
    CHECK(!file_exists(c.out + "/manifest.txt"));
    const std::string err = testutil::slurp(c.out + "/error.txt");
    CHECK(err.find("error = config") != std::string::npos);

    auto bad = base_pfilter(dir + "/out2");
    bad.overrides = {{"zeta", 1.0}};
    CHECK(run(bad) == kExitUsage);
    CHECK(testutil::slurp(dir + "/out2/error.txt").find("zeta") != std::string::npos);
}

TEST_CASE("sub-threshold filtering failures surface as a partial exit") {
    const std::string dir = testutil::temp_dir("cli_partial");
    ExperimentConfig c;
    c.command = "pfilter";
    c.U = 1;
    c.N = 2;
    c.seed = 5;
    c.J = 40;
    c.reps = 2;
    c.overrides = {{"tau[unit1]", 1e-300}};
    c.out = dir + "/out";
    CHECK(run(c) == kExitPartial);
    CHECK(file_exists(c.out + "/pfilter.csv"));
    const std::string manifest = testutil::slurp(c.out + "/manifest.txt");
    CHECK(manifest.find("# exit 3") != std::string::npos);
    CHECK(manifest.find("# dropped 0") == std::string::npos);
}

TEST_CASE("mif2 and block-refine write estimates and traces") {
    const std::string dir = testutil::temp_dir("cli_mif");
    ExperimentConfig c;
    c.command = "mif2";
    c.U = 2;
    c.N = 8;
    c.seed = 13;
    c.J = 50;
    c.M = 4;
    c.rw_sd.set("r", 0.02);
    c.rw_sd.set("tau", 0.02);
    c.out = dir + "/mif";
    REQUIRE(run(c) == kExitOk);

    auto est = read_csv(c.out + "/estimates.csv");
    CHECK(est.columns.size() == 1 + 8 + 1);
    CHECK(est.columns.front() == "search");
    CHECK(est.columns.back() == "loglik");
    REQUIRE(est.rows.size() == 1);

    const std::string traces = testutil::slurp(c.out + "/traces_1.csv");
    std::size_t lines = 0;
    for (char ch : traces)
        if (ch == '\n') ++lines;
    CHECK(lines == 1 + 5);

    c.command = "block-refine";
    c.out = dir + "/br";
    REQUIRE(run(c) == kExitOk);
    CHECK(file_exists(c.out + "/estimates.csv"));
    auto best = read_csv(c.out + "/estimates.csv");
    CHECK(std::isfinite(parse_double(best.rows[0].back())));
}

TEST_CASE("profile and mcap chain through the CSV artifacts") {
    const std::string dir = testutil::temp_dir("cli_prof");
    ExperimentConfig c;
    c.command = "profile";
    c.U = 2;
    c.N = 6;
    c.seed = 19;
    c.J = 40;
    c.M = 2;
    c.rw_sd.set("sigma", 0.02);
    c.rw_sd.set("tau", 0.02);
    c.focal = "r";
    c.grid_lo = 0.05;
    c.grid_hi = 0.25;
    c.grid_count = 6;
    c.nprof = 1;
    c.eval_reps = 2;
    c.eval_J = 50;
    c.out = dir + "/prof";
    REQUIRE(run(c) == kExitOk);
    CHECK(file_exists(c.out + "/design.csv"));
    auto prof = read_csv(c.out + "/profile.csv");
    CHECK(prof.rows.size() == 6);
    CHECK(prof.columns.back() == "loglik_se");

    ExperimentConfig mc;
    mc.command = "mcap";
    mc.input = c.out + "/profile.csv";
    mc.focal = "r";
    mc.out = dir + "/mcap";
    REQUIRE(run(mc) == kExitOk);
    auto summary = read_csv(mc.out + "/mcap_summary.csv");
    REQUIRE(summary.rows.size() == 1);
    auto curve = read_csv(mc.out + "/mcap_curve.csv");
    CHECK(curve.rows.size() == 1000);

    mc.focal = "zeta";
    mc.out = dir + "/mcap_bad";
    CHECK(run(mc) == kExitUsage);
    mc.focal = "r";
    mc.input = dir + "/missing.csv";
    mc.out = dir + "/mcap_io";
    CHECK(run(mc) == kExitError);
}

TEST_CASE("worker count never changes the artifacts") {
    const std::string dir = testutil::temp_dir("cli_workers");
    auto c = base_pfilter(dir + "/w1");
    c.reps = 4;
    c.workers = 1;
    REQUIRE(run(c) == kExitOk);
    auto c3 = c;
    c3.workers = 3;
    c3.out = dir + "/w3";
    REQUIRE(run(c3) == kExitOk);
    CHECK(testutil::slurp(dir + "/w1/pfilter.csv") == testutil::slurp(dir + "/w3/pfilter.csv"));
}

TEST_CASE("a config file with comments drives a run") {
    const std::string dir = testutil::temp_dir("cli_file");
    const std::string cfg =
        "# smoke experiment\n"
        "command = pfilter\n"
        "U = 1\n"
        "N = 5\n"
        "seed = 23\n"
        "J = 30\n"
        "reps = 2\n"
        "\n"
        "out = " + dir + "/out\n";
    write_text_file(dir + "/config.txt", cfg);
    auto c = parse_config_file(dir + "/config.txt");
    CHECK(c.U == 1);
    REQUIRE(run(c) == kExitOk);
    CHECK(file_exists(dir + "/out/pfilter.csv"));
}
