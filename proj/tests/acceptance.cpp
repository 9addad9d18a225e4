// End-to-end gate: one numbered line per criterion, nonzero exit when any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "panelssm/cli.hpp"
#include "panelssm/csv.hpp"
#include "panelssm/errors.hpp"
#include "panelssm/mif.hpp"
#include "panelssm/models_builtin.hpp"
#include "panelssm/panel_io.hpp"
#include "panelssm/profile_mcap.hpp"
#include "panelssm/smc.hpp"
#include "panelssm/stats.hpp"

using namespace panelssm;

namespace {

int g_failures = 0;

void report(int idx, bool pass, const std::string& detail) {
    std::printf("[C%d] %s %s\n", idx, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run_criterion(int idx, const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        std::tie(pass, detail) = body();
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.1fs)", secs);
    report(idx, pass, detail + buf);
}

std::string fmt(double v) { return format_double(v); }

double kalman_at(const PanelModel& p, const ParamSet& params) {
    PanelModel q = p;
    q.params = params;
    return gompertz_kalman_loglik(q).total;
}

// ---------------------------------------------------------------------------
// C1: replicated particle filtering agrees with the exact filter.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion1() {
    bool ok = true;
    std::string detail;
    for (const std::uint64_t seed : {11ull, 202ull, 3003ull}) {
        const auto p = panel_gompertz(5, 50, RngKey::from_seed(seed));
        const double exact = gompertz_kalman_loglik(p).total;

        const std::size_t reps = 10;
        Matrix unit_ll(5, reps);
        const RngKey key = RngKey::from_seed(seed).child(100);
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const auto r = pfilter_panel(p, 2000, key.child(rep));
            for (std::size_t u = 0; u < 5; ++u) unit_ll(u, rep) = r.unit_logliks[u];
        }
        const MeanSe l2 = panel_logmeanexp_se(unit_ll);
        const double gap = std::abs(l2.value - exact);
        if (!(gap <= 3.0 * l2.se)) ok = false;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) +
                  ": |gap| " + fmt(gap) + " vs 3se " + fmt(3.0 * l2.se);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// C2: the per-unit estimator is no noisier than the panel-level one.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion2() {
    const auto p = panel_gompertz(3, 30, RngKey::from_seed(77));
    const RngKey base = RngKey::from_seed(200);
    const std::size_t meta = 100, I = 5;
    std::vector<double> l1(meta), l2(meta);
    for (std::size_t k = 0; k < meta; ++k) {
        Matrix unit_ll(3, I);
        for (std::size_t r = 0; r < I; ++r) {
            const auto f = pfilter_panel(p, 500, base.child(k).child(1 + r));
            for (std::size_t u = 0; u < 3; ++u) unit_ll(u, r) = f.unit_logliks[u];
        }
        l1[k] = panel_lambda1(unit_ll);
        l2[k] = panel_logmeanexp(unit_ll);
    }
    const double sd1 = sample_sd(l1), sd2 = sample_sd(l2);
    const bool ok = sd2 <= 1.1 * sd1;
    return {ok, "sd(lambda2) " + fmt(sd2) + " vs 1.1*sd(lambda1) " + fmt(1.1 * sd1)};
}

// ---------------------------------------------------------------------------
// C3: iterated filtering lands near a derivative-free oracle maximum.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion3() {
    const auto p = panel_gompertz(5, 50, RngKey::from_seed(300));
    const auto start = apply_values(p.params, {{"r", 0.2}, {"sigma", 0.2}, {"tau", 0.2}});

    MifSettings s;
    s.M = 100;
    s.J = 1000;
    s.rw_sd.set("r", 0.02);
    s.rw_sd.set("sigma", 0.02);
    s.rw_sd.set("tau", 0.02);
    auto r = mif2_panel(p, start, s, RngKey::from_seed(301));
    r = block_refine(r, p, 3, RngKey::from_seed(302));
    const double achieved = kalman_at(p, r.estimate);

    // Oracle: Nelder-Mead on the log scale over the same free parameters.
    auto objective = [&](const std::vector<double>& v) {
        NamedValues nv = {{"r", std::exp(v[0])}, {"sigma", std::exp(v[1])}};
        const auto units = p.params.unit_names();
        for (std::size_t u = 0; u < 5; ++u)
            nv.emplace_back("tau[" + units[u] + "]", std::exp(v[2 + u]));
        return -kalman_at(p, apply_values(p.params, nv));
    };
    std::vector<double> v0(7, std::log(0.2));
    const auto nm = testutil::nelder_mead(objective, v0, 0.5, 6000, 1e-10);
    const double oracle = -nm.value;

    const bool ok = achieved >= oracle - 5.0;
    return {ok, "kalman at estimate " + fmt(achieved) + ", oracle " + fmt(oracle) + ", start " +
                    fmt(kalman_at(p, start))};
}

// ---------------------------------------------------------------------------
// C4: marginalization parity at B = 0, improvement in both modes otherwise.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion4() {
    auto shared_only = panel_gompertz(3, 15, RngKey::from_seed(400));
    shared_only.params = reclassify_to_shared(shared_only.params, "K", 1.0);
    shared_only.params = reclassify_to_shared(shared_only.params, "tau", 0.1);
    shared_only.params = reclassify_to_shared(shared_only.params, "X_0", 1.0);

    MifSettings s;
    s.M = 5;
    s.J = 100;
    s.rw_sd.set("r", 0.02);
    s.rw_sd.set("sigma", 0.02);
    s.rw_sd.set("tau", 0.02);
    const RngKey key = RngKey::from_seed(401);
    s.marginalize = false;
    const auto plain = mif2_panel(shared_only, shared_only.params, s, key);
    s.marginalize = true;
    const auto marg = mif2_panel(shared_only, shared_only.params, s, key);
    const bool parity = plain.estimate == marg.estimate &&
                        plain.unit_logliks == marg.unit_logliks &&
                        plain.final_swarm.shared == marg.final_swarm.shared;

    const auto p = panel_gompertz(3, 25, RngKey::from_seed(402));
    const auto start = apply_values(p.params, {{"r", 0.2}, {"sigma", 0.2}, {"tau", 0.2}});
    const double before = kalman_at(p, start);
    MifSettings s2;
    s2.M = 30;
    s2.J = 400;
    s2.rw_sd.set("r", 0.02);
    s2.rw_sd.set("sigma", 0.02);
    s2.rw_sd.set("tau", 0.02);
    s2.marginalize = false;
    const double plain_after = kalman_at(p, mif2_panel(p, start, s2, key).estimate);
    s2.marginalize = true;
    const double marg_after = kalman_at(p, mif2_panel(p, start, s2, key).estimate);
    const bool improves = plain_after > before && marg_after > before;

    return {parity && improves,
            std::string("B=0 parity ") + (parity ? "exact" : "BROKEN") + "; start " +
                fmt(before) + " -> plain " + fmt(plain_after) + ", marginalized " +
                fmt(marg_after)};
}

// ---------------------------------------------------------------------------
// C5: MCAP analytics on quadratic profiles.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion5() {
    constexpr double kHalfChisq95 = 1.920729410347062;
    std::vector<double> x(101), y(101);
    for (std::size_t i = 0; i < 101; ++i) {
        x[i] = 2.0 * static_cast<double>(i) / 100.0;
        y[i] = -50.0 * (x[i] - 1.0) * (x[i] - 1.0);
    }
    const auto clean = mcap(y, x, 0.95, 0.75);
    const double half = 0.5 * (clean.ci_upper - clean.ci_lower);
    const double expect_half = std::sqrt(2.0 * clean.delta * 0.01);
    bool ok = std::abs(clean.delta - kHalfChisq95) <= 1e-3 &&
              std::abs(half - expect_half) <= 0.01 * expect_half;

    RngStream rng(RngKey::from_seed(500));
    for (int trial = 0; trial < 25 && ok; ++trial) {
        std::vector<double> noisy(101);
        const double c = 0.7 + 0.6 * rng.u01(), curv = 20.0 + 50.0 * rng.u01();
        for (std::size_t i = 0; i < 101; ++i)
            noisy[i] = -curv * (x[i] - c) * (x[i] - c) + 0.4 * rng.normal();
        if (!(mcap(noisy, x, 0.95, 0.75).delta >= kHalfChisq95 - 1e-9)) ok = false;
    }

    std::vector<double> lattice(101), shifted(101);
    for (std::size_t i = 0; i < 101; ++i) {
        lattice[i] = std::nearbyint((-30.0 * (x[i] - 0.9) * (x[i] - 0.9) + 0.3 * rng.normal()) *
                                    1024.0) /
                     1024.0;
        shifted[i] = lattice[i] + 1048576.0;
    }
    const auto a = mcap(lattice, x, 0.95, 0.75);
    const auto b = mcap(shifted, x, 0.95, 0.75);
    const bool shift_exact = a.delta == b.delta && a.ci_lower == b.ci_lower &&
                             a.ci_upper == b.ci_upper && a.mle == b.mle;

    return {ok && shift_exact, "delta " + fmt(clean.delta) + ", half-width " + fmt(half) +
                                   " vs " + fmt(expect_half) + ", shift invariance " +
                                   (shift_exact ? "exact" : "BROKEN")};
}

// ---------------------------------------------------------------------------
// C6: MCAP coverage of the true growth rate across simulated panels.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion6() {
    const RngKey base = RngKey::from_seed(600);
    const double truth = 0.1;
    std::vector<double> grid(15);
    for (std::size_t g = 0; g < 15; ++g)
        grid[g] = 0.04 + (0.25 - 0.04) * static_cast<double>(g) / 14.0;

    int covered = 0, usable = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        const auto p = panel_gompertz(3, 40, base.child(i).child(0));
        RngStream design_rng(base.child(i).child(2));
        const auto design =
            profile_design("r", grid, {{"sigma", 0.07}, {"tau", 0.07}},
                           {{"sigma", 0.15}, {"tau", 0.15}}, 3, design_rng);
        ProfileSettings ps;
        ps.search.M = 20;
        ps.search.J = 130;
        ps.search.rw_sd.set("sigma", 0.02);
        ps.search.rw_sd.set("tau", 0.02);
        ps.eval_reps = 3;
        ps.eval_J = 350;
        try {
            const auto pr = run_profile(p, "r", design, ps, base.child(i).child(1));
            if (pr.loglik.size() < 5) continue;
            const auto m =
                mcap(pr.loglik, pr.params.col(pr.focal_column), 0.95, 0.75);
            ++usable;
            if (m.ci_lower <= truth && truth <= m.ci_upper) ++covered;
        } catch (const Error&) {
        }
    }
    const bool ok = usable == 50 && covered >= 42;
    return {ok, std::to_string(covered) + "/50 intervals cover r = 0.1 (usable " +
                    std::to_string(usable) + ")"};
}

// ---------------------------------------------------------------------------
// C7: frozen unit-exact values.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion7() {
    bool ok = true;
    std::string bad;
    auto expect = [&](bool cond, const char* label) {
        if (!cond) {
            ok = false;
            bad += std::string(bad.empty() ? "" : ", ") + label;
        }
    };

    const std::vector<double> constant = {1.7, 1.7, 1.7};
    expect(logmeanexp(constant) == 1.7, "logmeanexp constant");
    const std::vector<double> pair_vals = {0.0, std::log(3.0)};
    expect(std::abs(logmeanexp(pair_vals) - std::log(2.0)) <= 1e-12, "logmeanexp pair");
    const std::vector<double> shifted_vals = {1000.0, 1000.0 + std::log(3.0)};
    expect(std::abs(logmeanexp(shifted_vals) - (1000.0 + std::log(2.0))) <= 1e-12,
           "logmeanexp shifted");

    Matrix ll(2, 2);
    ll(0, 0) = 0.0;
    ll(0, 1) = std::log(3.0);
    ll(1, 0) = 0.0;
    ll(1, 1) = std::log(3.0);
    expect(std::abs(panel_logmeanexp(ll) - 2.0 * std::log(2.0)) <= 1e-12, "panel lambda2");
    expect(std::abs(panel_lambda1(ll) - std::log(5.0)) <= 1e-12, "panel lambda1");

    const CoolingSchedule geo{CoolingType::geometric, 0.5};
    expect(cooling_multiplier(geo, 0) == 1.0, "cooling m=0");
    expect(std::abs(cooling_multiplier(geo, 50) - 0.5) <= 1e-12, "cooling m=50");
    expect(std::abs(cooling_multiplier(geo, 1) - 0.986233) <= 1e-6, "cooling m=1");

    const ParsedName pn = parse_param_name("tau[unit2]");
    expect(pn.base == "tau" && pn.unit && *pn.unit == "unit2", "parse_param_name");
    expect(format_param_name("tau", "unit2") == "tau[unit2]", "format_param_name");

    TransformSpec spec;
    spec.set_log("tau");
    expect(std::abs(spec.to_est_value("tau", 0.15) - std::log(0.15)) <= 1e-12, "log transform");
    expect(std::abs(spec.from_est_value("tau", spec.to_est_value("tau", 0.15)) - 0.15) <= 1e-12,
           "log round-trip");
    TransformSpec lg;
    lg.set_logit("p");
    expect(lg.to_est_value("p", 0.5) == 0.0, "logit midpoint");

    RngStream zero_noise(RngKey::from_seed(1));
    const double step = gompertz_step(1.0, 1.5, 0.1, 0.0, zero_noise);
    const double expected_step = std::exp((1.0 - std::exp(-0.1)) * std::log(1.5));
    expect(std::abs(step - 1.03934) <= 1e-4, "gompertz_step frozen");
    expect(std::abs(step - expected_step) <= 1e-12, "gompertz_step formula");

    const double dm = gompertz_dmeasure(1.0, 1.0, 0.1, true);
    expect(std::abs(dm - 1.38364) <= 1e-4, "dmeasure frozen");
    expect(std::abs(dm - (-std::log(0.1) - kLogSqrt2Pi)) <= 1e-12, "dmeasure formula");

    return {ok, ok ? "all frozen values hold" : "failed: " + bad};
}

// ---------------------------------------------------------------------------
// C8: worker-count invariance for every command.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion8() {
    const std::string root = testutil::temp_dir("acceptance_c8");
    std::string mismatches;

    auto compare_dirs = [&](const std::string& a, const std::string& b, const char* label) {
        namespace fs = std::filesystem;
        std::map<std::string, std::string> files_a;
        for (const auto& entry : fs::recursive_directory_iterator(a)) {
            if (!entry.is_regular_file()) continue;
            const std::string rel = fs::relative(entry.path(), a).string();
            if (rel == "manifest.txt") continue;
            files_a[rel] = testutil::slurp(entry.path().string());
        }
        std::size_t seen = 0;
        for (const auto& entry : fs::recursive_directory_iterator(b)) {
            if (!entry.is_regular_file()) continue;
            const std::string rel = fs::relative(entry.path(), b).string();
            if (rel == "manifest.txt") continue;
            ++seen;
            const auto it = files_a.find(rel);
            if (it == files_a.end() || it->second != testutil::slurp(entry.path().string())) {
                mismatches += std::string(" ") + label + ":" + rel;
            }
        }
        if (seen != files_a.size()) mismatches += std::string(" ") + label + ":file-set";
        if (files_a.empty()) mismatches += std::string(" ") + label + ":empty";
    };

    auto run_pair = [&](ExperimentConfig c, const char* label) {
        c.workers = 1;
        c.out = root + "/" + label + "_w1";
        const int code1 = run(c);
        c.workers = 8;
        c.out = root + "/" + label + "_w8";
        const int code8 = run(c);
        if (code1 != kExitOk || code8 != kExitOk) {
            mismatches += std::string(" ") + label + ":exit" + std::to_string(code1) + "/" +
                          std::to_string(code8);
            return;
        }
        compare_dirs(root + "/" + label + "_w1", root + "/" + label + "_w8", label);
    };

    ExperimentConfig sim;
    sim.command = "simulate";
    sim.U = 2;
    sim.N = 10;
    sim.seed = 81;
    run_pair(sim, "simulate");

    ExperimentConfig pf;
    pf.command = "pfilter";
    pf.U = 2;
    pf.N = 10;
    pf.seed = 82;
    pf.J = 80;
    pf.reps = 4;
    run_pair(pf, "pfilter");

    ExperimentConfig ka;
    ka.command = "kalman";
    ka.U = 2;
    ka.N = 10;
    ka.seed = 83;
    run_pair(ka, "kalman");

    ExperimentConfig mif;
    mif.command = "mif2";
    mif.U = 2;
    mif.N = 10;
    mif.seed = 84;
    mif.M = 4;
    mif.J = 60;
    mif.rw_sd.set("r", 0.02);
    mif.rw_sd.set("tau", 0.02);
    mif.nseq = 2;
    mif.lower = {{"r", 0.05}, {"sigma", 0.07}, {"K", 0.8}, {"tau", 0.07}, {"X_0", 0.8}};
    mif.upper = {{"r", 0.3}, {"sigma", 0.15}, {"K", 1.2}, {"tau", 0.15}, {"X_0", 1.2}};
    run_pair(mif, "mif2");

    ExperimentConfig br = mif;
    br.command = "block-refine";
    br.seed = 85;
    run_pair(br, "block-refine");

    ExperimentConfig prof;
    prof.command = "profile";
    prof.U = 2;
    prof.N = 10;
    prof.seed = 86;
    prof.M = 2;
    prof.J = 40;
    prof.rw_sd.set("sigma", 0.02);
    prof.rw_sd.set("tau", 0.02);
    prof.focal = "r";
    prof.grid_lo = 0.05;
    prof.grid_hi = 0.25;
    prof.grid_count = 5;
    prof.nprof = 2;
    prof.eval_reps = 2;
    prof.eval_J = 60;
    run_pair(prof, "profile");

    ExperimentConfig mc;
    mc.command = "mcap";
    mc.input = root + "/profile_w1/profile.csv";
    mc.focal = "r";
    run_pair(mc, "mcap");

    const bool ok = mismatches.empty();
    return {ok, ok ? "all commands byte-identical across workers 1 and 8"
                   : "mismatches:" + mismatches};
}

}  // namespace

int main() {
    run_criterion(1, criterion1);
    run_criterion(2, criterion2);
    run_criterion(3, criterion3);
    run_criterion(4, criterion4);
    run_criterion(5, criterion5);
    run_criterion(6, criterion6);
    run_criterion(7, criterion7);
    run_criterion(8, criterion8);
    if (g_failures > 0) std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
