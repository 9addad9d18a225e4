#include "panelssm/cli.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include "panelssm/csv.hpp"
#include "panelssm/errors.hpp"
#include "panelssm/models_builtin.hpp"
#include "panelssm/panel_io.hpp"
#include "panelssm/parallel.hpp"
#include "panelssm/profile_mcap.hpp"
#include "panelssm/smc.hpp"

namespace panelssm {

namespace {

constexpr const char* kVersion = "1.0.0";

const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> cmds = {"simulate", "pfilter",  "mif2", "block-refine",
                                                  "profile",  "mcap",     "kalman"};
    return cmds;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    if (v.empty() || v[0] == '-' || v[0] == '+')
        throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end != v.c_str() + v.size())
        throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    return r;
}

std::size_t parse_count(const std::string& v, const std::string& key) {
    const std::uint64_t r = parse_u64(v, key);
    if (r > std::numeric_limits<std::size_t>::max())
        throw ConfigError("config key '" + key + "': value out of range");
    return static_cast<std::size_t>(r);
}

double parse_num(const std::string& v, const std::string& key) {
    try {
        return parse_double(v);
    } catch (const Error& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

bool parse_flag(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config key '" + key + "': expected 0/1/true/false, got '" + v + "'");
}

std::pair<std::string, double> parse_named(const std::string& v, const std::string& key) {
    const auto toks = split_ws(v);
    if (toks.size() != 2)
        throw ConfigError("config key '" + key + "': expected '<name> <value>', got '" + v + "'");
    return {toks[0], parse_num(toks[1], key)};
}

std::string format_named(const std::pair<std::string, double>& nv) {
    return nv.first + " " + format_double(nv.second);
}

}  // namespace

ExperimentConfig parse_config(const std::vector<std::pair<std::string, std::string>>& entries) {
    ExperimentConfig c;
    for (const auto& [key, value] : entries) {
        if (key == "command") {
            c.command = value;
        } else if (key == "model") {
            c.model = value;
        } else if (key == "U") {
            c.U = parse_count(value, key);
        } else if (key == "N") {
            c.N = parse_count(value, key);
        } else if (key == "param") {
            c.overrides.push_back(parse_named(value, key));
        } else if (key == "data_dir") {
            c.data_dir = value;
        } else if (key == "seed") {
            c.seed = parse_u64(value, key);
        } else if (key == "data_seed") {
            c.data_seed = parse_u64(value, key);
        } else if (key == "workers") {
            c.workers = parse_count(value, key);
        } else if (key == "out") {
            c.out = value;
        } else if (key == "J") {
            c.J = parse_count(value, key);
        } else if (key == "reps") {
            c.reps = parse_count(value, key);
        } else if (key == "M") {
            c.M = parse_count(value, key);
        } else if (key == "nseq") {
            c.nseq = parse_count(value, key);
        } else if (key == "rw_sd") {
            const auto toks = split_ws(value);
            if (toks.size() < 2)
                throw ConfigError("config key 'rw_sd': expected '<name> <sd>...', got '" + value +
                                  "'");
            try {
                if (toks.size() == 2) {
                    c.rw_sd.set(toks[0], parse_num(toks[1], key));
                } else {
                    std::vector<double> per_time;
                    for (std::size_t i = 1; i < toks.size(); ++i)
                        per_time.push_back(parse_num(toks[i], key));
                    c.rw_sd.set_profile(toks[0], std::move(per_time));
                }
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw ConfigError("config key 'rw_sd': " + std::string(e.what()));
            }
        } else if (key == "cooling") {
            if (value == "geometric")
                c.cooling.type = CoolingType::geometric;
            else if (value == "hyperbolic")
                c.cooling.type = CoolingType::hyperbolic;
            else
                throw ConfigError("config key 'cooling': expected geometric or hyperbolic, got '" +
                                  value + "'");
        } else if (key == "cooling_fraction") {
            c.cooling.fraction_50 = parse_num(value, key);
        } else if (key == "marginalize") {
            c.marginalize = parse_flag(value, key);
        } else if (key == "max_failures") {
            c.max_failures = parse_count(value, key);
        } else if (key == "block_reps") {
            c.block_reps = parse_count(value, key);
        } else if (key == "lower") {
            c.lower.push_back(parse_named(value, key));
        } else if (key == "upper") {
            c.upper.push_back(parse_named(value, key));
        } else if (key == "focal") {
            c.focal = value;
        } else if (key == "grid") {
            const auto toks = split_ws(value);
            if (toks.size() != 3)
                throw ConfigError("config key 'grid': expected '<lo> <hi> <count>', got '" + value +
                                  "'");
            c.grid_lo = parse_num(toks[0], key);
            c.grid_hi = parse_num(toks[1], key);
            c.grid_count = parse_count(toks[2], key);
        } else if (key == "nprof") {
            c.nprof = parse_count(value, key);
        } else if (key == "eval_reps") {
            c.eval_reps = parse_count(value, key);
        } else if (key == "eval_J") {
            c.eval_J = parse_count(value, key);
        } else if (key == "span") {
            c.span = parse_num(value, key);
        } else if (key == "level") {
            c.level = parse_num(value, key);
        } else if (key == "input") {
            c.input = value;
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    return parse_config(parse_kv_text(read_text_file(path)));
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, std::string>> e;
    auto add = [&](const char* k, const std::string& v) { e.emplace_back(k, v); };
    add("command", c.command);
    add("model", c.model);
    if (!c.data_dir.empty()) add("data_dir", c.data_dir);
    add("U", std::to_string(c.U));
    add("N", std::to_string(c.N));
    for (const auto& nv : c.overrides) add("param", format_named(nv));
    if (c.seed) add("seed", std::to_string(*c.seed));
    if (c.seed || c.data_seed) add("data_seed", std::to_string(c.data_seed.value_or(*c.seed)));
    add("workers", std::to_string(c.workers));
    add("out", c.out);
    add("J", std::to_string(c.J));
    add("reps", std::to_string(c.reps));
    add("M", std::to_string(c.M));
    add("nseq", std::to_string(c.nseq));
    for (const auto& [name, per_time] : c.rw_sd.entries()) {
        std::string v = name;
        for (const double sd : per_time) v += " " + format_double(sd);
        add("rw_sd", v);
    }
    add("cooling", c.cooling.type == CoolingType::geometric ? "geometric" : "hyperbolic");
    add("cooling_fraction", format_double(c.cooling.fraction_50));
    add("marginalize", c.marginalize ? "1" : "0");
    add("max_failures", std::to_string(c.max_failures));
    if (c.block_reps) add("block_reps", std::to_string(*c.block_reps));
    for (const auto& nv : c.lower) add("lower", format_named(nv));
    for (const auto& nv : c.upper) add("upper", format_named(nv));
    if (!c.focal.empty()) add("focal", c.focal);
    if (c.grid_count > 0)
        add("grid", format_double(c.grid_lo) + " " + format_double(c.grid_hi) + " " +
                        std::to_string(c.grid_count));
    add("nprof", std::to_string(c.nprof));
    add("eval_reps", std::to_string(c.eval_reps));
    add("eval_J", std::to_string(c.eval_J));
    add("span", format_double(c.span));
    add("level", format_double(c.level));
    if (!c.input.empty()) add("input", c.input);
    return e;
}

void validate_config(const ExperimentConfig& c) {
    const auto& cmds = known_commands();
    if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end()) {
        std::string known;
        for (const auto& k : cmds) known += known.empty() ? k : ", " + k;
        throw ConfigError("unknown command '" + c.command + "' (known: " + known + ")");
    }
    if (c.out.empty()) throw ConfigError("output directory must not be empty");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");

    if (c.command == "mcap") {
        if (c.input.empty()) throw ConfigError("mcap needs input = <profile csv>");
        if (c.focal.empty()) throw ConfigError("mcap needs focal = <parameter>");
        if (!(c.level > 0) || !(c.level < 1)) throw ConfigError("level must lie in (0, 1)");
        if (!(c.span > 0) || !(c.span <= 1)) throw ConfigError("span must lie in (0, 1]");
        return;
    }

    if (c.data_dir.empty() && (c.U < 1 || c.N < 1))
        throw ConfigError("U and N must be >= 1 when no data_dir is given");
    const bool needs_seed = !(c.command == "kalman" && !c.data_dir.empty());
    if (needs_seed && !c.seed)
        throw ConfigError("seed is required for command '" + c.command + "'");

    auto require_bounds_paired = [&] {
        for (const auto& [n, v] : c.lower)
            if (std::find_if(c.upper.begin(), c.upper.end(),
                             [&](const auto& u) { return u.first == n; }) == c.upper.end())
                throw ConfigError("lower bound for '" + n + "' has no matching upper bound");
        for (const auto& [n, v] : c.upper)
            if (std::find_if(c.lower.begin(), c.lower.end(),
                             [&](const auto& l) { return l.first == n; }) == c.lower.end())
                throw ConfigError("upper bound for '" + n + "' has no matching lower bound");
    };

    if (c.command == "pfilter") {
        if (c.J < 1 || c.reps < 1) throw ConfigError("pfilter needs J >= 1 and reps >= 1");
    }

    const bool searches = c.command == "mif2" || c.command == "block-refine" ||
                          c.command == "profile";
    if (searches) {
        if (c.M < 1 || c.J < 1)
            throw ConfigError("command '" + c.command + "' needs M >= 1 and J >= 1");
        if (c.rw_sd.empty())
            throw ConfigError("command '" + c.command + "' needs at least one rw_sd entry");
        try {
            cooling_multiplier(c.cooling, 1);
        } catch (const Error& e) {
            throw ConfigError(std::string("cooling: ") + e.what());
        }
        require_bounds_paired();
    }
    if (c.command == "mif2" || c.command == "block-refine") {
        if (c.nseq < 1) throw ConfigError("nseq must be >= 1");
        if (c.nseq > 1 && c.lower.empty())
            throw ConfigError("nseq > 1 needs lower/upper bounds for random starts");
    }
    if (c.command == "profile") {
        if (c.focal.empty()) throw ConfigError("profile needs focal = <parameter>");
        if (c.grid_count < 1) throw ConfigError("profile needs grid = <lo> <hi> <count>");
        if (c.grid_count > 1 && !(c.grid_lo < c.grid_hi))
            throw ConfigError("profile grid needs lo < hi");
        if (c.nprof < 1 || c.eval_reps < 1 || c.eval_J < 1)
            throw ConfigError("profile needs nprof, eval_reps, eval_J all >= 1");
        const std::string focal_base = parse_param_name(c.focal).base;
        for (const auto& [n, v] : c.lower)
            if (parse_param_name(n).base == focal_base)
                throw ConfigError("focal parameter must not appear in lower/upper bounds");
    }
}

namespace {

void validate_names(const ExperimentConfig& c, const ParamLayout& layout) {
    auto contains = [](const std::vector<std::string>& v, const std::string& s) {
        return std::find(v.begin(), v.end(), s) != v.end();
    };
    auto check = [&](const std::string& name, const char* what) {
        ParsedName pn;
        try {
            pn = parse_param_name(name);
        } catch (const Error& e) {
            throw ConfigError(std::string(what) + ": " + e.what());
        }
        const bool ok = pn.unit ? contains(layout.specific_names, pn.base) &&
                                      contains(layout.unit_names, *pn.unit)
                                : contains(layout.shared_names, pn.base) ||
                                      contains(layout.specific_names, pn.base);
        if (!ok)
            throw ConfigError(std::string(what) + " names unknown parameter '" + name + "'");
    };
    for (const auto& [n, v] : c.overrides) check(n, "param");
    for (const auto& [n, v] : c.rw_sd.flat_entries()) check(n, "rw_sd");
    for (const auto& [n, v] : c.lower) check(n, "lower");
    for (const auto& [n, v] : c.upper) check(n, "upper");
    if (!c.focal.empty()) {
        const auto flat = layout.flat_names();
        if (!contains(flat, c.focal))
            throw ConfigError("focal parameter '" + c.focal + "' is not in the model layout");
    }
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (std::size_t i = 0; i < count; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return out;
}

// Base-named bounds on specific parameters expand to one flat entry per unit.
NamedValues expand_bounds(const NamedValues& bounds, const ParamLayout& layout) {
    NamedValues out;
    for (const auto& [name, value] : bounds) {
        const ParsedName pn = parse_param_name(name);
        if (!pn.unit && std::find(layout.specific_names.begin(), layout.specific_names.end(),
                                  pn.base) != layout.specific_names.end()) {
            for (const auto& unit : layout.unit_names)
                out.emplace_back(format_param_name(pn.base, unit), value);
        } else {
            out.emplace_back(name, value);
        }
    }
    return out;
}

struct RunCounters {
    std::size_t filtering_failures = 0;  // sub-threshold, run completed
    std::size_t dropped = 0;             // replicates/searches/points lost
};

void run_simulate(const ExperimentConfig& c, const PanelModel& panel) {
    save_panel(panel, c.out + "/panel");
    write_csv(c.out + "/plot.csv", plot_data(panel));
}

void run_pfilter(const ExperimentConfig& c, const PanelModel& panel, RunCounters& counters) {
    const RngKey algo = RngKey::from_seed(*c.seed);
    const auto results = parallel_map<FilterResult>(c.reps, c.workers, [&](std::size_t rep) {
        return pfilter_panel(panel, c.J, algo.child(rep));
    });

    const std::size_t U = panel.unit_count();
    Matrix unit_ll(U, c.reps);
    for (std::size_t rep = 0; rep < c.reps; ++rep) {
        counters.dropped += results[rep].failure_count();
        for (std::size_t u = 0; u < U; ++u) unit_ll(u, rep) = results[rep].unit_logliks[u];
    }

    Table t;
    t.columns = {"replicate", "unit", "loglik", "se"};
    for (std::size_t rep = 0; rep < c.reps; ++rep) {
        for (std::size_t u = 0; u < U; ++u)
            t.add_row({std::to_string(rep + 1), panel.units[u].name,
                       format_double(results[rep].unit_logliks[u]), ""});
        t.add_row({std::to_string(rep + 1), "", format_double(results[rep].total_loglik), ""});
    }
    const MeanSe l1 = panel_lambda1_se(unit_ll);
    const MeanSe l2 = panel_logmeanexp_se(unit_ll);
    t.add_row({"lambda1", "", format_double(l1.value), format_double(l1.se)});
    t.add_row({"lambda2", "", format_double(l2.value), format_double(l2.se)});
    write_csv(c.out + "/pfilter.csv", t);
}

void run_kalman(const ExperimentConfig& c, const PanelFactory& factory, const PanelModel& panel) {
    if (!factory.exact_loglik)
        throw ConfigError("model '" + c.model + "' has no exact likelihood");
    const KalmanResult r = factory.exact_loglik(panel);
    Table t;
    t.columns = {"unit", "loglik"};
    for (std::size_t u = 0; u < r.unit_names.size(); ++u)
        t.add_row({r.unit_names[u], format_double(r.unit_logliks[u])});
    t.add_row({"", format_double(r.total)});
    write_csv(c.out + "/kalman.csv", t);
}

void run_search(const ExperimentConfig& c, const PanelModel& panel, bool refine,
                RunCounters& counters) {
    const RngKey algo = RngKey::from_seed(*c.seed);
    const ParamLayout layout = panel.params.layout();
    const MifSettings settings{c.M, c.J, c.rw_sd, c.cooling, c.marginalize, c.max_failures};
    const std::size_t block_reps = c.block_reps.value_or(refine ? 1 : 0);

    DesignMatrix design;
    if (c.lower.empty()) {
        design.values = Matrix(c.nseq, 0);
    } else {
        RngStream rng(algo.child(0));
        design = runif_panel_design(c.lower, c.upper, layout.specific_names, layout.unit_names,
                                    c.nseq, rng);
    }

    struct SearchOut {
        std::optional<MifResult> r;
    };
    const auto outs =
        parallel_map<SearchOut>(design.row_count(), c.workers, [&](std::size_t i) {
            SearchOut o;
            try {
                const ParamSet start = apply_values(panel.params, design.row(i));
                MifResult r = mif2_panel(panel, start, settings, algo.child(1 + i).child(0));
                if (refine && block_reps >= 1 && panel.params.specific_count() > 0)
                    r = block_refine(r, panel, block_reps, algo.child(1 + i).child(1));
                o.r = std::move(r);
            } catch (const FilteringFailure&) {
            }
            return o;
        });

    Table est;
    est.columns = {"search"};
    for (const auto& name : layout.flat_names()) est.columns.push_back(name);
    est.columns.push_back("loglik");
    for (std::size_t i = 0; i < outs.size(); ++i) {
        if (!outs[i].r) {
            ++counters.dropped;
            continue;
        }
        const MifResult& r = *outs[i].r;
        counters.filtering_failures += r.failure_count;
        write_csv(c.out + "/traces_" + std::to_string(i + 1) + ".csv", traces_table(r));
        std::vector<std::string> row;
        row.push_back(std::to_string(i + 1));
        for (const double v : r.estimate.flat_values()) row.push_back(format_double(v));
        row.push_back(format_double(r.loglik));
        est.add_row(std::move(row));
    }
    write_csv(c.out + "/estimates.csv", est);
}

void run_profile_cmd(const ExperimentConfig& c, const PanelModel& panel, RunCounters& counters) {
    const RngKey algo = RngKey::from_seed(*c.seed);
    const ParamLayout layout = panel.params.layout();
    const std::vector<double> grid = linspace(c.grid_lo, c.grid_hi, c.grid_count);

    RngStream design_rng(algo.child(0));
    const DesignMatrix design =
        profile_design(c.focal, grid, expand_bounds(c.lower, layout),
                       expand_bounds(c.upper, layout), c.nprof, design_rng);
    write_csv(c.out + "/design.csv", design_to_table(design));

    ProfileSettings ps;
    ps.search = MifSettings{c.M, c.J, c.rw_sd, c.cooling, c.marginalize, c.max_failures};
    ps.block_reps = c.block_reps.value_or(0);
    ps.eval_reps = c.eval_reps;
    ps.eval_J = c.eval_J;
    ps.workers = c.workers;

    const ProfileResult r = run_profile(panel, c.focal, design, ps, algo.child(1));
    counters.dropped += r.dropped;
    write_csv(c.out + "/profile.csv", profile_table(r));
}

void run_mcap_cmd(const ExperimentConfig& c) {
    const Table t = read_csv(c.input);
    ProfileResult pr = [&] {
        try {
            return profile_from_table(t, c.focal);
        } catch (const UnknownParameterError& e) {
            throw ConfigError(std::string("mcap input: ") + e.what());
        }
    }();
    const McapResult m =
        mcap(pr.loglik, pr.params.col(pr.focal_column), c.level, c.span);
    write_csv(c.out + "/mcap_summary.csv", mcap_summary_table(m));
    write_csv(c.out + "/mcap_curve.csv", mcap_curve_table(m));
}

void write_manifest(const ExperimentConfig& c, const RunCounters& counters, double seconds,
                    int code) {
    std::string text;
    text += "# panelssm " + std::string(kVersion) + " (" + __VERSION__ + ")\n";
    text += "# wall_clock_s " + format_double(seconds) + "\n";
    text += "# filtering_failures " + std::to_string(counters.filtering_failures) + "\n";
    text += "# dropped " + std::to_string(counters.dropped) + "\n";
    text += "# exit " + std::to_string(code) + "\n";
    text += format_kv_text(config_entries(c));
    write_text_file(c.out + "/manifest.txt", text);
}

void report_error(const ExperimentConfig& c, const char* kind, const std::string& what) {
    std::cerr << "panelssm: " << kind << " error: " << what << "\n";
    try {
        if (!c.out.empty()) {
            std::filesystem::create_directories(c.out);
            write_text_file(c.out + "/error.txt",
                            format_kv_text({{"error", kind}, {"message", what}}));
        }
    } catch (...) {
    }
}

void execute(const ExperimentConfig& c, RunCounters& counters) {
    std::filesystem::create_directories(c.out);
    if (c.command == "mcap") {
        run_mcap_cmd(c);
        return;
    }

    const PanelFactory& factory = find_model(c.model);
    const PanelModel panel = [&]() -> PanelModel {
        if (!c.data_dir.empty()) {
            PanelModel p = load_panel(c.data_dir);
            validate_names(c, p.params.layout());
            if (!c.overrides.empty()) p.params = apply_values(p.params, c.overrides);
            return p;
        }
        const PanelModel probe = factory.make_panel(c.U, 1, RngKey::from_seed(0), {});
        validate_names(c, probe.params.layout());
        const std::uint64_t data_seed = c.data_seed.value_or(*c.seed);
        return factory.make_panel(c.U, c.N, RngKey::from_seed(data_seed), c.overrides);
    }();

    if (c.command == "simulate")
        run_simulate(c, panel);
    else if (c.command == "pfilter")
        run_pfilter(c, panel, counters);
    else if (c.command == "kalman")
        run_kalman(c, factory, panel);
    else if (c.command == "mif2")
        run_search(c, panel, false, counters);
    else if (c.command == "block-refine")
        run_search(c, panel, true, counters);
    else if (c.command == "profile")
        run_profile_cmd(c, panel, counters);
}

}  // namespace

int run(const ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        validate_config(c);
    } catch (const Error& e) {
        report_error(c, "config", e.what());
        return kExitUsage;
    }
    try {
        RunCounters counters;
        execute(c, counters);
        const double seconds = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        const int code = counters.dropped > 0 ? kExitPartial : kExitOk;
        write_manifest(c, counters, seconds, code);
        return code;
    } catch (const ConfigError& e) {
        report_error(c, "config", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        report_error(c, "runtime", e.what());
        return kExitError;
    } catch (const std::exception& e) {
        report_error(c, "runtime", e.what());
        return kExitError;
    }
}

}  // namespace panelssm
