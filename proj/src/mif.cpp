#include "panelssm/mif.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "panelssm/errors.hpp"

namespace panelssm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

void permute_columns(Matrix& m, std::span<const std::size_t> idx, Matrix& scratch) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t j = 0; j < idx.size(); ++j) scratch(r, j) = m(r, idx[j]);
    swap(m, scratch);
}

void permute_rows(Matrix& m, std::span<const std::size_t> idx, Matrix& scratch) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto src = m.row(idx[j]);
        std::copy(src.begin(), src.end(), scratch.row(j).begin());
    }
    swap(m, scratch);
}

}  // namespace

double cooling_multiplier(const CoolingSchedule& s, std::size_t m) {
    if (!(s.fraction_50 > 0) || !(s.fraction_50 <= 1))
        throw ArgumentError("cooling fraction_50 must lie in (0, 1], got " +
                            format_double(s.fraction_50));
    if (m == 0 || s.fraction_50 == 1.0) return 1.0;
    if (s.type == CoolingType::geometric)
        return std::exp(static_cast<double>(m) * std::log(s.fraction_50) / 50.0);
    const double f = s.fraction_50;
    if (!(f > 0.02))
        throw ArgumentError("hyperbolic cooling needs fraction_50 > 0.02, got " +
                            format_double(f));
    const double scale = (50.0 * f - 1.0) / (1.0 - f);
    return (scale + 1.0) / (scale + static_cast<double>(m));
}

Swarm Swarm::broadcast(const ParamSet& p, std::size_t J) {
    Swarm s;
    s.shared = Matrix(p.shared_count(), J);
    for (std::size_t a = 0; a < p.shared_count(); ++a) {
        const double v = p.shared(p.shared_names()[a]);
        for (std::size_t j = 0; j < J; ++j) s.shared(a, j) = v;
    }
    s.specific.resize(p.unit_count());
    for (std::size_t u = 0; u < p.unit_count(); ++u) {
        s.specific[u] = Matrix(p.specific_count(), J);
        for (std::size_t b = 0; b < p.specific_count(); ++b) {
            const double v = p.specific_matrix()(b, u);
            for (std::size_t j = 0; j < J; ++j) s.specific[u](b, j) = v;
        }
    }
    return s;
}

void perturb_rows(Matrix& values, std::span<const double> sds, double scale,
                  const TransformIndex& idx, RngStream& rng) {
    const std::size_t R = values.rows();
    const std::size_t J = values.cols();
    if (sds.size() != R) throw ArgumentError("perturb_rows: one sd per row required");
    std::vector<bool> touched(R, false);
    for (std::size_t r = 0; r < R; ++r) {
        const double sd = sds[r] * scale;
        if (sd == 0.0) continue;
        touched[r] = true;
        for (std::size_t j = 0; j < J; ++j) {
            const double est = idx.to_est(r, values(r, j)) + sd * rng.normal();
            values(r, j) = idx.from_est(r, est);
        }
    }
    for (const auto& g : idx.groups()) {
        if (std::none_of(g.begin(), g.end(), [&](std::size_t r) { return touched[r]; })) continue;
        for (std::size_t j = 0; j < J; ++j) {
            double sum = 0.0;
            for (std::size_t r : g) sum += values(r, j);
            for (std::size_t r : g) values(r, j) /= sum;
        }
    }
}

std::vector<double> swarm_row_means(const Matrix& values, const TransformIndex& idx) {
    const std::size_t R = values.rows();
    const std::size_t J = values.cols();
    std::vector<double> out(R);
    std::vector<bool> constant(R, true);
    for (std::size_t r = 0; r < R; ++r) {
        const double first = values(r, 0);
        for (std::size_t j = 1; j < J && constant[r]; ++j)
            if (values(r, j) != first) constant[r] = false;
        if (constant[r]) {
            out[r] = first;
            continue;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < J; ++j) s += idx.to_est(r, values(r, j));
        out[r] = idx.from_est(r, s / static_cast<double>(J));
    }
    for (const auto& g : idx.groups()) {
        if (std::all_of(g.begin(), g.end(), [&](std::size_t r) { return constant[r]; })) continue;
        double sum = 0.0;
        for (std::size_t r : g) sum += out[r];
        for (std::size_t r : g) out[r] /= sum;
    }
    return out;
}

namespace {

struct MifEngine {
    const PanelModel& p;
    const MifSettings& s;
    const MifHooks& hooks;
    ParamLayout layout;
    TransformIndex shared_idx;
    std::vector<TransformIndex> spec_idx;
    std::vector<UnitParamIndex> upi;
    Swarm swarm;
    std::size_t failures = 0;
    std::string last_failed_unit;
    std::size_t last_failed_step = 0;

    MifEngine(const PanelModel& panel, const ParamSet& start, const MifSettings& settings,
              const MifHooks& h)
        : p(panel), s(settings), hooks(h), layout(start.layout()) {
        shared_idx = TransformIndex(layout.shared_names, p.units[0].transform);
        spec_idx.reserve(p.units.size());
        upi.reserve(p.units.size());
        for (std::size_t u = 0; u < p.units.size(); ++u) {
            std::vector<std::string> flat;
            flat.reserve(layout.specific_names.size());
            for (const auto& b : layout.specific_names)
                flat.push_back(format_param_name(b, layout.unit_names[u]));
            spec_idx.emplace_back(flat, p.units[u].transform);
            upi.emplace_back(p.units[u], layout);
        }
        swarm = Swarm::broadcast(start, s.J);
    }

    ParamSet reduce() const {
        const std::vector<double> sh = swarm_row_means(swarm.shared, shared_idx);
        NamedValues shared_nv;
        for (std::size_t a = 0; a < sh.size(); ++a)
            shared_nv.emplace_back(layout.shared_names[a], sh[a]);
        Matrix spec(layout.specific_names.size(), layout.unit_names.size());
        for (std::size_t u = 0; u < layout.unit_names.size(); ++u) {
            const std::vector<double> col = swarm_row_means(swarm.specific[u], spec_idx[u]);
            for (std::size_t b = 0; b < col.size(); ++b) spec(b, u) = col[b];
        }
        return {std::move(shared_nv), layout.specific_names, layout.unit_names, std::move(spec)};
    }

    // One filtering pass of unit u at iteration m; returns the perturbed
    // filter loglik.
    double filter_unit(std::size_t m, std::size_t u, double mult, const RngKey& iter_key) {
        const UnitModel& um = p.units[u];
        const std::size_t J = s.J;
        const std::size_t A = layout.shared_names.size();
        const std::size_t B = layout.specific_names.size();
        const std::size_t S = um.state_names.size();
        const std::size_t N = um.n_obs();
        const RngKey unit_key = iter_key.child(u);

        std::vector<double> shared_sds(A), spec_sds(B);
        const auto load_sds = [&](std::size_t n) {
            for (std::size_t a = 0; a < A; ++a)
                shared_sds[a] = s.rw_sd.intensity(layout.shared_names[a], "", n);
            for (std::size_t b = 0; b < B; ++b)
                spec_sds[b] = s.rw_sd.intensity(layout.specific_names[b], um.name, n);
        };

        Matrix states(J, S), states_scratch(J, S);
        Matrix shared_scratch(A, J), spec_scratch(B, J);
        std::vector<double> pv(um.param_names.size());
        std::vector<double> shcol(A), spcol(B);
        std::vector<double> logw(J), w(J), obs(um.obs_names.size());

        const auto gather = [&](std::size_t j) {
            for (std::size_t a = 0; a < A; ++a) shcol[a] = swarm.shared(a, j);
            for (std::size_t b = 0; b < B; ++b) spcol[b] = swarm.specific[u](b, j);
            upi[u].materialize(shcol, spcol, pv);
        };

        {
            const RngKey init_key = unit_key.child(0);
            RngStream prng(init_key.child(J + 1));
            load_sds(0);
            perturb_rows(swarm.shared, shared_sds, mult, shared_idx, prng);
            perturb_rows(swarm.specific[u], spec_sds, mult, spec_idx[u], prng);
            for (std::size_t j = 0; j < J; ++j) {
                gather(j);
                RngStream rng(init_key.child(1 + j));
                um.rinit(pv, states.row(j), rng);
            }
        }

        double loglik = 0.0;
        double t_prev = um.t0;
        for (std::size_t n = 1; n <= N; ++n) {
            const RngKey step_key = unit_key.child(n);
            {
                RngStream prng(step_key.child(J + 1));
                load_sds(n);
                perturb_rows(swarm.shared, shared_sds, mult, shared_idx, prng);
                perturb_rows(swarm.specific[u], spec_sds, mult, spec_idx[u], prng);
            }
            const double t = um.times[n - 1];
            for (std::size_t k = 0; k < obs.size(); ++k) obs[k] = um.data(k, n - 1);
            for (std::size_t j = 0; j < J; ++j) {
                gather(j);
                RngStream rng(step_key.child(1 + j));
                um.rprocess(states.row(j), t_prev, t, pv, rng);
                const double ll = um.dmeasure(obs, states.row(j), t, pv, true);
                logw[j] = std::isnan(ll) ? kNegInf : ll;
            }
            const double shift = *std::max_element(logw.begin(), logw.end());
            if (!std::isfinite(shift)) {
                ++failures;
                last_failed_unit = um.name;
                last_failed_step = n;
                if (failures > s.max_failures)
                    throw FilteringFailure(
                        um.name, n,
                        "mif2: " + std::to_string(failures) +
                            " filtering failures exceed the threshold of " +
                            std::to_string(s.max_failures) + "; last at unit '" + um.name +
                            "', iteration " + std::to_string(m) + ", step " + std::to_string(n));
                loglik = kNegInf;
                std::fill(w.begin(), w.end(), 1.0);
            } else {
                double wsum = 0.0;
                for (std::size_t j = 0; j < J; ++j) {
                    w[j] = std::exp(logw[j] - shift);
                    wsum += w[j];
                }
                loglik += shift + std::log(wsum / static_cast<double>(J));
            }

            RngStream rng(step_key.child(0));
            const std::vector<std::size_t> idx = multinomial_resample(w, rng);
            permute_rows(states, idx, states_scratch);
            permute_columns(swarm.shared, idx, shared_scratch);
            permute_columns(swarm.specific[u], idx, spec_scratch);
            if (!s.marginalize)
                for (std::size_t v = 0; v < swarm.specific.size(); ++v)
                    if (v != u) permute_columns(swarm.specific[v], idx, spec_scratch);
            t_prev = t;
        }
        return loglik;
    }
};

}  // namespace

MifResult mif2_panel(const PanelModel& p, const ParamSet& start, const MifSettings& s,
                     const RngKey& key, const MifHooks& hooks) {
    p.validate();
    if (start.layout() != p.params.layout())
        throw ArgumentError("start parameters do not match the panel layout");
    if (s.M < 1 || s.J < 1) throw ArgumentError("mif2 needs M >= 1 and J >= 1");

    MifEngine eng(p, start, s, hooks);
    const std::size_t U = p.units.size();
    const std::size_t D = eng.layout.flat_size();

    MifResult out;
    out.settings = s;
    out.unit_names = eng.layout.unit_names;
    out.trace_columns = eng.layout.flat_names();
    for (const auto& un : eng.layout.unit_names) out.trace_columns.push_back("loglik[" + un + "]");
    out.trace_columns.push_back("loglik");
    out.traces = Matrix(s.M + 1, D + U + 1, kNan);
    {
        const std::vector<double> v = start.flat_values();
        for (std::size_t i = 0; i < D; ++i) out.traces(0, i) = v[i];
    }

    std::vector<double> unit_lls(U, 0.0);
    for (std::size_t m = 1; m <= s.M; ++m) {
        const double mult = cooling_multiplier(s.cooling, m);
        if (hooks.on_iteration_scale) hooks.on_iteration_scale(m, mult);
        const RngKey iter_key = key.child(m - 1);
        for (std::size_t u = 0; u < U; ++u) {
            if (hooks.on_unit_start) hooks.on_unit_start(m, u, eng.swarm);
            unit_lls[u] = eng.filter_unit(m, u, mult, iter_key);
            if (hooks.on_unit_end) hooks.on_unit_end(m, u, eng.swarm);
        }
        const ParamSet est = eng.reduce();
        const std::vector<double> v = est.flat_values();
        double total = 0.0;
        for (std::size_t i = 0; i < D; ++i) out.traces(m, i) = v[i];
        for (std::size_t u = 0; u < U; ++u) {
            out.traces(m, D + u) = unit_lls[u];
            total += unit_lls[u];
        }
        out.traces(m, D + U) = total;
    }

    out.estimate = eng.reduce();
    out.final_swarm = std::move(eng.swarm);
    out.unit_logliks = unit_lls;
    out.loglik = 0.0;
    for (double ll : unit_lls) out.loglik += ll;
    out.failure_count = eng.failures;
    return out;
}

MifResult mif2_unit(const UnitModel& m, const ParamSet& params, const MifSettings& s,
                    const RngKey& key, const MifHooks& hooks) {
    PanelModel single = build_panel(std::vector<UnitModel>{m}, params);
    return mif2_panel(single, params, s, key, hooks);
}

ParamSet unit_param_slice(const ParamSet& p, std::size_t unit_index) {
    if (unit_index >= p.unit_count())
        throw ArgumentError("unit index " + std::to_string(unit_index) + " out of range");
    NamedValues shared;
    for (const auto& n : p.shared_names()) shared.emplace_back(n, p.shared(n));
    Matrix col(p.specific_count(), 1);
    for (std::size_t b = 0; b < p.specific_count(); ++b)
        col(b, 0) = p.specific_matrix()(b, unit_index);
    return {std::move(shared), p.specific_names(), {p.unit_names()[unit_index]}, std::move(col)};
}

MifResult block_refine(const MifResult& r, const PanelModel& p, std::size_t reps,
                       const RngKey& key) {
    if (reps < 1) throw ArgumentError("block_refine needs reps >= 1");
    p.validate();
    if (p.params.specific_count() == 0) return r;

    MifSettings s = r.settings;
    s.rw_sd = r.settings.rw_sd.restricted_to(p.params.specific_names());

    MifResult out = r;
    out.loglik = 0.0;
    for (std::size_t u = 0; u < p.units.size(); ++u) {
        const std::string& uname = p.units[u].name;
        const ParamSet start = unit_param_slice(r.estimate, u);
        const RngKey unit_key = key.child(name_hash(uname));
        MifResult best;
        best.loglik = kNegInf;
        bool have = false;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            MifResult res = mif2_unit(p.units[u], start, s, unit_key.child(rep));
            if (!have || res.loglik > best.loglik) {
                best = std::move(res);
                have = true;
            }
        }
        for (const auto& b : p.params.specific_names())
            out.estimate.set_specific(b, uname, best.estimate.specific(b, uname));
        out.final_swarm.specific[u] = best.final_swarm.specific[0];
        out.unit_logliks[u] = best.loglik;
        out.loglik += best.loglik;
    }
    return out;
}

Table traces_table(const MifResult& r) {
    Table t;
    t.columns.push_back("iteration");
    for (const auto& c : r.trace_columns) t.columns.push_back(c);
    for (std::size_t m = 0; m < r.traces.rows(); ++m) {
        std::vector<std::string> row;
        row.reserve(t.columns.size());
        row.push_back(std::to_string(m));
        for (std::size_t i = 0; i < r.traces.cols(); ++i)
            row.push_back(format_double(r.traces(m, i)));
        t.add_row(std::move(row));
    }
    return t;
}

}  // namespace panelssm
