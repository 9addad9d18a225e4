#include "panelssm/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "panelssm/errors.hpp"
#include "panelssm/parallel.hpp"
#include "panelssm/stats.hpp"

namespace panelssm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::vector<std::size_t> multinomial_resample(std::span<const double> weights, RngStream& rng) {
    if (weights.empty()) throw ArgumentError("multinomial_resample: no weights");
    std::vector<double> cum(weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights[i];
        if (!std::isfinite(w) || w < 0)
            throw FilteringFailure("", 0, "non-finite or negative resampling weight");
        total += w;
        cum[i] = total;
    }
    if (!(total > 0)) throw FilteringFailure("", 0, "all resampling weights are zero");
    std::vector<std::size_t> idx(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) {
        const double target = rng.u01_pos() * total;
        const auto it = std::lower_bound(cum.begin(), cum.end(), target);
        idx[j] = static_cast<std::size_t>(it - cum.begin());
    }
    return idx;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, RngStream& rng) {
    if (weights.empty()) throw ArgumentError("systematic_resample: no weights");
    double total = 0.0;
    for (const double w : weights) {
        if (!std::isfinite(w) || w < 0)
            throw FilteringFailure("", 0, "non-finite or negative resampling weight");
        total += w;
    }
    if (!(total > 0)) throw FilteringFailure("", 0, "all resampling weights are zero");
    const std::size_t J = weights.size();
    std::vector<std::size_t> idx(J);
    const double step = total / static_cast<double>(J);
    double target = rng.u01() * step;
    double cum = weights[0];
    std::size_t i = 0;
    for (std::size_t j = 0; j < J; ++j) {
        while (cum < target && i + 1 < J) cum += weights[++i];
        idx[j] = i;
        target += step;
    }
    return idx;
}

double effective_sample_size(std::span<const double> weights) {
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    if (!(s2 > 0)) return 0.0;
    return s * s / s2;
}

UnitFilterResult pfilter_unit(const UnitModel& m, const NamedValues& params, std::size_t J,
                              const RngKey& key) {
    m.validate();
    m.require_slot("rinit");
    m.require_slot("rprocess");
    m.require_slot("dmeasure");
    if (!m.has_data()) throw CapabilityError("unit '" + m.name + "' carries no data");
    if (J < 1) throw ArgumentError("pfilter_unit needs J >= 1");

    const std::vector<double> pv = materialize_unit_params(m, params);
    const std::size_t S = m.state_names.size();
    const std::size_t N = m.times.size();

    Matrix states(J, S);
    {
        const RngKey init_key = key.child(0);
        for (std::size_t j = 0; j < J; ++j) {
            RngStream rng(init_key.child(1 + j));
            m.rinit(pv, states.row(j), rng);
        }
    }

    UnitFilterResult out;
    out.cond_logliks.resize(N);
    out.ess.resize(N);
    std::vector<double> logw(J), w(J), obs(m.obs_names.size());
    Matrix resampled(J, S);
    double t_prev = m.t0;

    for (std::size_t n = 0; n < N; ++n) {
        const RngKey step_key = key.child(n + 1);
        for (std::size_t k = 0; k < obs.size(); ++k) obs[k] = m.data(k, n);
        for (std::size_t j = 0; j < J; ++j) {
            RngStream rng(step_key.child(1 + j));
            m.rprocess(states.row(j), t_prev, m.times[n], pv, rng);
            const double ll = m.dmeasure(obs, states.row(j), m.times[n], pv, true);
            logw[j] = std::isnan(ll) ? kNegInf : ll;
        }
        const double shift = *std::max_element(logw.begin(), logw.end());
        if (!std::isfinite(shift))
            throw FilteringFailure(m.name, n + 1,
                                   "unit '" + m.name + "': all particle weights vanished at n = " +
                                       std::to_string(n + 1));
        double wsum = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            w[j] = std::exp(logw[j] - shift);
            wsum += w[j];
        }
        out.cond_logliks[n] = shift + std::log(wsum / static_cast<double>(J));
        out.ess[n] = effective_sample_size(w);
        out.loglik += out.cond_logliks[n];

        RngStream rng(step_key.child(0));
        const std::vector<std::size_t> idx = multinomial_resample(w, rng);
        for (std::size_t j = 0; j < J; ++j) {
            const auto src = states.row(idx[j]);
            std::copy(src.begin(), src.end(), resampled.row(j).begin());
        }
        swap(states, resampled);
        t_prev = m.times[n];
    }
    return out;
}

FilterResult pfilter_panel(const PanelModel& p, std::size_t J, const RngKey& key,
                           std::size_t workers) {
    p.validate();
    const std::size_t U = p.units.size();

    struct UnitOutcome {
        UnitFilterResult r;
        bool failed = false;
    };
    const auto outcomes = parallel_map<UnitOutcome>(U, workers, [&](std::size_t u) {
        UnitOutcome o;
        try {
            o.r = pfilter_unit(p.units[u], p.params.unit_params(u), J, key.child(u));
        } catch (const FilteringFailure&) {
            o.failed = true;
            const std::size_t N = p.units[u].n_obs();
            o.r.loglik = kNegInf;
            o.r.cond_logliks.assign(N, kNegInf);
            o.r.ess.assign(N, 1.0);
        }
        return o;
    });

    FilterResult out;
    out.params = p.params;
    out.J = J;
    for (std::size_t u = 0; u < U; ++u) {
        out.unit_names.push_back(p.units[u].name);
        out.unit_logliks.push_back(outcomes[u].r.loglik);
        out.total_loglik += outcomes[u].r.loglik;
        out.cond_logliks.push_back(outcomes[u].r.cond_logliks);
        out.ess.push_back(outcomes[u].r.ess);
        if (outcomes[u].failed) out.failed_units.push_back(p.units[u].name);
    }
    return out;
}

double logmeanexp(std::span<const double> v) {
    if (v.empty()) throw ArgumentError("logmeanexp: empty input");
    const double shift = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(shift)) return shift;
    double s = 0.0;
    for (double x : v) s += std::exp(x - shift);
    return shift + std::log(s / static_cast<double>(v.size()));
}

MeanSe logmeanexp_se(std::span<const double> v) {
    const std::size_t I = v.size();
    if (I < 2) throw ArgumentError("logmeanexp_se needs at least two values");
    MeanSe out;
    out.value = logmeanexp(v);
    std::vector<double> loo(I);
    const double shift = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(shift)) {
        out.se = 0.0;
        return out;
    }
    double s = 0.0;
    for (double x : v) s += std::exp(x - shift);
    for (std::size_t i = 0; i < I; ++i)
        loo[i] = shift + std::log((s - std::exp(v[i] - shift)) / static_cast<double>(I - 1));
    const double m = mean(loo);
    double ss = 0.0;
    for (double x : loo) ss += (x - m) * (x - m);
    out.se = std::sqrt(ss * static_cast<double>(I - 1) / static_cast<double>(I));
    return out;
}

namespace {

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> totals(m.cols(), 0.0);
    for (std::size_t u = 0; u < m.rows(); ++u)
        for (std::size_t i = 0; i < m.cols(); ++i) totals[i] += m(u, i);
    return totals;
}

void check_replicates(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0)
        throw ArgumentError("replicate matrix is empty");
}

}  // namespace

double panel_lambda1(const Matrix& unit_by_replicate) {
    check_replicates(unit_by_replicate);
    return logmeanexp(column_sums(unit_by_replicate));
}

MeanSe panel_lambda1_se(const Matrix& unit_by_replicate) {
    check_replicates(unit_by_replicate);
    return logmeanexp_se(column_sums(unit_by_replicate));
}

double panel_logmeanexp(const Matrix& unit_by_replicate) {
    check_replicates(unit_by_replicate);
    double total = 0.0;
    for (std::size_t u = 0; u < unit_by_replicate.rows(); ++u)
        total += logmeanexp(unit_by_replicate.row(u));
    return total;
}

MeanSe panel_logmeanexp_se(const Matrix& unit_by_replicate) {
    check_replicates(unit_by_replicate);
    const std::size_t U = unit_by_replicate.rows();
    const std::size_t I = unit_by_replicate.cols();
    if (I < 2) throw ArgumentError("panel_logmeanexp_se needs at least two replicates");
    MeanSe out;
    out.value = panel_logmeanexp(unit_by_replicate);

    std::vector<double> shift(U), rowsum(U);
    for (std::size_t u = 0; u < U; ++u) {
        const auto row = unit_by_replicate.row(u);
        shift[u] = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double x : row) s += std::exp(x - shift[u]);
        rowsum[u] = s;
    }
    std::vector<double> loo(I, 0.0);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t u = 0; u < U; ++u) {
            const double e = std::exp(unit_by_replicate(u, i) - shift[u]);
            loo[i] += shift[u] + std::log((rowsum[u] - e) / static_cast<double>(I - 1));
        }
    const double m = mean(loo);
    double ss = 0.0;
    for (double x : loo) ss += (x - m) * (x - m);
    out.se = std::sqrt(ss * static_cast<double>(I - 1) / static_cast<double>(I));
    return out;
}

Table filter_result_table(const FilterResult& r) {
    Table t;
    t.columns = {"unit", "time", "cond_loglik", "ess", "loglik"};
    for (std::size_t u = 0; u < r.unit_names.size(); ++u) {
        for (std::size_t n = 0; n < r.cond_logliks[u].size(); ++n)
            t.add_row({r.unit_names[u], std::to_string(n + 1),
                       format_double(r.cond_logliks[u][n]), format_double(r.ess[u][n]), ""});
        t.add_row({r.unit_names[u], "", "", "", format_double(r.unit_logliks[u])});
    }
    t.add_row({"", "", "", "", format_double(r.total_loglik)});
    return t;
}

}  // namespace panelssm
