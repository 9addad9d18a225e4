#include "panelssm/models_builtin.hpp"

#include <algorithm>
#include <cmath>

#include "panelssm/errors.hpp"
#include "panelssm/stats.hpp"

namespace panelssm {

namespace {

std::size_t step_count(double t_from, double t_to) {
    const double gap = t_to - t_from;
    const double k = std::round(gap);
    if (!(k >= 1) || std::abs(gap - k) > 1e-9)
        throw DomainError("time gap " + format_double(gap) +
                          " is not a positive whole number of steps");
    return static_cast<std::size_t>(k);
}

NamedValues apply_overrides(NamedValues defaults, const NamedValues& overrides,
                            const std::string& unit_name) {
    for (const auto& [n, v] : overrides) {
        const auto it = std::find_if(defaults.begin(), defaults.end(),
                                     [&](const auto& d) { return d.first == n; });
        if (it == defaults.end())
            throw UnknownParameterError("unit '" + unit_name + "' has no parameter '" + n + "'");
        it->second = v;
    }
    return defaults;
}

std::vector<double> regular_times(std::size_t N) {
    std::vector<double> t(N);
    for (std::size_t n = 0; n < N; ++n) t[n] = static_cast<double>(n + 1);
    return t;
}

PanelModel make_builtin_panel(std::size_t U, std::size_t N, const RngKey& key,
                              const NamedValues& overrides,
                              UnitModel (*make_unit)(const std::string&, std::size_t,
                                                     const NamedValues&),
                              std::span<const std::string> shared_names,
                              std::span<const std::string> specific_names) {
    if (U < 1 || N < 1) throw ArgumentError("panel needs U >= 1 and N >= 1");
    NamedValues base_over, flat_over;
    for (const auto& [n, v] : overrides)
        (parse_param_name(n).unit ? flat_over : base_over).emplace_back(n, v);

    std::vector<UnitModel> units;
    units.reserve(U);
    for (std::size_t u = 0; u < U; ++u)
        units.push_back(make_unit("unit" + std::to_string(u + 1), N, base_over));

    NamedValues shared;
    for (const auto& n : shared_names) shared.emplace_back(n, units[0].default_value(n));
    PanelModel p = build_panel(std::move(units), shared, specific_names);
    for (const auto& [n, v] : flat_over) {
        const ParsedName pn = parse_param_name(n);
        p.params.set_specific(pn.base, *pn.unit, v);
    }
    auto sims = simulate(p, key);
    return std::move(sims[0]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Gompertz
// ---------------------------------------------------------------------------

double gompertz_step(double x, double K, double r, double sigma, RngStream& rng) {
    if (!(x > 0)) throw DomainError("gompertz_step needs x > 0, got " + format_double(x));
    if (!(K > 0) || !(r >= 0) || !(sigma >= 0))
        throw DomainError("gompertz_step needs K > 0, r >= 0, sigma >= 0");
    const double e = std::exp(-r);
    const double log_next = (1 - e) * std::log(K) + e * std::log(x) + sigma * rng.normal();
    return std::exp(log_next);
}

double gompertz_dmeasure(double y, double x, double tau, bool give_log) {
    if (!(tau > 0))
        throw DomainError("lognormal measurement density is degenerate at tau = " +
                          format_double(tau));
    if (!(y > 0) || !(x > 0))
        throw DomainError("lognormal measurement density needs y > 0 and x > 0");
    const double ll = norm_logpdf(std::log(y), std::log(x), tau) - std::log(y);
    return give_log ? ll : std::exp(ll);
}

namespace {

constexpr std::size_t kGompK = 0, kGompR = 1, kGompSigma = 2, kGompTau = 3, kGompX0 = 4;

}  // namespace

UnitModel make_gompertz_unit(const std::string& name, std::size_t N,
                             const NamedValues& overrides) {
    UnitModel m;
    m.name = name;
    m.registry_key = "gompertz";
    m.t0 = 0.0;
    m.times = regular_times(N);
    m.obs_names = {"Y"};
    m.state_names = {"X"};
    m.param_names = {"K", "r", "sigma", "tau", "X_0"};
    m.defaults = apply_overrides(
        {{"K", 1.0}, {"r", 0.1}, {"sigma", 0.1}, {"tau", 0.1}, {"X_0", 1.0}}, overrides, name);
    m.transform.set_log(m.param_names);

    m.rinit = [](std::span<const double> p, std::span<double> state, RngStream&) {
        state[0] = p[kGompX0];
    };
    m.rprocess = [](std::span<double> state, double t_from, double t_to,
                    std::span<const double> p, RngStream& rng) {
        const std::size_t k = step_count(t_from, t_to);
        for (std::size_t i = 0; i < k; ++i)
            state[0] = gompertz_step(state[0], p[kGompK], p[kGompR], p[kGompSigma], rng);
    };
    m.rmeasure = [](std::span<const double> state, double, std::span<const double> p,
                    std::span<double> obs, RngStream& rng) {
        obs[0] = std::exp(std::log(state[0]) + p[kGompTau] * rng.normal());
    };
    m.dmeasure = [](std::span<const double> obs, std::span<const double> state, double,
                    std::span<const double> p, bool give_log) {
        return gompertz_dmeasure(obs[0], state[0], p[kGompTau], give_log);
    };
    return m;
}

PanelModel panel_gompertz(std::size_t U, std::size_t N, const RngKey& key,
                          const NamedValues& overrides) {
    static const std::vector<std::string> shared{"r", "sigma"};
    static const std::vector<std::string> specific{"K", "tau", "X_0"};
    return make_builtin_panel(U, N, key, overrides, make_gompertz_unit, shared, specific);
}

// ---------------------------------------------------------------------------
// Gaussian random walk
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kRwSigma = 0, kRwTau = 1, kRwX0 = 2;

}  // namespace

UnitModel make_random_walk_unit(const std::string& name, std::size_t N,
                                const NamedValues& overrides) {
    UnitModel m;
    m.name = name;
    m.registry_key = "random_walk";
    m.t0 = 0.0;
    m.times = regular_times(N);
    m.obs_names = {"Y"};
    m.state_names = {"Z"};
    m.param_names = {"sigma", "tau", "X_0"};
    m.defaults = apply_overrides({{"sigma", 1.0}, {"tau", 1.0}, {"X_0", 0.0}}, overrides, name);
    static const std::vector<std::string> logged{"sigma", "tau"};
    m.transform.set_log(logged);

    m.rinit = [](std::span<const double> p, std::span<double> state, RngStream&) {
        state[0] = p[kRwX0];
    };
    m.rprocess = [](std::span<double> state, double t_from, double t_to,
                    std::span<const double> p, RngStream& rng) {
        const std::size_t k = step_count(t_from, t_to);
        for (std::size_t i = 0; i < k; ++i) state[0] += p[kRwSigma] * rng.normal();
    };
    m.rmeasure = [](std::span<const double> state, double, std::span<const double> p,
                    std::span<double> obs, RngStream& rng) {
        obs[0] = state[0] + p[kRwTau] * rng.normal();
    };
    m.dmeasure = [](std::span<const double> obs, std::span<const double> state, double,
                    std::span<const double> p, bool give_log) {
        if (!(p[kRwTau] > 0))
            throw DomainError("gaussian measurement density is degenerate at tau = " +
                              format_double(p[kRwTau]));
        const double ll = norm_logpdf(obs[0], state[0], p[kRwTau]);
        return give_log ? ll : std::exp(ll);
    };
    return m;
}

PanelModel panel_random_walk(std::size_t U, std::size_t N, const RngKey& key,
                             const NamedValues& overrides) {
    static const std::vector<std::string> shared{"sigma", "tau"};
    static const std::vector<std::string> specific{"X_0"};
    return make_builtin_panel(U, N, key, overrides, make_random_walk_unit, shared, specific);
}

// ---------------------------------------------------------------------------
// Exact likelihoods
// ---------------------------------------------------------------------------

double linear_gaussian_loglik(std::span<const double> obs, std::span<const double> times,
                              double t0, double z0, double a, double c, double q, double robs) {
    if (obs.size() != times.size())
        throw ArgumentError("linear_gaussian_loglik: " + std::to_string(obs.size()) +
                            " observations for " + std::to_string(times.size()) + " times");
    double z = z0, P = 0.0, ll = 0.0, t_prev = t0;
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const std::size_t k = step_count(t_prev, times[n]);
        const double ak = std::pow(a, static_cast<double>(k));
        const double ck = a == 1.0 ? c * static_cast<double>(k) : c * (1 - ak) / (1 - a);
        const double qk =
            a == 1.0 ? q * static_cast<double>(k) : q * (1 - ak * ak) / (1 - a * a);
        z = ak * z + ck;
        P = ak * ak * P + qk;
        const double S = P + robs;
        if (!(S > 0))
            throw DomainError("degenerate one-step observation variance " + format_double(S));
        ll += norm_logpdf(obs[n], z, std::sqrt(S));
        const double gain = P / S;
        z += gain * (obs[n] - z);
        P *= 1 - gain;
        t_prev = times[n];
    }
    return ll;
}

namespace {

KalmanResult kalman_over_units(const PanelModel& p, const std::string& expected_key,
                               double (*unit_loglik)(const UnitModel&, const NamedValues&)) {
    p.validate();
    KalmanResult out;
    for (std::size_t u = 0; u < p.units.size(); ++u) {
        const UnitModel& m = p.units[u];
        if (m.registry_key != expected_key)
            throw CapabilityError("unit '" + m.name + "' is not a " + expected_key + " model");
        if (!m.has_data())
            throw CapabilityError("unit '" + m.name + "' carries no data");
        const double ll = unit_loglik(m, p.params.unit_params(u));
        out.unit_names.push_back(m.name);
        out.unit_logliks.push_back(ll);
        out.total += ll;
    }
    return out;
}

double lookup(const NamedValues& nv, const char* name) {
    for (const auto& [n, v] : nv)
        if (n == name) return v;
    throw UnknownParameterError(std::string("missing parameter '") + name + "'");
}

double gompertz_unit_kalman(const UnitModel& m, const NamedValues& params) {
    const double K = lookup(params, "K");
    const double r = lookup(params, "r");
    const double sigma = lookup(params, "sigma");
    const double tau = lookup(params, "tau");
    const double x0 = lookup(params, "X_0");
    if (!(tau > 0)) throw DomainError("Kalman evaluation needs tau > 0");
    if (!(K > 0) || !(r > 0) || !(x0 > 0))
        throw DomainError("Kalman evaluation needs K, r, X_0 > 0");
    std::vector<double> logy(m.n_obs());
    double jacobian = 0.0;
    for (std::size_t n = 0; n < m.n_obs(); ++n) {
        const double y = m.data(0, n);
        if (!(y > 0))
            throw DomainError("unit '" + m.name + "' has nonpositive observation " +
                              format_double(y));
        logy[n] = std::log(y);
        jacobian += logy[n];
    }
    const double a = std::exp(-r);
    return linear_gaussian_loglik(logy, m.times, m.t0, std::log(x0), a, (1 - a) * std::log(K),
                                  sigma * sigma, tau * tau) -
           jacobian;
}

double random_walk_unit_kalman(const UnitModel& m, const NamedValues& params) {
    const double sigma = lookup(params, "sigma");
    const double tau = lookup(params, "tau");
    const double x0 = lookup(params, "X_0");
    if (!(tau > 0)) throw DomainError("Kalman evaluation needs tau > 0");
    std::vector<double> y(m.n_obs());
    for (std::size_t n = 0; n < m.n_obs(); ++n) y[n] = m.data(0, n);
    return linear_gaussian_loglik(y, m.times, m.t0, x0, 1.0, 0.0, sigma * sigma, tau * tau);
}

}  // namespace

KalmanResult gompertz_kalman_loglik(const PanelModel& p) {
    return kalman_over_units(p, "gompertz", gompertz_unit_kalman);
}

KalmanResult random_walk_kalman_loglik(const PanelModel& p) {
    return kalman_over_units(p, "random_walk", random_walk_unit_kalman);
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

const std::vector<std::pair<std::string, PanelFactory>>& model_registry() {
    static const std::vector<std::pair<std::string, PanelFactory>> registry = [] {
        std::vector<std::pair<std::string, PanelFactory>> r;
        r.push_back({"gompertz",
                     {[](std::size_t U, std::size_t N, const RngKey& key,
                         const NamedValues& overrides) {
                          return panel_gompertz(U, N, key, overrides);
                      },
                      [](const std::string& name, std::size_t N) {
                          return make_gompertz_unit(name, N);
                      },
                      gompertz_kalman_loglik}});
        r.push_back({"random_walk",
                     {[](std::size_t U, std::size_t N, const RngKey& key,
                         const NamedValues& overrides) {
                          return panel_random_walk(U, N, key, overrides);
                      },
                      [](const std::string& name, std::size_t N) {
                          return make_random_walk_unit(name, N);
                      },
                      random_walk_kalman_loglik}});
        return r;
    }();
    return registry;
}

const PanelFactory& find_model(const std::string& key) {
    for (const auto& [k, f] : model_registry())
        if (k == key) return f;
    std::string known;
    for (const auto& [k, f] : model_registry()) known += known.empty() ? k : ", " + k;
    throw ConfigError("unknown model '" + key + "' (known: " + known + ")");
}

}  // namespace panelssm
