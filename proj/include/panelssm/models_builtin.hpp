#ifndef PANELSSM_MODELS_BUILTIN_HPP
#define PANELSSM_MODELS_BUILTIN_HPP

#include <functional>
#include <string>
#include <vector>

#include "panelssm/model.hpp"

namespace panelssm {

// One step of the stochastic Gompertz map,
//   X' = K^(1-e^(-r)) * X^(e^(-r)) * eps,  log eps ~ N(0, sigma^2).
double gompertz_step(double x, double K, double r, double sigma, RngStream& rng);

// Lognormal observation density log Y | X ~ N(log X, tau^2), natural scale
// (carries the 1/y Jacobian).
double gompertz_dmeasure(double y, double x, double tau, bool give_log);

// Gompertz unit with times 1..N, t0 = 0, parameters {K, r, sigma, tau, X_0}
// all log-transformed. Overrides replace the stock defaults
// K=1, r=0.1, sigma=0.1, tau=0.1, X_0=1.
UnitModel make_gompertz_unit(const std::string& name, std::size_t N,
                             const NamedValues& overrides = {});

// Panel of U Gompertz units with data simulated at construction; shared
// {r, sigma}, specific {K, tau, X_0}.
PanelModel panel_gompertz(std::size_t U, std::size_t N, const RngKey& key,
                          const NamedValues& overrides = {});

// Latent Gaussian random walk with Gaussian measurement; parameters
// {sigma, tau, X_0}, shared {sigma, tau}, specific {X_0}. Defaults
// sigma=1, tau=1, X_0=0.
UnitModel make_random_walk_unit(const std::string& name, std::size_t N,
                                const NamedValues& overrides = {});
PanelModel panel_random_walk(std::size_t U, std::size_t N, const RngKey& key,
                             const NamedValues& overrides = {});

struct KalmanResult {
    std::vector<std::string> unit_names;
    std::vector<double> unit_logliks;
    double total = 0.0;
};

// Exact log-likelihoods through the log-scale linear-Gaussian form
//   Z_{n+1} = a Z_n + c + N(0, q),  obs = Z_n + N(0, robs),
// with the lognormal Jacobian applied for the Gompertz panel.
KalmanResult gompertz_kalman_loglik(const PanelModel& p);
KalmanResult random_walk_kalman_loglik(const PanelModel& p);

// Generic scalar filter used by both oracles. obs already on the latent
// scale; gaps between consecutive times must be whole numbers of steps.
double linear_gaussian_loglik(std::span<const double> obs, std::span<const double> times,
                              double t0, double z0, double a, double c, double q, double robs);

struct PanelFactory {
    std::function<PanelModel(std::size_t U, std::size_t N, const RngKey& key,
                             const NamedValues& overrides)>
        make_panel;
    std::function<UnitModel(const std::string& name, std::size_t N)> make_unit;
    std::function<KalmanResult(const PanelModel&)> exact_loglik;  // empty when unavailable
};

// Builtin models addressable from configs: "gompertz", "random_walk".
const std::vector<std::pair<std::string, PanelFactory>>& model_registry();
const PanelFactory& find_model(const std::string& key);

}  // namespace panelssm

#endif
