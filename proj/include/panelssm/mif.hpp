#ifndef PANELSSM_MIF_HPP
#define PANELSSM_MIF_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "panelssm/model.hpp"
#include "panelssm/smc.hpp"

namespace panelssm {

enum class CoolingType { geometric, hyperbolic };

struct CoolingSchedule {
    CoolingType type = CoolingType::geometric;
    double fraction_50 = 0.5;
};

// Perturbation multiplier at outer iteration m; multiplier(0) = 1 and
// multiplier(50) = fraction_50 for both schedule types.
double cooling_multiplier(const CoolingSchedule& s, std::size_t m);

// Parameter particle cloud on the natural scale.
struct Swarm {
    Matrix shared;                 // A x J
    std::vector<Matrix> specific;  // per unit, B x J

    std::size_t particle_count() const { return shared.cols(); }

    static Swarm broadcast(const ParamSet& p, std::size_t J);
};

// Additive est-scale Gaussian noise, row r scaled by sds[r] * scale; rows
// with zero sd are left bit-identical. Barycentric groups in idx are
// renormalized per particle after perturbation.
void perturb_rows(Matrix& values, std::span<const double> sds, double scale,
                  const TransformIndex& idx, RngStream& rng);

// Column mean on the estimation scale mapped back to natural scale; a row
// whose particles are bit-identical is copied through untouched.
std::vector<double> swarm_row_means(const Matrix& values, const TransformIndex& idx);

struct MifSettings {
    std::size_t M = 50;
    std::size_t J = 1000;
    RwSdSpec rw_sd;
    CoolingSchedule cooling;
    bool marginalize = false;
    std::size_t max_failures = 20;
};

// Test instrumentation; m is the 1-based iteration, u the unit index.
struct MifHooks {
    std::function<void(std::size_t m, std::size_t u, const Swarm&)> on_unit_start;
    std::function<void(std::size_t m, std::size_t u, const Swarm&)> on_unit_end;
    std::function<void(std::size_t m, double multiplier)> on_iteration_scale;
};

struct MifResult {
    ParamSet estimate;
    Swarm final_swarm;
    Matrix traces;  // (M+1) rows x trace_columns
    std::vector<std::string> trace_columns;
    std::vector<std::string> unit_names;
    std::vector<double> unit_logliks;  // perturbed-filter logliks, last iteration
    double loglik = 0.0;
    std::size_t failure_count = 0;
    MifSettings settings;
};

// Panel iterated filtering. One swarm is carried through the whole run: the
// shared block chains across units within an iteration, each unit's specific
// block is perturbed only while that unit is filtered, and resampling pulls
// other units' specific blocks along unless settings.marginalize is set.
MifResult mif2_panel(const PanelModel& p, const ParamSet& start, const MifSettings& s,
                     const RngKey& key, const MifHooks& hooks = {});

// Single-unit restriction; params must cover exactly the one unit.
MifResult mif2_unit(const UnitModel& m, const ParamSet& params, const MifSettings& s,
                    const RngKey& key, const MifHooks& hooks = {});

// Per-unit repeated searches perturbing only unit-specific parameters,
// keeping the best by final filtering loglik. Unit streams are keyed by unit
// name, so outcomes do not depend on unit order.
MifResult block_refine(const MifResult& r, const PanelModel& p, std::size_t reps,
                       const RngKey& key);

// Extracts the single-unit parameter slice used by block_refine.
ParamSet unit_param_slice(const ParamSet& p, std::size_t unit_index);

Table traces_table(const MifResult& r);

}  // namespace panelssm

#endif
