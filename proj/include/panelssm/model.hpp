#ifndef PANELSSM_MODEL_HPP
#define PANELSSM_MODEL_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "panelssm/matrix.hpp"
#include "panelssm/params.hpp"
#include "panelssm/rng.hpp"

namespace panelssm {

// Unit function slots. `params` is ordered by the unit's param_names.
using RinitFn = std::function<void(std::span<const double> params, std::span<double> state,
                                   RngStream& rng)>;
using RprocessFn = std::function<void(std::span<double> state, double t_from, double t_to,
                                      std::span<const double> params, RngStream& rng)>;
using RmeasureFn = std::function<void(std::span<const double> state, double t,
                                      std::span<const double> params, std::span<double> obs,
                                      RngStream& rng)>;
using DmeasureFn = std::function<double(std::span<const double> obs, std::span<const double> state,
                                        double t, std::span<const double> params, bool give_log)>;
using DprocessFn = std::function<double(std::span<const double> state_from,
                                        std::span<const double> state_to, double t_from,
                                        double t_to, std::span<const double> params,
                                        bool give_log)>;
using DinitFn = std::function<double(std::span<const double> state,
                                     std::span<const double> params, bool give_log)>;

struct UnitModel {
    std::string name;
    std::string registry_key;  // empty for ad hoc models
    double t0 = 0.0;
    std::vector<double> times;
    std::vector<std::string> obs_names;
    std::vector<std::string> state_names;
    std::vector<std::string> param_names;
    NamedValues defaults;  // one value per param_name, used for panel assembly
    Matrix data;           // obs_names.size() x times.size(); empty before simulation
    Matrix latent;         // state_names.size() x (times.size()+1) when retained
    TransformSpec transform;

    RinitFn rinit;
    RprocessFn rprocess;
    RmeasureFn rmeasure;
    DmeasureFn dmeasure;
    DprocessFn dprocess;
    DinitFn dinit;

    std::size_t n_obs() const { return times.size(); }
    bool has_data() const { return !data.empty(); }
    double default_value(const std::string& param) const;

    // Checks time ordering, t0, data shape, and name uniqueness.
    void validate() const;
    // Throws CapabilityError naming the unit and the missing slot.
    void require_slot(const char* slot) const;
};

struct PanelModel {
    std::vector<UnitModel> units;
    ParamSet params;

    std::size_t unit_count() const { return units.size(); }
    std::size_t unit_index(const std::string& name) const;
    const UnitModel& unit(const std::string& name) const;
    void validate() const;
};

// Assembles a panel. The name-list variant pulls specific values from each
// unit's stored defaults; shared values override any per-unit duplicates.
PanelModel build_panel(std::vector<UnitModel> units, const NamedValues& shared,
                       std::span<const std::string> specific_names);
PanelModel build_panel(std::vector<UnitModel> units, ParamSet params);

// Union of shared entries and unit u's specific column, base names only.
NamedValues get_unit_params(const PanelModel& p, const std::string& unit_name);

// Maps a unit's param_names onto a ParamSet layout, so per-particle parameter
// vectors can be materialized without name lookups in inner loops.
class UnitParamIndex {
  public:
    UnitParamIndex() = default;
    UnitParamIndex(const UnitModel& m, const ParamLayout& layout);

    std::size_t size() const { return slots_.size(); }

    // shared_vals has layout.shared_names order; specific_vals is unit u's
    // column in layout.specific_names order.
    void materialize(std::span<const double> shared_vals, std::span<const double> specific_vals,
                     std::span<double> out) const;
    std::vector<double> materialize(const ParamSet& p, std::size_t unit_index) const;

  private:
    struct Slot {
        bool is_shared = true;
        std::size_t idx = 0;
    };
    std::vector<Slot> slots_;
};

// Orders a bare name→value map by the unit's param_names.
std::vector<double> materialize_unit_params(const UnitModel& m, const NamedValues& values);

struct SimulateOptions {
    std::size_t nsim = 1;
    bool retain_latent = false;
};

// Draws full panels from the generative model. Simulation s, unit u consumes
// the stream key.child(s).child(u), so any sub-panel simulated under the same
// per-unit keys reproduces the corresponding slice exactly.
std::vector<PanelModel> simulate(const PanelModel& p, const RngKey& key,
                                 const SimulateOptions& opts = {});

// One unit under its dedicated key; the building block of simulate.
UnitModel simulate_unit(const UnitModel& m, const NamedValues& unit_params, const RngKey& unit_key,
                        bool retain_latent = false);

struct UnitWithParams {
    UnitModel unit;
    NamedValues params;
};

// Decomposes the panel into standalone units with materialized (phi, psi_u).
std::vector<UnitWithParams> as_unit_list(const PanelModel& p);

// Tidy observation table: columns unit, time, name, value.
Table plot_data(const PanelModel& p);

}  // namespace panelssm

#endif
