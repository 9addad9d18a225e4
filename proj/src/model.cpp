#include "panelssm/model.hpp"

#include <algorithm>
#include <set>

#include "panelssm/errors.hpp"

namespace panelssm {

double UnitModel::default_value(const std::string& param) const {
    for (const auto& [n, v] : defaults)
        if (n == param) return v;
    throw UnknownParameterError("unit '" + name + "' has no default for '" + param + "'");
}

void UnitModel::validate() const {
    if (name.empty()) throw ConstructionError("unit has no name");
    if (times.empty()) throw ConstructionError("unit '" + name + "' has no observation times");
    for (std::size_t n = 1; n < times.size(); ++n)
        if (!(times[n] > times[n - 1]))
            throw ConstructionError("unit '" + name + "' times must be strictly increasing");
    if (!(t0 <= times.front()))
        throw ConstructionError("unit '" + name + "' has t0 > first observation time");
    if (obs_names.empty()) throw ConstructionError("unit '" + name + "' has no observables");
    if (state_names.empty()) throw ConstructionError("unit '" + name + "' has no state variables");
    if (has_data() && (data.rows() != obs_names.size() || data.cols() != times.size()))
        throw ConstructionError("unit '" + name + "' data must be " +
                                std::to_string(obs_names.size()) + "x" +
                                std::to_string(times.size()) + ", got " +
                                std::to_string(data.rows()) + "x" + std::to_string(data.cols()));
    std::set<std::string> seen(param_names.begin(), param_names.end());
    if (seen.size() != param_names.size())
        throw ConstructionError("unit '" + name + "' has duplicate parameter names");
}

void UnitModel::require_slot(const char* slot) const {
    const std::string s(slot);
    const bool present = (s == "rinit" && rinit) || (s == "rprocess" && rprocess) ||
                         (s == "rmeasure" && rmeasure) || (s == "dmeasure" && dmeasure) ||
                         (s == "dprocess" && dprocess) || (s == "dinit" && dinit);
    if (!present)
        throw CapabilityError("unit '" + name + "' does not define " + s);
}

std::size_t PanelModel::unit_index(const std::string& name) const {
    for (std::size_t u = 0; u < units.size(); ++u)
        if (units[u].name == name) return u;
    throw UnknownParameterError("no unit '" + name + "' in panel");
}

const UnitModel& PanelModel::unit(const std::string& name) const { return units[unit_index(name)]; }

void PanelModel::validate() const {
    if (units.empty()) throw ConstructionError("panel has no units");
    std::set<std::string> names;
    for (const auto& m : units) {
        m.validate();
        if (!names.insert(m.name).second)
            throw ConstructionError("duplicate unit name '" + m.name + "'");
    }
    if (params.unit_count() != units.size())
        throw ConstructionError("parameter set covers " + std::to_string(params.unit_count()) +
                                " units, panel has " + std::to_string(units.size()));
    for (std::size_t u = 0; u < units.size(); ++u)
        if (params.unit_names()[u] != units[u].name)
            throw ConstructionError("parameter unit order does not match panel unit order at '" +
                                    units[u].name + "'");
    for (const auto& m : units)
        for (const auto& p : m.param_names)
            if (!params.has_shared(p) && !params.has_specific(p))
                throw ConstructionError("unit '" + m.name + "' needs parameter '" + p +
                                        "' which the panel does not carry");
}

PanelModel build_panel(std::vector<UnitModel> units, ParamSet params) {
    PanelModel p{std::move(units), std::move(params)};
    p.validate();
    return p;
}

PanelModel build_panel(std::vector<UnitModel> units, const NamedValues& shared,
                       std::span<const std::string> specific_names) {
    for (const auto& [n, v] : shared)
        if (std::find(specific_names.begin(), specific_names.end(), n) != specific_names.end())
            throw ConstructionError("parameter '" + n + "' listed as both shared and specific");
    std::vector<std::string> unit_names;
    unit_names.reserve(units.size());
    for (const auto& m : units) unit_names.push_back(m.name);
    Matrix specific(specific_names.size(), units.size());
    for (std::size_t b = 0; b < specific_names.size(); ++b)
        for (std::size_t u = 0; u < units.size(); ++u) {
            try {
                specific(b, u) = units[u].default_value(specific_names[b]);
            } catch (const UnknownParameterError& e) {
                throw ConstructionError(e.what());
            }
        }
    ParamSet params(shared, {specific_names.begin(), specific_names.end()},
                    std::move(unit_names), std::move(specific));
    return build_panel(std::move(units), std::move(params));
}

NamedValues get_unit_params(const PanelModel& p, const std::string& unit_name) {
    return p.params.unit_params(p.unit_index(unit_name));
}

UnitParamIndex::UnitParamIndex(const UnitModel& m, const ParamLayout& layout) {
    slots_.reserve(m.param_names.size());
    for (const auto& n : m.param_names) {
        const auto shared_it = std::find(layout.shared_names.begin(), layout.shared_names.end(), n);
        if (shared_it != layout.shared_names.end()) {
            slots_.push_back({true, static_cast<std::size_t>(shared_it - layout.shared_names.begin())});
            continue;
        }
        const auto spec_it = std::find(layout.specific_names.begin(), layout.specific_names.end(), n);
        if (spec_it == layout.specific_names.end())
            throw UnknownParameterError("unit '" + m.name + "' needs parameter '" + n +
                                        "' which the layout does not carry");
        slots_.push_back({false, static_cast<std::size_t>(spec_it - layout.specific_names.begin())});
    }
}

void UnitParamIndex::materialize(std::span<const double> shared_vals,
                                 std::span<const double> specific_vals,
                                 std::span<double> out) const {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const Slot& s = slots_[i];
        out[i] = s.is_shared ? shared_vals[s.idx] : specific_vals[s.idx];
    }
}

std::vector<double> UnitParamIndex::materialize(const ParamSet& p, std::size_t unit_index) const {
    std::vector<double> out(slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const Slot& s = slots_[i];
        out[i] = s.is_shared ? p.shared(p.shared_names()[s.idx])
                             : p.specific_matrix()(s.idx, unit_index);
    }
    return out;
}

std::vector<double> materialize_unit_params(const UnitModel& m, const NamedValues& values) {
    std::vector<double> out;
    out.reserve(m.param_names.size());
    for (const auto& n : m.param_names) {
        bool found = false;
        for (const auto& [vn, v] : values) {
            if (vn == n) {
                out.push_back(v);
                found = true;
                break;
            }
        }
        if (!found)
            throw UnknownParameterError("unit '" + m.name + "' needs parameter '" + n + "'");
    }
    return out;
}

UnitModel simulate_unit(const UnitModel& m, const NamedValues& unit_params, const RngKey& unit_key,
                        bool retain_latent) {
    m.validate();
    m.require_slot("rinit");
    m.require_slot("rprocess");
    m.require_slot("rmeasure");
    const std::vector<double> pv = materialize_unit_params(m, unit_params);
    RngStream rng(unit_key);

    UnitModel out = m;
    out.data = Matrix(m.obs_names.size(), m.times.size());
    if (retain_latent) out.latent = Matrix(m.state_names.size(), m.times.size() + 1);

    std::vector<double> state(m.state_names.size());
    std::vector<double> obs(m.obs_names.size());
    m.rinit(pv, state, rng);
    if (retain_latent)
        for (std::size_t s = 0; s < state.size(); ++s) out.latent(s, 0) = state[s];
    double t_prev = m.t0;
    for (std::size_t n = 0; n < m.times.size(); ++n) {
        m.rprocess(state, t_prev, m.times[n], pv, rng);
        m.rmeasure(state, m.times[n], pv, obs, rng);
        for (std::size_t k = 0; k < obs.size(); ++k) out.data(k, n) = obs[k];
        if (retain_latent)
            for (std::size_t s = 0; s < state.size(); ++s) out.latent(s, n + 1) = state[s];
        t_prev = m.times[n];
    }
    return out;
}

std::vector<PanelModel> simulate(const PanelModel& p, const RngKey& key,
                                 const SimulateOptions& opts) {
    p.validate();
    std::vector<PanelModel> out;
    out.reserve(opts.nsim);
    for (std::size_t s = 0; s < opts.nsim; ++s) {
        const RngKey sim_key = key.child(s);
        PanelModel sim = p;
        for (std::size_t u = 0; u < p.units.size(); ++u)
            sim.units[u] = simulate_unit(p.units[u], p.params.unit_params(u), sim_key.child(u),
                                         opts.retain_latent);
        out.push_back(std::move(sim));
    }
    return out;
}

std::vector<UnitWithParams> as_unit_list(const PanelModel& p) {
    std::vector<UnitWithParams> out;
    out.reserve(p.units.size());
    for (std::size_t u = 0; u < p.units.size(); ++u)
        out.push_back({p.units[u], p.params.unit_params(u)});
    return out;
}

Table plot_data(const PanelModel& p) {
    Table t;
    t.columns = {"unit", "time", "name", "value"};
    for (const auto& m : p.units) {
        if (!m.has_data()) continue;
        for (std::size_t n = 0; n < m.times.size(); ++n)
            for (std::size_t k = 0; k < m.obs_names.size(); ++k)
                t.add_row({m.name, format_double(m.times[n]), m.obs_names[k],
                           format_double(m.data(k, n))});
    }
    return t;
}

}  // namespace panelssm
