#ifndef PANELSSM_PARAMS_HPP
#define PANELSSM_PARAMS_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "panelssm/csv.hpp"
#include "panelssm/matrix.hpp"
#include "panelssm/rng.hpp"

namespace panelssm {

using NamedValues = std::vector<std::pair<std::string, double>>;

// ---------------------------------------------------------------------------
// Flattened-name grammar: `base` or `base[unit]`, base matching
// [A-Za-z_][A-Za-z0-9_.]*, unit any bracket-free nonempty string.
// ---------------------------------------------------------------------------

struct ParsedName {
    std::string base;
    std::optional<std::string> unit;
};

ParsedName parse_param_name(const std::string& flat_name);
std::string format_param_name(const ParsedName& name);
std::string format_param_name(const std::string& base, const std::string& unit);
bool is_valid_base_name(const std::string& base);

// ---------------------------------------------------------------------------
// ParamSet: shared vector plus dense unit-specific matrix.
// ---------------------------------------------------------------------------

class ParamSet;

// Naming skeleton of a ParamSet, without the values.
struct ParamLayout {
    std::vector<std::string> shared_names;
    std::vector<std::string> specific_names;
    std::vector<std::string> unit_names;

    std::vector<std::string> flat_names() const;
    std::size_t flat_size() const {
        return shared_names.size() + specific_names.size() * unit_names.size();
    }
    friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

class ParamSet {
  public:
    ParamSet() = default;

    // specific is a (specific_names.size() x unit_names.size()) matrix.
    ParamSet(NamedValues shared, std::vector<std::string> specific_names,
             std::vector<std::string> unit_names, Matrix specific);

    std::size_t shared_count() const { return shared_names_.size(); }
    std::size_t specific_count() const { return specific_names_.size(); }
    std::size_t unit_count() const { return unit_names_.size(); }
    std::size_t flat_size() const { return shared_count() + specific_count() * unit_count(); }

    const std::vector<std::string>& shared_names() const { return shared_names_; }
    const std::vector<std::string>& specific_names() const { return specific_names_; }
    const std::vector<std::string>& unit_names() const { return unit_names_; }
    const Matrix& specific_matrix() const { return specific_; }

    bool has_shared(const std::string& name) const;
    bool has_specific(const std::string& name) const;
    bool has_unit(const std::string& unit) const;

    double shared(const std::string& name) const;
    double specific(const std::string& name, const std::string& unit) const;
    void set_shared(const std::string& name, double value);           // existing name only
    void set_specific(const std::string& name, const std::string& unit, double value);

    ParamLayout layout() const { return {shared_names_, specific_names_, unit_names_}; }

    // Shared entries first in stored order, then specific entries grouped by
    // unit in column order, rows in row order.
    NamedValues flatten() const;
    std::vector<std::string> flat_names() const { return layout().flat_names(); }
    std::vector<double> flat_values() const;

    // Union of shared entries and the unit's specific column, base names only.
    NamedValues unit_params(const std::string& unit) const;
    NamedValues unit_params(std::size_t unit_index) const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

  private:
    friend ParamSet reclassify_to_shared(const ParamSet&, const std::string&, double);
    friend ParamSet reclassify_to_specific(const ParamSet&, const std::string&,
                                           std::span<const double>);

    std::vector<std::string> shared_names_;
    std::vector<double> shared_values_;
    std::vector<std::string> specific_names_;
    std::vector<std::string> unit_names_;
    Matrix specific_;  // specific_names_.size() x unit_names_.size()
};

// Rebuilds a ParamSet from flattened values; names must cover the layout.
ParamSet unflatten(const NamedValues& flat, const ParamLayout& layout);
ParamSet unflatten(std::span<const double> values, const ParamLayout& layout);

// Copy with the named entries replaced: flat names hit one cell, a shared
// base name its entry, a specific base name the whole row.
ParamSet apply_values(const ParamSet& p, const NamedValues& values);

// Move a specific row (or update a shared entry) to shared.
ParamSet reclassify_to_shared(const ParamSet& p, const std::string& name, double value);
// Move a shared entry to a specific row; broadcast overload repeats the
// current shared value across all units.
ParamSet reclassify_to_specific(const ParamSet& p, const std::string& name);
ParamSet reclassify_to_specific(const ParamSet& p, const std::string& name,
                                std::span<const double> values);

// ---------------------------------------------------------------------------
// Estimation-scale transforms.
// ---------------------------------------------------------------------------

enum class TransformKind { identity, log_scale, logit, barycentric, custom };

struct Transform {
    TransformKind kind = TransformKind::identity;
    int group = -1;  // barycentric group id
    std::function<double(double)> to_est;    // custom only
    std::function<double(double)> from_est;  // custom only
};

class TransformSpec {
  public:
    void set_log(const std::string& name);
    void set_log(std::span<const std::string> names);
    void set_logit(const std::string& name);
    // Members of one group must jointly lie on the unit simplex.
    void set_barycentric(std::span<const std::string> group_members);
    void set_custom(const std::string& name, std::function<double(double)> to_est,
                    std::function<double(double)> from_est);

    // nullptr means identity.
    const Transform* find(const std::string& name) const;
    bool empty() const { return entries_.empty(); }

    // Forward map of one value; barycentric members map elementwise (log).
    double to_est_value(const std::string& name, double value) const;
    double from_est_value(const std::string& name, double value) const;

  private:
    std::vector<std::pair<std::string, Transform>> entries_;
    int next_group_ = 0;

    Transform& insert(const std::string& name);
};

// Whole-set transforms in flatten order. from_est renormalizes each
// barycentric (group, unit) cell to sum to one.
std::vector<double> to_est(const ParamSet& p, const TransformSpec& t);
ParamSet from_est(std::span<const double> est, const TransformSpec& t, const ParamLayout& layout);

// Per-entry transform plan for a fixed name list; used by the perturbation
// machinery to work on contiguous value buffers.
class TransformIndex {
  public:
    TransformIndex() = default;
    TransformIndex(std::span<const std::string> names, const TransformSpec& spec);

    std::size_t size() const { return kinds_.size(); }
    double to_est(std::size_t i, double value) const;
    double from_est(std::size_t i, double value) const;
    // Renormalizes every barycentric group within `values` to sum to one.
    void renormalize_groups(std::span<double> values) const;
    bool has_groups() const { return !groups_.empty(); }
    const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }

  private:
    std::vector<Transform> kinds_;
    std::vector<std::string> names_;
    std::vector<std::vector<std::size_t>> groups_;
};

// ---------------------------------------------------------------------------
// Random-walk intensities.
// ---------------------------------------------------------------------------

class RwSdSpec {
  public:
    // Accepts base names ("tau") or flat names ("tau[unit2]"); a base-name
    // entry recycles to all units.
    void set(const std::string& name, double value);
    // Per-time intensities; index n past the end repeats the last value.
    void set_profile(const std::string& name, std::vector<double> per_time);

    // 0 when the parameter is absent (held fixed). `unit` empty = shared.
    double intensity(const std::string& base, const std::string& unit, std::size_t n) const;
    bool touches(const std::string& base, const std::string& unit) const;
    bool empty() const { return entries_.empty(); }

    // Copy restricted to the given base names.
    RwSdSpec restricted_to(std::span<const std::string> bases) const;
    RwSdSpec without(const std::string& base) const;

    std::vector<std::string> base_names() const;
    NamedValues flat_entries() const;  // per-time entries collapse to their first value
    // Full per-entry view: (name, per-time values), one element when constant.
    std::vector<std::pair<std::string, std::vector<double>>> entries() const;

  private:
    struct Entry {
        std::string base;
        std::optional<std::string> unit;
        double value = 0.0;
        std::vector<double> per_time;
    };
    std::vector<Entry> entries_;

    const Entry* lookup(const std::string& base, const std::string& unit) const;
    Entry& insert(const std::string& name);
};

// ---------------------------------------------------------------------------
// Design matrices.
// ---------------------------------------------------------------------------

struct DesignMatrix {
    std::vector<std::string> columns;
    Matrix values;  // one row per draw

    std::size_t row_count() const { return values.rows(); }
    NamedValues row(std::size_t i) const;
};

// nseq uniform draws in [lower, upper]; names listed in specific_names expand
// to one column per unit, drawn independently per unit.
DesignMatrix runif_panel_design(const NamedValues& lower, const NamedValues& upper,
                                std::span<const std::string> specific_names,
                                std::span<const std::string> unit_names, std::size_t nseq,
                                RngStream& rng);

// Focal column cycles the grid; remaining (flat-named) columns are uniform
// draws in [lower, upper]. grid.size() * nprof rows.
DesignMatrix profile_design(const std::string& focal, std::span<const double> grid,
                            const NamedValues& lower, const NamedValues& upper, std::size_t nprof,
                            RngStream& rng);

Table design_to_table(const DesignMatrix& d);
DesignMatrix design_from_table(const Table& t);

}  // namespace panelssm

#endif
