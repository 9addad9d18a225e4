#include "panelssm/params.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "panelssm/errors.hpp"

namespace panelssm {

namespace {

bool is_base_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }

bool is_base_char(char c) { return is_base_start(c) || (c >= '0' && c <= '9') || c == '.'; }

void check_unit_name(const std::string& unit) {
    if (unit.empty()) throw NameFormatError("empty unit name");
    if (unit.find('[') != std::string::npos || unit.find(']') != std::string::npos)
        throw NameFormatError("unit name '" + unit + "' contains a bracket");
}

double lookup_named(const NamedValues& nv, const std::string& name, const char* what) {
    for (const auto& [n, v] : nv)
        if (n == name) return v;
    throw UnknownParameterError(std::string(what) + " has no entry for '" + name + "'");
}

}  // namespace

bool is_valid_base_name(const std::string& base) {
    if (base.empty() || !is_base_start(base[0])) return false;
    return std::all_of(base.begin() + 1, base.end(), is_base_char);
}

ParsedName parse_param_name(const std::string& flat_name) {
    if (flat_name.empty()) throw NameFormatError("empty parameter name");
    const auto open = flat_name.find('[');
    const std::string base = flat_name.substr(0, open == std::string::npos ? flat_name.size() : open);
    if (!is_valid_base_name(base))
        throw NameFormatError("invalid parameter name '" + flat_name + "'");
    if (open == std::string::npos) {
        if (flat_name.find(']') != std::string::npos)
            throw NameFormatError("unbalanced bracket in '" + flat_name + "'");
        return {base, std::nullopt};
    }
    if (flat_name.back() != ']')
        throw NameFormatError("unbalanced bracket in '" + flat_name + "'");
    const std::string unit = flat_name.substr(open + 1, flat_name.size() - open - 2);
    if (unit.empty()) throw NameFormatError("empty unit in '" + flat_name + "'");
    if (unit.find('[') != std::string::npos || unit.find(']') != std::string::npos)
        throw NameFormatError("nested bracket in '" + flat_name + "'");
    return {base, unit};
}

std::string format_param_name(const std::string& base, const std::string& unit) {
    if (!is_valid_base_name(base))
        throw NameFormatError("invalid parameter name '" + base + "'");
    check_unit_name(unit);
    return base + "[" + unit + "]";
}

std::string format_param_name(const ParsedName& name) {
    if (!name.unit) {
        if (!is_valid_base_name(name.base))
            throw NameFormatError("invalid parameter name '" + name.base + "'");
        return name.base;
    }
    return format_param_name(name.base, *name.unit);
}

// ---------------------------------------------------------------------------
// ParamSet
// ---------------------------------------------------------------------------

std::vector<std::string> ParamLayout::flat_names() const {
    std::vector<std::string> out;
    out.reserve(flat_size());
    for (const auto& n : shared_names) out.push_back(n);
    for (const auto& u : unit_names)
        for (const auto& n : specific_names) out.push_back(format_param_name(n, u));
    return out;
}

ParamSet::ParamSet(NamedValues shared, std::vector<std::string> specific_names,
                   std::vector<std::string> unit_names, Matrix specific)
    : specific_names_(std::move(specific_names)),
      unit_names_(std::move(unit_names)),
      specific_(std::move(specific)) {
    shared_names_.reserve(shared.size());
    shared_values_.reserve(shared.size());
    for (auto& [n, v] : shared) {
        shared_names_.push_back(std::move(n));
        shared_values_.push_back(v);
    }
    std::set<std::string> seen;
    for (const auto& n : shared_names_) {
        if (!is_valid_base_name(n))
            throw ConstructionError("invalid shared parameter name '" + n + "'");
        if (!seen.insert(n).second)
            throw ConstructionError("duplicate parameter name '" + n + "'");
    }
    for (const auto& n : specific_names_) {
        if (!is_valid_base_name(n))
            throw ConstructionError("invalid specific parameter name '" + n + "'");
        if (!seen.insert(n).second)
            throw ConstructionError("duplicate parameter name '" + n + "'");
    }
    std::set<std::string> units;
    for (const auto& u : unit_names_) {
        check_unit_name(u);
        if (!units.insert(u).second)
            throw ConstructionError("duplicate unit name '" + u + "'");
    }
    if (specific_.rows() != specific_names_.size() || specific_.cols() != unit_names_.size())
        throw ConstructionError("specific matrix must be " + std::to_string(specific_names_.size()) +
                                "x" + std::to_string(unit_names_.size()) + ", got " +
                                std::to_string(specific_.rows()) + "x" +
                                std::to_string(specific_.cols()));
}

namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

}  // namespace

bool ParamSet::has_shared(const std::string& name) const {
    return index_of(shared_names_, name) < shared_names_.size();
}

bool ParamSet::has_specific(const std::string& name) const {
    return index_of(specific_names_, name) < specific_names_.size();
}

bool ParamSet::has_unit(const std::string& unit) const {
    return index_of(unit_names_, unit) < unit_names_.size();
}

double ParamSet::shared(const std::string& name) const {
    const auto i = index_of(shared_names_, name);
    if (i == shared_names_.size())
        throw UnknownParameterError("no shared parameter '" + name + "'");
    return shared_values_[i];
}

double ParamSet::specific(const std::string& name, const std::string& unit) const {
    const auto i = index_of(specific_names_, name);
    if (i == specific_names_.size())
        throw UnknownParameterError("no specific parameter '" + name + "'");
    const auto u = index_of(unit_names_, unit);
    if (u == unit_names_.size()) throw UnknownParameterError("no unit '" + unit + "'");
    return specific_(i, u);
}

void ParamSet::set_shared(const std::string& name, double value) {
    const auto i = index_of(shared_names_, name);
    if (i == shared_names_.size())
        throw UnknownParameterError("no shared parameter '" + name + "'");
    shared_values_[i] = value;
}

void ParamSet::set_specific(const std::string& name, const std::string& unit, double value) {
    const auto i = index_of(specific_names_, name);
    if (i == specific_names_.size())
        throw UnknownParameterError("no specific parameter '" + name + "'");
    const auto u = index_of(unit_names_, unit);
    if (u == unit_names_.size()) throw UnknownParameterError("no unit '" + unit + "'");
    specific_(i, u) = value;
}

NamedValues ParamSet::flatten() const {
    NamedValues out;
    out.reserve(flat_size());
    for (std::size_t a = 0; a < shared_names_.size(); ++a)
        out.emplace_back(shared_names_[a], shared_values_[a]);
    for (std::size_t u = 0; u < unit_names_.size(); ++u)
        for (std::size_t b = 0; b < specific_names_.size(); ++b)
            out.emplace_back(format_param_name(specific_names_[b], unit_names_[u]),
                             specific_(b, u));
    return out;
}

std::vector<double> ParamSet::flat_values() const {
    std::vector<double> out;
    out.reserve(flat_size());
    for (double v : shared_values_) out.push_back(v);
    for (std::size_t u = 0; u < unit_names_.size(); ++u)
        for (std::size_t b = 0; b < specific_names_.size(); ++b) out.push_back(specific_(b, u));
    return out;
}

NamedValues ParamSet::unit_params(std::size_t unit_index) const {
    if (unit_index >= unit_names_.size())
        throw UnknownParameterError("unit index " + std::to_string(unit_index) + " out of range");
    NamedValues out;
    out.reserve(shared_names_.size() + specific_names_.size());
    for (std::size_t a = 0; a < shared_names_.size(); ++a)
        out.emplace_back(shared_names_[a], shared_values_[a]);
    for (std::size_t b = 0; b < specific_names_.size(); ++b)
        out.emplace_back(specific_names_[b], specific_(b, unit_index));
    return out;
}

NamedValues ParamSet::unit_params(const std::string& unit) const {
    const auto u = index_of(unit_names_, unit);
    if (u == unit_names_.size()) throw UnknownParameterError("no unit '" + unit + "'");
    return unit_params(u);
}

ParamSet unflatten(std::span<const double> values, const ParamLayout& layout) {
    if (values.size() != layout.flat_size())
        throw ArgumentError("unflatten: expected " + std::to_string(layout.flat_size()) +
                            " values, got " + std::to_string(values.size()));
    const std::size_t A = layout.shared_names.size();
    const std::size_t B = layout.specific_names.size();
    const std::size_t U = layout.unit_names.size();
    NamedValues shared;
    shared.reserve(A);
    for (std::size_t a = 0; a < A; ++a) shared.emplace_back(layout.shared_names[a], values[a]);
    Matrix specific(B, U);
    for (std::size_t u = 0; u < U; ++u)
        for (std::size_t b = 0; b < B; ++b) specific(b, u) = values[A + u * B + b];
    return {std::move(shared), layout.specific_names, layout.unit_names, std::move(specific)};
}

ParamSet unflatten(const NamedValues& flat, const ParamLayout& layout) {
    if (flat.size() != layout.flat_size())
        throw ArgumentError("unflatten: expected " + std::to_string(layout.flat_size()) +
                            " entries, got " + std::to_string(flat.size()));
    std::unordered_map<std::string, double> byname;
    for (const auto& [n, v] : flat) {
        if (!byname.emplace(n, v).second)
            throw ArgumentError("unflatten: duplicate entry '" + n + "'");
    }
    std::vector<double> values;
    values.reserve(layout.flat_size());
    for (const auto& n : layout.flat_names()) {
        const auto it = byname.find(n);
        if (it == byname.end())
            throw UnknownParameterError("unflatten: missing entry '" + n + "'");
        values.push_back(it->second);
    }
    return unflatten(std::span<const double>(values), layout);
}

ParamSet apply_values(const ParamSet& p, const NamedValues& values) {
    ParamSet out = p;
    for (const auto& [name, v] : values) {
        const ParsedName pn = parse_param_name(name);
        if (pn.unit) {
            out.set_specific(pn.base, *pn.unit, v);
        } else if (out.has_shared(pn.base)) {
            out.set_shared(pn.base, v);
        } else if (out.has_specific(pn.base)) {
            for (const auto& u : out.unit_names()) out.set_specific(pn.base, u, v);
        } else {
            throw UnknownParameterError("no parameter '" + name + "'");
        }
    }
    return out;
}

ParamSet reclassify_to_shared(const ParamSet& p, const std::string& name, double value) {
    ParamSet out = p;
    if (out.has_shared(name)) {
        out.set_shared(name, value);
        return out;
    }
    const auto b = index_of(out.specific_names_, name);
    if (b == out.specific_names_.size())
        throw UnknownParameterError("cannot reclassify unknown parameter '" + name + "'");
    out.specific_names_.erase(out.specific_names_.begin() + static_cast<std::ptrdiff_t>(b));
    Matrix reduced(out.specific_names_.size(), out.unit_names_.size());
    for (std::size_t i = 0, src = 0; src < p.specific_names().size(); ++src) {
        if (src == b) continue;
        for (std::size_t u = 0; u < out.unit_names_.size(); ++u)
            reduced(i, u) = p.specific_(src, u);
        ++i;
    }
    out.specific_ = std::move(reduced);
    out.shared_names_.push_back(name);
    out.shared_values_.push_back(value);
    return out;
}

ParamSet reclassify_to_specific(const ParamSet& p, const std::string& name,
                                std::span<const double> values) {
    if (!values.empty() && values.size() != p.unit_count())
        throw ArgumentError("reclassify_to_specific: expected " + std::to_string(p.unit_count()) +
                            " values for '" + name + "', got " + std::to_string(values.size()));
    ParamSet out = p;
    if (out.has_specific(name)) {
        for (std::size_t u = 0; u < values.size(); ++u)
            out.set_specific(name, out.unit_names_[u], values[u]);
        return out;
    }
    const auto a = index_of(out.shared_names_, name);
    if (a == out.shared_names_.size())
        throw UnknownParameterError("cannot reclassify unknown parameter '" + name + "'");
    const double broadcast = out.shared_values_[a];
    out.shared_names_.erase(out.shared_names_.begin() + static_cast<std::ptrdiff_t>(a));
    out.shared_values_.erase(out.shared_values_.begin() + static_cast<std::ptrdiff_t>(a));
    Matrix grown(out.specific_names_.size() + 1, out.unit_names_.size());
    for (std::size_t b = 0; b < out.specific_names_.size(); ++b)
        for (std::size_t u = 0; u < out.unit_names_.size(); ++u) grown(b, u) = out.specific_(b, u);
    const std::size_t last = out.specific_names_.size();
    for (std::size_t u = 0; u < out.unit_names_.size(); ++u)
        grown(last, u) = values.empty() ? broadcast : values[u];
    out.specific_names_.push_back(name);
    out.specific_ = std::move(grown);
    return out;
}

ParamSet reclassify_to_specific(const ParamSet& p, const std::string& name) {
    return reclassify_to_specific(p, name, {});
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

Transform& TransformSpec::insert(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name) return t;
    entries_.emplace_back(name, Transform{});
    return entries_.back().second;
}

void TransformSpec::set_log(const std::string& name) {
    insert(name).kind = TransformKind::log_scale;
}

void TransformSpec::set_log(std::span<const std::string> names) {
    for (const auto& n : names) set_log(n);
}

void TransformSpec::set_logit(const std::string& name) {
    insert(name).kind = TransformKind::logit;
}

void TransformSpec::set_barycentric(std::span<const std::string> group_members) {
    if (group_members.size() < 2)
        throw ArgumentError("barycentric group needs at least two members");
    const int id = next_group_++;
    for (const auto& n : group_members) {
        Transform& t = insert(n);
        t.kind = TransformKind::barycentric;
        t.group = id;
    }
}

void TransformSpec::set_custom(const std::string& name, std::function<double(double)> to_est,
                               std::function<double(double)> from_est) {
    if (!to_est || !from_est) throw ArgumentError("custom transform for '" + name + "' is empty");
    Transform& t = insert(name);
    t.kind = TransformKind::custom;
    t.to_est = std::move(to_est);
    t.from_est = std::move(from_est);
}

const Transform* TransformSpec::find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return &t;
    const auto open = name.find('[');
    if (open != std::string::npos) {
        const std::string base = name.substr(0, open);
        for (const auto& [n, t] : entries_)
            if (n == base) return &t;
    }
    return nullptr;
}

namespace {

double apply_to_est(const Transform& t, const std::string& name, double v) {
    switch (t.kind) {
        case TransformKind::identity:
            return v;
        case TransformKind::log_scale:
        case TransformKind::barycentric:
            if (!(v > 0))
                throw TransformDomainError("parameter '" + name + "' must be positive, got " +
                                           format_double(v));
            return std::log(v);
        case TransformKind::logit:
            if (!(v > 0 && v < 1))
                throw TransformDomainError("parameter '" + name + "' must lie in (0,1), got " +
                                           format_double(v));
            return std::log(v / (1 - v));
        case TransformKind::custom:
            return t.to_est(v);
    }
    return v;
}

double apply_from_est(const Transform& t, double v) {
    switch (t.kind) {
        case TransformKind::identity:
            return v;
        case TransformKind::log_scale:
        case TransformKind::barycentric:
            return std::exp(v);
        case TransformKind::logit:
            return 1 / (1 + std::exp(-v));
        case TransformKind::custom:
            return t.from_est(v);
    }
    return v;
}

const Transform kIdentity{};

}  // namespace

double TransformSpec::to_est_value(const std::string& name, double value) const {
    const Transform* t = find(name);
    return apply_to_est(t ? *t : kIdentity, name, value);
}

double TransformSpec::from_est_value(const std::string& name, double value) const {
    const Transform* t = find(name);
    return apply_from_est(t ? *t : kIdentity, value);
}

TransformIndex::TransformIndex(std::span<const std::string> names, const TransformSpec& spec)
    : names_(names.begin(), names.end()) {
    kinds_.reserve(names.size());
    for (const auto& n : names) {
        const Transform* t = spec.find(n);
        kinds_.push_back(t ? *t : kIdentity);
    }
    // Barycentric renormalization cells: one per (group id, unit).
    std::vector<std::pair<int, std::string>> cells;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (kinds_[i].kind != TransformKind::barycentric) continue;
        const ParsedName pn = parse_param_name(names_[i]);
        const std::pair<int, std::string> cell{kinds_[i].group, pn.unit.value_or("")};
        auto it = std::find(cells.begin(), cells.end(), cell);
        if (it == cells.end()) {
            cells.push_back(cell);
            groups_.emplace_back();
            it = cells.end() - 1;
        }
        groups_[static_cast<std::size_t>(it - cells.begin())].push_back(i);
    }
}

double TransformIndex::to_est(std::size_t i, double value) const {
    return apply_to_est(kinds_[i], names_[i], value);
}

double TransformIndex::from_est(std::size_t i, double value) const {
    return apply_from_est(kinds_[i], value);
}

void TransformIndex::renormalize_groups(std::span<double> values) const {
    for (const auto& g : groups_) {
        double sum = 0;
        for (std::size_t i : g) sum += values[i];
        if (!(sum > 0))
            throw TransformDomainError("barycentric group containing '" + names_[g.front()] +
                                       "' sums to " + format_double(sum));
        for (std::size_t i : g) values[i] /= sum;
    }
}

std::vector<double> to_est(const ParamSet& p, const TransformSpec& t) {
    const auto names = p.flat_names();
    const auto values = p.flat_values();
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = t.to_est_value(names[i], values[i]);
    return out;
}

ParamSet from_est(std::span<const double> est, const TransformSpec& t, const ParamLayout& layout) {
    if (est.size() != layout.flat_size())
        throw ArgumentError("from_est: expected " + std::to_string(layout.flat_size()) +
                            " values, got " + std::to_string(est.size()));
    const auto names = layout.flat_names();
    const TransformIndex idx(names, t);
    std::vector<double> natural(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) natural[i] = idx.from_est(i, est[i]);
    idx.renormalize_groups(natural);
    return unflatten(std::span<const double>(natural), layout);
}

// ---------------------------------------------------------------------------
// RwSdSpec
// ---------------------------------------------------------------------------

RwSdSpec::Entry& RwSdSpec::insert(const std::string& name) {
    const ParsedName pn = parse_param_name(name);
    for (auto& e : entries_)
        if (e.base == pn.base && e.unit == pn.unit) return e;
    entries_.push_back({pn.base, pn.unit, 0.0, {}});
    return entries_.back();
}

void RwSdSpec::set(const std::string& name, double value) {
    if (!(value >= 0))
        throw BoundsError("random-walk intensity for '" + name + "' must be nonnegative, got " +
                          format_double(value));
    Entry& e = insert(name);
    e.value = value;
    e.per_time.clear();
}

void RwSdSpec::set_profile(const std::string& name, std::vector<double> per_time) {
    if (per_time.empty())
        throw ArgumentError("random-walk profile for '" + name + "' is empty");
    for (double v : per_time)
        if (!(v >= 0))
            throw BoundsError("random-walk intensity for '" + name +
                              "' must be nonnegative, got " + format_double(v));
    Entry& e = insert(name);
    e.value = per_time.front();
    e.per_time = std::move(per_time);
}

const RwSdSpec::Entry* RwSdSpec::lookup(const std::string& base, const std::string& unit) const {
    const Entry* recycled = nullptr;
    for (const auto& e : entries_) {
        if (e.base != base) continue;
        if (e.unit) {
            if (!unit.empty() && *e.unit == unit) return &e;
        } else {
            recycled = &e;
        }
    }
    return recycled;
}

double RwSdSpec::intensity(const std::string& base, const std::string& unit,
                           std::size_t n) const {
    const Entry* e = lookup(base, unit);
    if (!e) return 0.0;
    if (e->per_time.empty()) return e->value;
    return e->per_time[std::min(n, e->per_time.size() - 1)];
}

bool RwSdSpec::touches(const std::string& base, const std::string& unit) const {
    return lookup(base, unit) != nullptr;
}

RwSdSpec RwSdSpec::restricted_to(std::span<const std::string> bases) const {
    RwSdSpec out;
    for (const auto& e : entries_)
        if (std::find(bases.begin(), bases.end(), e.base) != bases.end())
            out.entries_.push_back(e);
    return out;
}

RwSdSpec RwSdSpec::without(const std::string& base) const {
    RwSdSpec out;
    for (const auto& e : entries_)
        if (e.base != base) out.entries_.push_back(e);
    return out;
}

std::vector<std::string> RwSdSpec::base_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (std::find(out.begin(), out.end(), e.base) == out.end()) out.push_back(e.base);
    return out;
}

NamedValues RwSdSpec::flat_entries() const {
    NamedValues out;
    for (const auto& e : entries_) {
        const std::string name = e.unit ? format_param_name(e.base, *e.unit) : e.base;
        out.emplace_back(name, e.per_time.empty() ? e.value : e.per_time.front());
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<double>>> RwSdSpec::entries() const {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (const auto& e : entries_) {
        const std::string name = e.unit ? format_param_name(e.base, *e.unit) : e.base;
        out.emplace_back(name, e.per_time.empty() ? std::vector<double>{e.value} : e.per_time);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Design matrices
// ---------------------------------------------------------------------------

NamedValues DesignMatrix::row(std::size_t i) const {
    if (i >= values.rows())
        throw ArgumentError("design row " + std::to_string(i) + " out of range");
    NamedValues out;
    out.reserve(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) out.emplace_back(columns[j], values(i, j));
    return out;
}

DesignMatrix runif_panel_design(const NamedValues& lower, const NamedValues& upper,
                                std::span<const std::string> specific_names,
                                std::span<const std::string> unit_names, std::size_t nseq,
                                RngStream& rng) {
    if (lower.size() != upper.size())
        throw ArgumentError("runif_panel_design: lower and upper name sets differ");
    for (const auto& [name, lo] : lower) {
        const double hi = lookup_named(upper, name, "upper bound set");
        if (lo > hi)
            throw BoundsError("lower bound " + format_double(lo) + " exceeds upper bound " +
                              format_double(hi) + " for '" + name + "'");
    }
    const auto is_specific = [&](const std::string& name) {
        return std::find(specific_names.begin(), specific_names.end(), name) !=
               specific_names.end();
    };
    for (const auto& n : specific_names) lookup_named(lower, n, "lower bound set");

    std::vector<std::string> columns;
    std::vector<std::pair<double, double>> bounds;
    for (const auto& [name, lo] : lower) {
        if (is_specific(name)) continue;
        columns.push_back(name);
        bounds.emplace_back(lo, lookup_named(upper, name, "upper bound set"));
    }
    for (const auto& u : unit_names) {
        for (const auto& [name, lo] : lower) {
            if (!is_specific(name)) continue;
            columns.push_back(format_param_name(name, u));
            bounds.emplace_back(lo, lookup_named(upper, name, "upper bound set"));
        }
    }

    DesignMatrix out;
    out.columns = std::move(columns);
    out.values = Matrix(nseq, out.columns.size());
    for (std::size_t i = 0; i < nseq; ++i)
        for (std::size_t j = 0; j < out.columns.size(); ++j) {
            const auto [lo, hi] = bounds[j];
            out.values(i, j) = lo + (hi - lo) * rng.u01();
        }
    return out;
}

DesignMatrix profile_design(const std::string& focal, std::span<const double> grid,
                            const NamedValues& lower, const NamedValues& upper, std::size_t nprof,
                            RngStream& rng) {
    if (grid.empty()) throw ArgumentError("profile_design: empty grid for '" + focal + "'");
    if (nprof == 0) throw ArgumentError("profile_design: nprof must be positive");
    if (lower.size() != upper.size())
        throw ArgumentError("profile_design: lower and upper name sets differ");
    std::vector<std::pair<double, double>> bounds;
    for (const auto& [name, lo] : lower) {
        if (name == focal)
            throw ArgumentError("profile_design: focal parameter '" + focal +
                                "' must not appear in the randomization bounds");
        const double hi = lookup_named(upper, name, "upper bound set");
        if (lo > hi)
            throw BoundsError("lower bound " + format_double(lo) + " exceeds upper bound " +
                              format_double(hi) + " for '" + name + "'");
        bounds.emplace_back(lo, hi);
    }

    DesignMatrix out;
    out.columns.push_back(focal);
    for (const auto& [name, lo] : lower) out.columns.push_back(name);
    const std::size_t rows = grid.size() * nprof;
    out.values = Matrix(rows, out.columns.size());
    for (std::size_t i = 0; i < rows; ++i) {
        out.values(i, 0) = grid[i % grid.size()];
        for (std::size_t j = 0; j < bounds.size(); ++j) {
            const auto [lo, hi] = bounds[j];
            out.values(i, j + 1) = lo + (hi - lo) * rng.u01();
        }
    }
    return out;
}

Table design_to_table(const DesignMatrix& d) {
    Table t;
    t.columns = d.columns;
    for (std::size_t i = 0; i < d.values.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(d.columns.size());
        for (std::size_t j = 0; j < d.columns.size(); ++j)
            row.push_back(format_double(d.values(i, j)));
        t.add_row(std::move(row));
    }
    return t;
}

DesignMatrix design_from_table(const Table& t) {
    DesignMatrix d;
    d.columns = t.columns;
    d.values = Matrix(t.rows.size(), t.columns.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < t.columns.size(); ++j)
            d.values(i, j) = parse_double(t.rows[i][j]);
    return d;
}

}  // namespace panelssm
