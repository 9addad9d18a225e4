#include "panelssm/panel_io.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

#include "panelssm/csv.hpp"
#include "panelssm/errors.hpp"
#include "panelssm/models_builtin.hpp"

namespace panelssm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (const char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')
                   ? c
                   : '_';
    return out;
}

ParamSet params_from_flat(const NamedValues& flat,
                          const std::vector<std::string>& unit_names) {
    NamedValues shared;
    std::vector<std::string> specific_names;
    for (const auto& [name, value] : flat) {
        const ParsedName pn = parse_param_name(name);
        if (!pn.unit) {
            shared.emplace_back(pn.base, value);
        } else if (std::find(specific_names.begin(), specific_names.end(), pn.base) ==
                   specific_names.end()) {
            specific_names.push_back(pn.base);
        }
    }
    Matrix specific(specific_names.size(), unit_names.size());
    std::vector<bool> seen(specific.rows() * specific.cols(), false);
    for (const auto& [name, value] : flat) {
        const ParsedName pn = parse_param_name(name);
        if (!pn.unit) continue;
        const auto b = std::find(specific_names.begin(), specific_names.end(), pn.base) -
                       specific_names.begin();
        const auto u =
            std::find(unit_names.begin(), unit_names.end(), *pn.unit) - unit_names.begin();
        if (static_cast<std::size_t>(u) == unit_names.size())
            throw ConstructionError("params.csv names unknown unit '" + *pn.unit + "'");
        const std::size_t cell = static_cast<std::size_t>(b) * unit_names.size() +
                                 static_cast<std::size_t>(u);
        if (seen[cell]) throw ConstructionError("duplicate parameter '" + name + "'");
        seen[cell] = true;
        specific(static_cast<std::size_t>(b), static_cast<std::size_t>(u)) = value;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool v) { return v; }))
        throw ConstructionError("params.csv leaves specific parameter cells unset");
    return ParamSet(shared, specific_names, unit_names, specific);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0, lineno = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value, got '" +
                              stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(key, trim(stripped.substr(eq + 1)));
    }
    return out;
}

std::string format_kv_text(const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    for (const auto& [k, v] : entries) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

void save_panel(const PanelModel& p, const std::string& dir) {
    p.validate();
    if (p.units.empty()) throw ArgumentError("save_panel: empty panel");
    const std::string& key = p.units.front().registry_key;
    for (const UnitModel& m : p.units) {
        if (m.registry_key.empty() || m.registry_key != key)
            throw CapabilityError("save_panel needs a uniform registry key; unit '" + m.name +
                                  "' has '" + m.registry_key + "'");
        if (!m.has_data())
            throw CapabilityError("save_panel: unit '" + m.name + "' has no data");
    }
    std::filesystem::create_directories(dir);

    std::vector<std::pair<std::string, std::string>> manifest;
    manifest.emplace_back("model", key);
    for (std::size_t u = 0; u < p.units.size(); ++u) {
        const UnitModel& m = p.units[u];
        const std::string file =
            "data_" + std::to_string(u + 1) + "_" + sanitize_filename(m.name) + ".csv";
        manifest.emplace_back("unit", m.name);
        manifest.emplace_back("t0", format_double(m.t0));
        manifest.emplace_back("data", file);

        Table t;
        t.columns.push_back("time");
        for (const std::string& obs : m.obs_names) t.columns.push_back(obs);
        for (std::size_t n = 0; n < m.n_obs(); ++n) {
            std::vector<std::string> row;
            row.push_back(format_double(m.times[n]));
            for (std::size_t i = 0; i < m.obs_names.size(); ++i)
                row.push_back(format_double(m.data(i, n)));
            t.add_row(std::move(row));
        }
        write_csv(dir + "/" + file, t);
    }
    write_text_file(dir + "/panel.txt", format_kv_text(manifest));

    Table params;
    params.columns = {"name", "value"};
    for (const auto& [name, value] : p.params.flatten())
        params.add_row({name, format_double(value)});
    write_csv(dir + "/params.csv", params);
}

PanelModel load_panel(const std::string& dir) {
    const auto manifest = parse_kv_text(read_text_file(dir + "/panel.txt"));

    std::string model_key;
    struct UnitEntry {
        std::string name, t0, data;
    };
    std::vector<UnitEntry> entries;
    for (const auto& [k, v] : manifest) {
        if (k == "model") {
            if (!model_key.empty()) throw ConfigError("panel.txt repeats 'model'");
            model_key = v;
        } else if (k == "unit") {
            entries.push_back({v, "", ""});
        } else if (k == "t0" || k == "data") {
            if (entries.empty())
                throw ConfigError("panel.txt: '" + k + "' appears before any unit");
            std::string& slot = k == "t0" ? entries.back().t0 : entries.back().data;
            if (!slot.empty())
                throw ConfigError("panel.txt repeats '" + k + "' for unit '" +
                                  entries.back().name + "'");
            slot = v;
        } else {
            throw ConfigError("panel.txt: unknown key '" + k + "'");
        }
    }
    if (model_key.empty()) throw ConfigError("panel.txt lacks a model key");
    if (entries.empty()) throw ConfigError("panel.txt lists no units");
    const PanelFactory& factory = find_model(model_key);

    std::vector<UnitModel> units;
    std::vector<std::string> unit_names;
    for (const UnitEntry& e : entries) {
        if (e.t0.empty() || e.data.empty())
            throw ConfigError("panel.txt: unit '" + e.name + "' needs both t0 and data");
        const Table t = read_csv(dir + "/" + e.data);
        if (t.rows.empty()) throw ConfigError("data file '" + e.data + "' has no rows");
        const std::size_t time_col = t.col_index("time");

        UnitModel m = factory.make_unit(e.name, t.rows.size());
        m.t0 = parse_double(e.t0);
        m.times.resize(t.rows.size());
        m.data = Matrix(m.obs_names.size(), t.rows.size());
        std::vector<std::size_t> obs_cols;
        for (const std::string& obs : m.obs_names) obs_cols.push_back(t.col_index(obs));
        if (t.columns.size() != m.obs_names.size() + 1)
            throw ConfigError("data file '" + e.data + "' has extra columns");
        for (std::size_t n = 0; n < t.rows.size(); ++n) {
            m.times[n] = parse_double(t.rows[n][time_col]);
            for (std::size_t i = 0; i < obs_cols.size(); ++i)
                m.data(i, n) = parse_double(t.rows[n][obs_cols[i]]);
        }
        unit_names.push_back(e.name);
        units.push_back(std::move(m));
    }

    const Table params = read_csv(dir + "/params.csv");
    const std::size_t name_col = params.col_index("name");
    const std::size_t value_col = params.col_index("value");
    NamedValues flat;
    for (const auto& row : params.rows)
        flat.emplace_back(row[name_col], parse_double(row[value_col]));

    PanelModel p = build_panel(std::move(units), params_from_flat(flat, unit_names));
    return p;
}

}  // namespace panelssm
