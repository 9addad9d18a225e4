#ifndef PANELSSM_PANEL_IO_HPP
#define PANELSSM_PANEL_IO_HPP

#include <string>
#include <utility>
#include <vector>

#include "panelssm/model.hpp"

namespace panelssm {

// Flat key = value lines; '#' starts a comment, blank lines skipped, order
// and repeats preserved.
std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text);
std::string format_kv_text(const std::vector<std::pair<std::string, std::string>>& entries);

// Writes dir/panel.txt (model key, unit list with t0 and data file),
// dir/params.csv (flattened name,value pairs), and one per-unit data CSV
// with a time column plus one column per observable. Every unit must carry
// data and the panel a uniform registry key.
void save_panel(const PanelModel& p, const std::string& dir);

// Rebuilds a panel saved by save_panel; function slots, state names, and
// transforms come from the registry entry named in the manifest.
PanelModel load_panel(const std::string& dir);

}  // namespace panelssm

#endif
