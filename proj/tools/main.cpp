#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "panelssm/cli.hpp"
#include "panelssm/csv.hpp"
#include "panelssm/errors.hpp"
#include "panelssm/panel_io.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string model;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& opt) {
    sub->add_option("--config", opt.config, "flat key = value config file");
    sub->add_option("--model", opt.model, "model registry key (gompertz, random_walk)");
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--workers", opt.workers, "worker threads");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--set", opt.sets, "extra config entry 'key = value'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Likelihood-based inference for panels of state-space models"};
    app.require_subcommand(1);
    CommonOpts opt;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "draw a panel from the generative model and save it"},
        {"pfilter", "replicated particle-filter likelihood evaluation"},
        {"mif2", "panel iterated filtering searches"},
        {"block-refine", "mif2 searches plus per-unit block refinement"},
        {"profile", "profile likelihood over a focal parameter"},
        {"mcap", "Monte Carlo adjusted profile interval from a profile CSV"},
        {"kalman", "exact likelihood where the model admits one"},
    };
    for (const auto& [name, desc] : commands) add_common(app.add_subcommand(name, desc), opt);

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        std::vector<std::pair<std::string, std::string>> entries;
        if (!opt.config.empty()) {
            const auto file = panelssm::parse_kv_text(panelssm::read_text_file(opt.config));
            entries.insert(entries.end(), file.begin(), file.end());
        }
        entries.emplace_back("command", command);
        if (!opt.model.empty()) entries.emplace_back("model", opt.model);
        if (opt.seed) entries.emplace_back("seed", std::to_string(*opt.seed));
        if (opt.workers) entries.emplace_back("workers", std::to_string(*opt.workers));
        if (!opt.out.empty()) entries.emplace_back("out", opt.out);
        for (const std::string& s : opt.sets) {
            const auto kv = panelssm::parse_kv_text(s);
            entries.insert(entries.end(), kv.begin(), kv.end());
        }
        return panelssm::run(panelssm::parse_config(entries));
    } catch (const panelssm::ConfigError& e) {
        std::cerr << "panelssm: config error: " << e.what() << "\n";
        return panelssm::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "panelssm: error: " << e.what() << "\n";
        return panelssm::kExitError;
    }
}
