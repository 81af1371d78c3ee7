#include "sfi/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strong-field ionization lab: TDSE runs, delta-kick scans, delay analysis"};
    app.require_subcommand(1);
    sfi::CommandOptions o;
    int workers = 0;
    std::string levels, values;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "config file (key = value lines)");
        sub->add_option("--out", o.out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* eigen = app.add_subcommand("eigen", "bound-state energies per l <= L_b");
    auto* prop = app.add_subcommand("propagate", "one TDSE run");
    auto* scan = app.add_subcommand("scan", "delta P over the (E0, tau) grid");
    auto* adk = app.add_subcommand("adk", "ADK first-variation surface");
    auto* delay = app.add_subcommand("delay", "contour midpoints and delays of a surface");
    auto* conv = app.add_subcommand("converge", "observable against one numerical parameter");
    for (auto* s : {eigen, prop, scan, adk, delay, conv}) common(s);
    scan->add_flag("--resume", o.resume, "skip cells recorded in the journal");
    scan->add_option("--stop-after", o.stop_after_cells, "stop after N new cells")->group("");
    delay->add_option("--input", o.input, "surface CSV")->required();
    delay->add_option("--levels", levels, "relative levels, comma separated");
    conv->add_option("--parameter", o.parameter, "dr | dt | Lmax | Lb | eps | alpha")->required();
    conv->add_option("--values", values, "comma separated values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sfi::kExitConfig;
    }
    if (workers > 0) o.workers = workers;
    try {
        for (const auto& l : split(levels)) o.levels.push_back(std::stod(l));
    } catch (const std::exception&) {
        std::cerr << "bad --levels '" << levels << "'\n";
        return sfi::kExitConfig;
    }
    o.values = split(values);

    if (eigen->parsed()) return sfi::cmd_eigen(o, std::cerr);
    if (prop->parsed()) return sfi::cmd_propagate(o, std::cerr);
    if (scan->parsed()) return sfi::cmd_scan(o, std::cerr);
    if (adk->parsed()) return sfi::cmd_adk(o, std::cerr);
    if (delay->parsed()) return sfi::cmd_delay(o, std::cerr);
    return sfi::cmd_converge(o, std::cerr);
}
