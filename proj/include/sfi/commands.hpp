#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sfi {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitUnstable = 3, kExitScanFailed = 4 };

struct CommandOptions {
    std::string config_path;         ///< empty: built-in defaults
    std::string out_dir;             ///< empty: output.dir from the config
    std::optional<int> workers;
    bool resume = false;
    int stop_after_cells = -1;       ///< scan: stop after this many new cells
    std::string input;               ///< delay: scan CSV
    std::vector<double> levels;      ///< delay: overrides scan.levels
    std::string parameter;           ///< converge
    std::vector<std::string> values; ///< converge
};

int cmd_eigen(const CommandOptions& o, std::ostream& log);
int cmd_propagate(const CommandOptions& o, std::ostream& log);
int cmd_scan(const CommandOptions& o, std::ostream& log);
int cmd_adk(const CommandOptions& o, std::ostream& log);
int cmd_delay(const CommandOptions& o, std::ostream& log);
int cmd_converge(const CommandOptions& o, std::ostream& log);

}  // namespace sfi
