#pragma once

#include "sfi/atom.hpp"
#include "sfi/fields.hpp"
#include "sfi/propagator.hpp"
#include "sfi/rates.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sfi {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PotentialConfig {
    Potential::Kind kind = Potential::Kind::Coulomb;
    double screening = 2.0;
    double amplitude = 1.0;
    bool calibrate = true;
    double target_ip = 0.5;
};

struct ScanConfig {
    std::vector<double> e0 = {0.04, 0.05, 0.06, 0.07};
    std::vector<double> tau;  ///< explicit list; empty selects window + count
    double tau_window;        ///< half-width around the field peak
    int tau_count = 17;
    double alpha;
    double epsilon;
    std::vector<double> levels = {0.5, 0.8};
};

/// Everything a subcommand needs. Parsed from "key = value" lines; numeric
/// values may use the period T = 2 pi / omega and the duration T1 = N T, as
/// in "T/1000", "0.25*T" or "T1/2". Lists are comma separated.
struct RunConfig {
    PulseSpec pulse;
    PotentialConfig potential;
    double dr = 0.05;
    double r_max = 700.0;
    PropagationPlan plan;
    int l_b = 12;
    int n_max = 15;
    ScanConfig scan;
    int workers = 1;
    std::string output_dir = ".";

    /// Sorted key=value text of every setting that affects results
    /// (workers and output.dir excluded).
    std::string canonical() const;
    std::string fingerprint() const;

    RadialGrid grid() const { return RadialGrid::with_extent(dr, r_max); }
    /// Kick-free pulse at this config's peak field.
    PulseSpec fundamental() const { return pulse.without_kick(); }
    /// Delay values of the scan: the explicit list, or tau_count points over
    /// field peak +- tau_window.
    std::vector<double> scan_taus() const;
};

RunConfig default_config();
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Resolve the potential (calibrating a Yukawa amplitude if requested) and
/// build the numerical setup.
RunSetup make_setup(const RunConfig& cfg, double* calibrated_amplitude = nullptr);

/// Parse one value with the T / T1 shorthand; throws ConfigError.
double parse_quantity(const std::string& text, double period, double duration);

}  // namespace sfi
