#pragma once

#include "sfi/atom.hpp"
#include "sfi/rates.hpp"
#include "sfi/scan_result.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfi {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Metadata = std::map<std::string, std::string>;

inline constexpr const char* kScanHeader = "E0_au,tau_au,deltaP,baselineP";
inline constexpr const char* kDelayHeader = "E0_au,level,tau_mid_au,delay_au,delay_as,tau_step_au";
inline constexpr const char* kEigenHeader = "ell,n_index,energy_au";

/// Long-format table, one line per successful cell, preceded by a
/// "# config_fingerprint=" comment.
void write_scan_csv(const std::string& path, const ScanResult& scan);
ScanResult read_scan_csv(const std::string& path);

/// E0_au, tau_au, deltaP, derivative = deltaP / (alpha sqrt(pi)).
void write_scan_derivative_csv(const std::string& path, const ScanResult& scan);

void write_delay_csv(const std::string& path, const DelayReport& report,
                     const std::string& fingerprint);

void write_eigen_csv(const std::string& path,
                     const std::vector<std::vector<BoundState>>& channels,
                     const std::string& fingerprint);

/// Sidecar "<file>.meta": sorted key=value lines.
void write_metadata(const std::string& path, const Metadata& meta);
Metadata read_metadata(const std::string& path);

/// Replace `path` atomically by writing a temporary file first.
void write_file(const std::string& path, const std::string& text);

}  // namespace sfi
