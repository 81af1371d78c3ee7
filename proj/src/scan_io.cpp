#include "sfi/scan_io.hpp"

#include "sfi/hash.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace sfi {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + path);
    }
    std::filesystem::rename(tmp, path);
}

namespace {

std::string fingerprint_line(const std::string& fp) { return "# config_fingerprint=" + fp + "\n"; }

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, int line_no) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

}  // namespace

void write_scan_csv(const std::string& path, const ScanResult& scan) {
    std::string text = fingerprint_line(scan.fingerprint);
    text += kScanHeader;
    text += '\n';
    for (int i = 0; i < scan.rows(); ++i)
        for (int j = 0; j < scan.cols(); ++j) {
            if (!scan.cell_ok(i, j)) continue;
            text += format_number(scan.e0[i]) + ',' + format_number(scan.tau[j]) + ',' +
                    format_number(scan.delta_p(i, j)) + ',' + format_number(scan.baseline[i]) +
                    '\n';
        }
    write_file(path, text);
}

ScanResult read_scan_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    ScanResult scan;
    std::string line;
    int line_no = 0;
    bool header = false;
    struct Cell {
        double e0, tau, dp, base;
    };
    std::vector<Cell> cells;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# config_fingerprint=";
            if (line.rfind(key, 0) == 0) scan.fingerprint = line.substr(key.size());
            continue;
        }
        if (!header) {
            if (line != kScanHeader)
                throw FormatError("line " + std::to_string(line_no) + ": expected header " +
                                  kScanHeader);
            header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 4)
            throw FormatError("line " + std::to_string(line_no) + ": expected 4 columns");
        cells.push_back({parse_double(f[0], line_no), parse_double(f[1], line_no),
                         parse_double(f[2], line_no), parse_double(f[3], line_no)});
    }
    if (!header) throw FormatError(path + ": missing header");
    if (cells.empty()) throw FormatError(path + ": no data rows");
    for (const auto& c : cells) {
        scan.e0.push_back(c.e0);
        scan.tau.push_back(c.tau);
    }
    for (auto* axis : {&scan.e0, &scan.tau}) {
        std::sort(axis->begin(), axis->end());
        axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    scan.delta_p = Eigen::MatrixXd::Constant(scan.rows(), scan.cols(), nan);
    scan.baseline.assign(scan.rows(), nan);
    for (const auto& c : cells) {
        const int i = std::lower_bound(scan.e0.begin(), scan.e0.end(), c.e0) - scan.e0.begin();
        const int j = std::lower_bound(scan.tau.begin(), scan.tau.end(), c.tau) - scan.tau.begin();
        scan.delta_p(i, j) = c.dp;
        scan.baseline[i] = c.base;
    }
    return scan;
}

void write_scan_derivative_csv(const std::string& path, const ScanResult& scan) {
    std::string text = fingerprint_line(scan.fingerprint);
    text += "E0_au,tau_au,deltaP,derivative\n";
    for (int i = 0; i < scan.rows(); ++i)
        for (int j = 0; j < scan.cols(); ++j) {
            if (!scan.cell_ok(i, j)) continue;
            text += format_number(scan.e0[i]) + ',' + format_number(scan.tau[j]) + ',' +
                    format_number(scan.delta_p(i, j)) + ',' +
                    format_number(functional_derivative_estimate(scan.delta_p(i, j), scan.alpha)) +
                    '\n';
        }
    write_file(path, text);
}

void write_delay_csv(const std::string& path, const DelayReport& report,
                     const std::string& fingerprint) {
    std::string text = fingerprint_line(fingerprint);
    text += kDelayHeader;
    text += '\n';
    for (const auto& e : report.entries) {
        if (!e.ok()) continue;
        text += format_number(e.e0) + ',' + format_number(e.level) + ',' +
                format_number(e.tau_mid) + ',' + format_number(e.delay) + ',' +
                format_number(e.delay_as()) + ',' + format_number(e.tau_step) + '\n';
    }
    write_file(path, text);
}

void write_eigen_csv(const std::string& path,
                     const std::vector<std::vector<BoundState>>& channels,
                     const std::string& fingerprint) {
    std::string text = fingerprint_line(fingerprint);
    text += kEigenHeader;
    text += '\n';
    for (size_t l = 0; l < channels.size(); ++l)
        for (size_t n = 0; n < channels[l].size(); ++n)
            text += std::to_string(l) + ',' + std::to_string(n) + ',' +
                    format_number(channels[l][n].energy) + '\n';
    write_file(path, text);
}

void write_metadata(const std::string& path, const Metadata& meta) {
    std::string text;
    for (const auto& [k, v] : meta) {
        std::string clean = v;
        std::replace(clean.begin(), clean.end(), '\n', ' ');
        text += k + '=' + clean + '\n';
    }
    write_file(path, text);
}

Metadata read_metadata(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    Metadata meta;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

}  // namespace sfi
