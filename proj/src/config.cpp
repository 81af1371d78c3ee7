#include "sfi/config.hpp"

#include "sfi/hash.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace sfi {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double plain_number(const std::string& s) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError("not a number: '" + s + "'");
    return v;
}

int integer(const std::string& s) {
    const std::string t = trim(s);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError("not an integer: '" + s + "'");
    return v;
}

bool boolean(const std::string& s) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("not a boolean: '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty list element in '" + s + "'");
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_number(v[i]);
    return out;
}

void require_ascending(const std::vector<double>& v, const std::string& key) {
    for (size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) throw ConfigError(key + ": values must be strictly ascending");
}

}  // namespace

double parse_quantity(const std::string& text, double period, double duration) {
    const std::string t = trim(text);
    const auto symbol = [&](const std::string& s) -> std::optional<double> {
        const std::string u = trim(s);
        if (u == "T") return period;
        if (u == "T1") return duration;
        return std::nullopt;
    };
    const auto term = [&](const std::string& s) {
        if (auto v = symbol(s)) return *v;
        return plain_number(s);
    };
    const auto op = t.find_first_of("*/");
    if (op == std::string::npos) return term(t);
    if (t.find_first_of("*/", op + 1) != std::string::npos)
        throw ConfigError("at most one '*' or '/' allowed: '" + text + "'");
    const double a = term(t.substr(0, op));
    const double b = term(t.substr(op + 1));
    if (t[op] == '*') return a * b;
    if (b == 0.0) throw ConfigError("division by zero: '" + text + "'");
    return a / b;
}

RunConfig default_config() {
    RunConfig c;
    c.pulse.peak_field = 0.05;
    c.pulse.omega = 0.02;
    c.pulse.n_cycles = 1;
    c.plan.dt = 0.02;
    c.plan.l_max = 70;
    c.scan.tau_window = c.pulse.period() / 4.0;
    c.scan.alpha = 0.001;
    c.scan.epsilon = c.pulse.period() / 1000.0;
    return c;
}

std::vector<double> RunConfig::scan_taus() const {
    if (!scan.tau.empty()) return scan.tau;
    const double peak = field_peak_time(fundamental());
    std::vector<double> out(scan.tau_count);
    for (int j = 0; j < scan.tau_count; ++j)
        out[j] = peak - scan.tau_window + 2.0 * scan.tau_window * j / (scan.tau_count - 1);
    return out;
}

std::string RunConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["peak_field"] = format_number(pulse.peak_field);
    kv["omega"] = format_number(pulse.omega);
    kv["n_cycles"] = std::to_string(pulse.n_cycles);
    if (pulse.signal) {
        kv["signal.tau"] = format_number(pulse.signal->tau);
        kv["signal.alpha"] = format_number(pulse.signal->alpha);
        kv["signal.epsilon"] = format_number(pulse.signal->epsilon);
    } else {
        kv["signal"] = "none";
    }
    const bool yukawa = potential.kind == Potential::Kind::Yukawa;
    kv["potential.kind"] = yukawa ? "yukawa" : "coulomb";
    if (yukawa) {
        kv["potential.screening"] = format_number(potential.screening);
        kv["potential.calibrate"] = potential.calibrate ? "true" : "false";
        if (potential.calibrate) kv["potential.target_ip"] = format_number(potential.target_ip);
        else kv["potential.amplitude"] = format_number(potential.amplitude);
    }
    kv["grid.dr"] = format_number(dr);
    kv["grid.r_max"] = format_number(r_max);
    kv["propagation.dt"] = format_number(plan.dt);
    kv["propagation.dt_fine"] = format_number(plan.dt_fine);
    kv["propagation.l_max"] = std::to_string(plan.l_max);
    kv["propagation.diagnostics_every"] = std::to_string(plan.diagnostics_every);
    kv["projector.l_b"] = std::to_string(l_b);
    kv["projector.n_max"] = std::to_string(n_max);
    kv["scan.e0"] = join(scan.e0);
    kv["scan.tau"] = join(scan_taus());
    kv["scan.alpha"] = format_number(scan.alpha);
    kv["scan.epsilon"] = format_number(scan.epsilon);
    kv["scan.levels"] = join(scan.levels);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string RunConfig::fingerprint() const { return hex64(fnv1a64(canonical())); }

RunConfig parse_config(const std::string& text, const std::string& source) {
    struct Entry {
        std::string value;
        int line;
    };
    std::map<std::string, Entry> entries;
    {
        std::istringstream in(text);
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(source + ":" + std::to_string(no) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            if (entries.count(key))
                throw ConfigError(source + ":" + std::to_string(no) + ": duplicate key '" + key + "'");
            entries[key] = {trim(line.substr(eq + 1)), no};
        }
    }

    RunConfig c = default_config();
    const auto fail = [&](const std::string& key, const std::string& why) -> ConfigError {
        const auto it = entries.find(key);
        const std::string where =
            it == entries.end() ? source : source + ":" + std::to_string(it->second.line);
        return ConfigError(where + ": " + key + ": " + why);
    };
    const auto take = [&](const std::string& key, const std::function<void(const std::string&)>& f) {
        const auto it = entries.find(key);
        if (it == entries.end()) return;
        try {
            f(it->second.value);
        } catch (const ConfigError& e) {
            throw fail(key, e.what());
        }
    };

    // Period-dependent shorthands need omega and n_cycles first.
    take("omega", [&](auto& v) { c.pulse.omega = plain_number(v); });
    take("n_cycles", [&](auto& v) { c.pulse.n_cycles = integer(v); });
    if (!(c.pulse.omega > 0.0)) throw fail("omega", "must be > 0");
    if (c.pulse.n_cycles < 1) throw fail("n_cycles", "must be >= 1");
    const double period = c.pulse.period();
    const double duration = c.pulse.duration();
    const auto q = [&](const std::string& v) { return parse_quantity(v, period, duration); };
    const auto qlist = [&](const std::string& v) {
        std::vector<double> out;
        for (const auto& item : split_list(v)) out.push_back(q(item));
        return out;
    };
    c.scan.tau_window = period / 4.0;
    c.scan.epsilon = period / 1000.0;

    take("peak_field", [&](auto& v) { c.pulse.peak_field = q(v); });
    double signal_alpha = 0.001, signal_epsilon = period / 1000.0;
    take("signal.alpha", [&](auto& v) { signal_alpha = q(v); });
    take("signal.epsilon", [&](auto& v) { signal_epsilon = q(v); });
    take("signal.tau", [&](auto& v) {
        c.pulse.signal = SignalKick{q(v), signal_alpha, signal_epsilon};
    });
    c.scan.alpha = signal_alpha;
    c.scan.epsilon = signal_epsilon;

    take("potential.kind", [&](auto& v) {
        if (v == "coulomb") c.potential.kind = Potential::Kind::Coulomb;
        else if (v == "yukawa") c.potential.kind = Potential::Kind::Yukawa;
        else throw ConfigError("expected coulomb or yukawa");
    });
    take("potential.screening", [&](auto& v) { c.potential.screening = q(v); });
    take("potential.amplitude", [&](auto& v) { c.potential.amplitude = q(v); });
    take("potential.calibrate", [&](auto& v) { c.potential.calibrate = boolean(v); });
    take("potential.target_ip", [&](auto& v) { c.potential.target_ip = q(v); });
    take("grid.dr", [&](auto& v) { c.dr = q(v); });
    take("grid.r_max", [&](auto& v) { c.r_max = q(v); });
    take("propagation.dt", [&](auto& v) { c.plan.dt = q(v); });
    take("propagation.dt_fine", [&](auto& v) { c.plan.dt_fine = q(v); });
    take("propagation.l_max", [&](auto& v) { c.plan.l_max = integer(v); });
    take("propagation.diagnostics_every", [&](auto& v) { c.plan.diagnostics_every = integer(v); });
    take("projector.l_b", [&](auto& v) { c.l_b = integer(v); });
    take("projector.n_max", [&](auto& v) { c.n_max = integer(v); });
    take("scan.e0", [&](auto& v) { c.scan.e0 = qlist(v); });
    take("scan.tau", [&](auto& v) { c.scan.tau = qlist(v); });
    take("scan.tau_window", [&](auto& v) { c.scan.tau_window = q(v); });
    take("scan.tau_count", [&](auto& v) { c.scan.tau_count = integer(v); });
    take("scan.alpha", [&](auto& v) { c.scan.alpha = q(v); });
    take("scan.epsilon", [&](auto& v) { c.scan.epsilon = q(v); });
    take("scan.levels", [&](auto& v) { c.scan.levels = qlist(v); });
    take("workers", [&](auto& v) { c.workers = integer(v); });
    take("output.dir", [&](auto& v) { c.output_dir = v; });

    static const std::vector<std::string> known = {
        "omega", "n_cycles", "peak_field", "signal.alpha", "signal.epsilon", "signal.tau",
        "potential.kind", "potential.screening", "potential.amplitude", "potential.calibrate",
        "potential.target_ip", "grid.dr", "grid.r_max", "propagation.dt", "propagation.dt_fine",
        "propagation.l_max", "propagation.diagnostics_every", "projector.l_b", "projector.n_max",
        "scan.e0", "scan.tau", "scan.tau_window", "scan.tau_count", "scan.alpha", "scan.epsilon",
        "scan.levels", "workers", "output.dir"};
    for (const auto& [key, e] : entries)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(source + ":" + std::to_string(e.line) + ": unknown key '" + key + "'");

    // Validation, before any computation starts.
    const auto check = [&](bool ok, const std::string& key, const std::string& why) {
        if (!ok) throw fail(key, why);
    };
    check(c.pulse.peak_field > 0.0, "peak_field", "must be > 0");
    if (c.pulse.signal) {
        check(c.pulse.signal->tau > 0.0 && c.pulse.signal->tau < duration, "signal.tau",
              "must lie inside (0, T1)");
        check(c.pulse.signal->epsilon > 0.0, "signal.epsilon", "must be > 0");
        check(c.pulse.signal->alpha != 0.0, "signal.alpha", "must be non-zero");
    }
    check(c.potential.screening > 0.0, "potential.screening", "must be > 0");
    check(c.potential.amplitude > 0.0, "potential.amplitude", "must be > 0");
    check(c.potential.target_ip > 0.0, "potential.target_ip", "must be > 0");
    check(c.dr > 0.0, "grid.dr", "must be > 0");
    check(c.r_max >= 10.0 * c.dr, "grid.r_max", "must hold at least 10 grid points");
    check(c.plan.dt > 0.0, "propagation.dt", "must be > 0");
    check(c.plan.dt_fine >= 0.0, "propagation.dt_fine", "must be >= 0");
    check(c.plan.l_max >= 1 && c.plan.l_max <= 127, "propagation.l_max", "must be in [1, 127]");
    check(c.plan.diagnostics_every >= 0, "propagation.diagnostics_every", "must be >= 0");
    const SignalKick probe{0.5 * duration, 1.0, std::min(c.scan.epsilon, signal_epsilon)};
    check(c.plan.dt_fine <= probe.epsilon / 10.0 * (1.0 + 1e-12), "propagation.dt_fine",
          "must not exceed epsilon/10");
    check(c.l_b >= 0, "projector.l_b", "must be >= 0");
    check(c.n_max >= 1, "projector.n_max", "must be >= 1");
    check(c.l_b <= c.plan.l_max, "projector.l_b", "must not exceed propagation.l_max");
    try {
        require_ascending(c.scan.e0, "scan.e0");
        if (!c.scan.tau.empty()) require_ascending(c.scan.tau, "scan.tau");
        require_ascending(c.scan.levels, "scan.levels");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        throw fail(msg.substr(0, msg.find(':')), msg.substr(msg.find(':') + 2));
    }
    for (double e : c.scan.e0) check(e > 0.0, "scan.e0", "values must be > 0");
    for (double t : c.scan.tau) check(t > 0.0 && t < duration, "scan.tau", "values must lie inside (0, T1)");
    for (double l : c.scan.levels) check(l > 0.0 && l < 1.0, "scan.levels", "values must lie in (0, 1)");
    check(c.scan.tau_window > 0.0, "scan.tau_window", "must be > 0");
    check(c.scan.tau_count >= 3, "scan.tau_count", "must be >= 3");
    if (c.scan.tau.empty()) {
        const double peak = field_peak_time(c.fundamental());
        check(peak - c.scan.tau_window > 0.0 && peak + c.scan.tau_window < duration,
              "scan.tau_window", "window leaves (0, T1)");
    }
    check(c.scan.alpha != 0.0, "scan.alpha", "must be non-zero");
    check(c.scan.epsilon > 0.0, "scan.epsilon", "must be > 0");
    check(c.workers >= 1, "workers", "must be >= 1");
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path);
}

RunSetup make_setup(const RunConfig& cfg, double* calibrated_amplitude) {
    RunSetup s;
    s.grid = cfg.grid();
    if (cfg.potential.kind == Potential::Kind::Coulomb) {
        s.potential = Potential::coulomb();
    } else {
        const double a = cfg.potential.calibrate
                             ? calibrate_yukawa(cfg.potential.screening, -cfg.potential.target_ip,
                                                s.grid)
                             : cfg.potential.amplitude;
        s.potential = Potential::yukawa(a, cfg.potential.screening);
    }
    if (calibrated_amplitude) *calibrated_amplitude = s.potential.amplitude;
    s.plan = cfg.plan;
    s.l_b = cfg.l_b;
    s.n_max = cfg.n_max;
    return s;
}

}  // namespace sfi
