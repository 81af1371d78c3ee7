#include "sfi/commands.hpp"

#include "sfi/adk.hpp"
#include "sfi/config.hpp"
#include "sfi/hash.hpp"
#include "sfi/rates.hpp"
#include "sfi/scan_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace sfi {

namespace fs = std::filesystem;

namespace {

struct Context {
    RunConfig cfg;
    fs::path out;
};

Context open_context(const CommandOptions& o) {
    Context c{o.config_path.empty() ? default_config() : load_config(o.config_path), {}};
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers must be >= 1");
        c.cfg.workers = *o.workers;
    }
    c.out = o.out_dir.empty() ? fs::path(c.cfg.output_dir) : fs::path(o.out_dir);
    fs::create_directories(c.out);
    return c;
}

// Runs `body`, mapping configuration and input problems to exit code 2.
template <class Body>
int guarded(std::ostream& log, Body body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
    } catch (const FormatError& e) {
        log << "input error: " << e.what() << '\n';
    } catch (const CalibrationError& e) {
        log << "config error: " << e.what() << '\n';
    } catch (const ScanJournalError& e) {
        log << "journal error: " << e.what() << '\n';
    } catch (const PropagationUnstable& e) {
        log << "error: " << e.what() << '\n';
        return kExitUnstable;
    } catch (const std::invalid_argument& e) {
        log << "invalid setup: " << e.what() << '\n';
    }
    return kExitConfig;
}

Metadata config_metadata(const RunConfig& cfg) {
    Metadata meta;
    meta["config_fingerprint"] = cfg.fingerprint();
    std::istringstream in(cfg.canonical());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        meta["config." + line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

std::string path_str(const fs::path& p) { return p.string(); }

}  // namespace

int cmd_eigen(const CommandOptions& o, std::ostream& log) {
    return guarded(log, [&] {
        const auto ctx = open_context(o);
        double amplitude = 0.0;
        const RunSetup s = make_setup(ctx.cfg, &amplitude);
        std::vector<std::vector<BoundState>> channels(s.l_b + 1);
        for (int l = 0; l <= s.l_b; ++l)
            if (s.n_max - l >= 1) channels[l] = bound_states(s.grid, s.potential, l, s.n_max - l);
        const auto csv = ctx.out / "eigen.csv";
        write_eigen_csv(path_str(csv), channels, ctx.cfg.fingerprint());
        Metadata meta = config_metadata(ctx.cfg);
        meta["potential.amplitude_used"] = format_number(amplitude);
        int count = 0;
        for (const auto& c : channels) count += static_cast<int>(c.size());
        meta["states"] = std::to_string(count);
        write_metadata(path_str(csv) + ".meta", meta);
        log << "wrote " << count << " bound states to " << csv.string() << '\n';
        return kExitOk;
    });
}

int cmd_propagate(const CommandOptions& o, std::ostream& log) {
    return guarded(log, [&] {
        const auto ctx = open_context(o);
        const KickLab lab(make_setup(ctx.cfg));
        const auto& cfg = ctx.cfg;
        nlohmann::json rec;
        rec["config_fingerprint"] = cfg.fingerprint();
        std::string diag;
        DiagnosticObserver observer;
        if (cfg.plan.diagnostics_every > 0) {
            diag = "# config_fingerprint=" + cfg.fingerprint() + "\nt,norm,bound_population\n";
            observer = [&](double t, const WaveFunction& psi) {
                const double bound = project_bound(psi, lab.projector()).norm_squared();
                diag += format_number(t) + ',' + format_number(std::sqrt(psi.norm_squared())) +
                        ',' + format_number(bound) + '\n';
            };
        }
        const auto t0 = std::chrono::steady_clock::now();
        int code = kExitOk;
        try {
            const RunOutcome r = lab.run(cfg.pulse, observer);
            const auto& pr = r.propagation;
            rec["P"] = r.probability;
            rec["final_norm"] = pr.norm;
            rec["initial_norm"] = pr.initial_norm;
            rec["bound_population"] = project_bound(pr.psi, lab.projector()).norm_squared();
            rec["outer_population"] = pr.outer_population;
            rec["reflection_flag"] = pr.reflection_flag;
            rec["steps"] = pr.steps_taken;
            rec["kicked"] = cfg.pulse.signal.has_value();
            log << "P = " << format_number(r.probability) << '\n';
        } catch (const PropagationUnstable& e) {
            rec["error"] = e.what();
            rec["norm_drift"] = e.drift;
            log << "error: " << e.what() << '\n';
            code = kExitUnstable;
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_file(path_str(ctx.out / "propagate.json"), rec.dump(2) + "\n");
        // Wall time lives apart so the record itself stays reproducible.
        nlohmann::json timing;
        timing["config_fingerprint"] = cfg.fingerprint();
        timing["wall_time_s"] = wall;
        write_file(path_str(ctx.out / "propagate.timing.json"), timing.dump(2) + "\n");
        if (!diag.empty()) write_file(path_str(ctx.out / "diagnostics.csv"), diag);
        return code;
    });
}

int cmd_scan(const CommandOptions& o, std::ostream& log) {
    return guarded(log, [&] {
        const auto ctx = open_context(o);
        const auto& cfg = ctx.cfg;
        const KickLab lab(make_setup(cfg));
        ScanOptions so;
        so.workers = cfg.workers;
        so.journal_path = path_str(ctx.out / "scan.journal");
        so.resume = o.resume;
        so.max_new_cells = o.stop_after_cells;
        so.fingerprint = cfg.fingerprint();
        const ScanRun run = scan(lab, cfg.fundamental(), cfg.scan.e0, cfg.scan_taus(),
                                 cfg.scan.alpha, cfg.scan.epsilon, so);
        log << "cells: " << run.computed_cells << " computed, " << run.reused_cells
            << " from journal\n";
        if (run.interrupted) {
            log << "scan interrupted; rerun with --resume to finish\n";
            return kExitOk;
        }
        const auto& res = run.result;
        const auto csv = ctx.out / "scan.csv";
        write_scan_csv(path_str(csv), res);
        write_scan_derivative_csv(path_str(ctx.out / "scan_derivative.csv"), res);
        Metadata meta = config_metadata(cfg);
        meta["cells"] = std::to_string(res.rows() * res.cols());
        meta["failed_cells"] = std::to_string(res.failures.size());
        for (const auto& f : res.failures)
            meta["failure." + std::to_string(f.row) + "." + std::to_string(f.col)] = f.message;
        meta["reflection_flagged_cells"] = std::to_string(res.reflection_flags.size());
        for (const auto& [i, j] : res.reflection_flags)
            meta["reflection." + std::to_string(i) + "." + std::to_string(j)] = "outer population above 1e-6";
        write_metadata(path_str(csv) + ".meta", meta);
        for (const auto& f : res.failures)
            log << "cell (" << f.row << ", " << f.col << ") failed: " << f.message << '\n';
        const int total = res.rows() * res.cols();
        if (static_cast<int>(res.failures.size()) == total) return kExitScanFailed;
        return kExitOk;
    });
}

int cmd_adk(const CommandOptions& o, std::ostream& log) {
    return guarded(log, [&] {
        const auto ctx = open_context(o);
        const auto& cfg = ctx.cfg;
        AdkParams a;
        a.ionization_potential = cfg.potential.target_ip;
        ScanResult res = adk_contours(cfg.scan.e0, cfg.scan_taus(), cfg.fundamental(),
                                      cfg.scan.alpha, cfg.scan.epsilon, a);
        res.fingerprint = cfg.fingerprint();
        const auto csv = ctx.out / "adk.csv";
        write_scan_csv(path_str(csv), res);
        Metadata meta = config_metadata(cfg);
        meta["surface"] = "adk";
        meta["adk.ionization_potential"] = format_number(a.ionization_potential);
        meta["adk.charge"] = format_number(a.charge);
        write_metadata(path_str(csv) + ".meta", meta);
        log << "wrote " << res.rows() * res.cols() << " ADK cells to " << csv.string() << '\n';
        return kExitOk;
    });
}

int cmd_delay(const CommandOptions& o, std::ostream& log) {
    return guarded(log, [&] {
        if (o.input.empty()) throw ConfigError("delay needs --input");
        const ScanResult scan = read_scan_csv(o.input);
        PulseSpec pulse;
        std::vector<double> levels = {0.5, 0.8};
        fs::path out = o.out_dir.empty() ? fs::path(o.input).parent_path() : fs::path(o.out_dir);
        if (!o.config_path.empty()) {
            const RunConfig cfg = load_config(o.config_path);
            pulse = cfg.fundamental();
            levels = cfg.scan.levels;
            if (o.out_dir.empty()) out = cfg.output_dir;
        } else if (fs::exists(o.input + ".meta")) {
            const Metadata meta = read_metadata(o.input + ".meta");
            const auto get = [&](const std::string& k) {
                const auto it = meta.find(k);
                if (it == meta.end()) throw FormatError(o.input + ".meta lacks " + k);
                return it->second;
            };
            pulse.omega = std::stod(get("config.omega"));
            pulse.n_cycles = std::stoi(get("config.n_cycles"));
            if (auto it = meta.find("config.scan.levels"); it != meta.end()) {
                levels.clear();
                std::istringstream in(it->second);
                std::string item;
                while (std::getline(in, item, ',')) levels.push_back(std::stod(item));
            }
        } else {
            throw ConfigError("delay needs --config or a " + o.input + ".meta sidecar");
        }
        if (!o.levels.empty()) levels = o.levels;
        for (double l : levels)
            if (!(l > 0.0 && l < 1.0)) throw ConfigError("levels must lie in (0, 1)");
        if (out.empty()) out = ".";
        fs::create_directories(out);

        const DelayReport rep = delay_report(scan, levels, pulse);
        const auto csv = out / "delay.csv";
        write_delay_csv(path_str(csv), rep, scan.fingerprint);
        Metadata meta;
        meta["config_fingerprint"] = scan.fingerprint;
        meta["input"] = fs::path(o.input).filename().string();
        meta["field_peak_au"] = format_number(rep.field_peak);
        meta["tau_step_au"] = format_number(rep.tau_step);
        int errors = 0;
        for (const auto& e : rep.entries) {
            if (e.ok()) continue;
            ++errors;
            meta["error." + format_number(e.e0) + "." + format_number(e.level)] = e.error;
            log << "E0 = " << format_number(e.e0) << ", level " << format_number(e.level) << ": "
                << e.error << '\n';
        }
        meta["errors"] = std::to_string(errors);
        write_metadata(path_str(csv) + ".meta", meta);
        return kExitOk;
    });
}

int cmd_converge(const CommandOptions& o, std::ostream& log) {
    return guarded(log, [&] {
        const auto ctx = open_context(o);
        const RunConfig& cfg = ctx.cfg;
        static const std::vector<std::string> known = {"dr", "dt", "Lmax", "Lb", "eps", "alpha"};
        if (std::find(known.begin(), known.end(), o.parameter) == known.end())
            throw ConfigError("unknown convergence parameter '" + o.parameter + "'");
        if (o.values.size() < 2) throw ConfigError("converge needs at least two values");
        std::vector<double> values;
        for (const auto& v : o.values)
            values.push_back(parse_quantity(v, cfg.pulse.period(), cfg.pulse.duration()));
        bool up = true, down = true;
        for (size_t i = 1; i < values.size(); ++i) {
            up = up && values[i] > values[i - 1];
            down = down && values[i] < values[i - 1];
        }
        if (!up && !down) throw ConfigError("converge values must be strictly monotone");

        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::vector<double> obs(values.size(), nan);
        std::vector<std::string> errors(values.size());
        const PulseSpec pulse = cfg.fundamental();
        const bool kick_study = o.parameter == "eps" || o.parameter == "alpha";
        const auto integer_value = [](double v) {
            if (v != std::round(v)) throw ConfigError("integer value expected");
            return static_cast<int>(v);
        };

        if (o.parameter == "Lb") {
            RunConfig c = cfg;
            int top = 0;
            for (double v : values) top = std::max(top, integer_value(v));
            c.l_b = top;
            if (top > c.plan.l_max) throw ConfigError("Lb exceeds propagation.l_max");
            const KickLab lab(make_setup(c));
            try {
                const auto r = lab.run(pulse);
                for (size_t i = 0; i < values.size(); ++i)
                    obs[i] = ionization_probability(
                        r.propagation.psi, lab.projector().truncated(integer_value(values[i])));
            } catch (const PropagationUnstable& e) {
                for (auto& err : errors) err = e.what();
            }
        } else if (kick_study) {
            const KickLab lab(make_setup(cfg));
            const double peak = field_peak_time(pulse);
            std::vector<SignalKick> kicks;
            for (double v : values) {
                SignalKick k{peak, cfg.scan.alpha, cfg.scan.epsilon};
                (o.parameter == "eps" ? k.epsilon : k.alpha) = v;
                kicks.push_back(k);
            }
            try {
                const Checkpoints cp = lab.checkpoint(pulse, kicks);
                for (size_t i = 0; i < kicks.size(); ++i) {
                    try {
                        obs[i] = lab.delta_p(cp, kicks[i]).delta_p;
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                }
            } catch (const PropagationUnstable& e) {
                for (auto& err : errors) err = e.what();
            }
        } else {
            for (size_t i = 0; i < values.size(); ++i) {
                RunConfig c = cfg;
                if (o.parameter == "dr") c.dr = values[i];
                if (o.parameter == "dt") c.plan.dt = values[i];
                if (o.parameter == "Lmax") c.plan.l_max = integer_value(values[i]);
                try {
                    const KickLab lab(make_setup(c));
                    obs[i] = lab.run(pulse).probability;
                } catch (const PropagationUnstable& e) {
                    errors[i] = e.what();
                } catch (const std::invalid_argument& e) {
                    errors[i] = e.what();
                }
            }
        }

        std::string text = "# config_fingerprint=" + cfg.fingerprint() + "\n";
        text += "value,observable,relative_change\n";
        double prev = nan;
        int ok = 0;
        for (size_t i = 0; i < values.size(); ++i) {
            if (!errors[i].empty()) {
                log << "value " << o.values[i] << " failed: " << errors[i] << '\n';
                continue;
            }
            ++ok;
            const double rel = std::isnan(prev) ? 0.0 : (obs[i] - prev) / std::abs(prev);
            text += format_number(values[i]) + ',' + format_number(obs[i]) + ',' +
                    format_number(rel) + '\n';
            prev = obs[i];
        }
        const auto csv = ctx.out / "converge.csv";
        write_file(path_str(csv), text);
        Metadata meta = config_metadata(cfg);
        meta["parameter"] = o.parameter;
        meta["observable"] = kick_study ? "deltaP at field peak" : "P";
        for (size_t i = 0; i < values.size(); ++i)
            if (!errors[i].empty()) meta["error." + std::to_string(i)] = errors[i];
        write_metadata(path_str(csv) + ".meta", meta);
        return ok > 0 ? kExitOk : kExitUnstable;
    });
}

}  // namespace sfi
