#include "sfi/rates.hpp"

#include "sfi/hash.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace sfi {

bool ScanResult::cell_ok(int i, int j) const { return std::isfinite(delta_p(i, j)); }

KickLab::KickLab(const RunSetup& setup)
    : setup_(setup),
      propagator_(std::make_unique<Propagator>(setup.grid, setup.potential, setup.plan.l_max)),
      projector_(BoundProjector::build(setup.grid, setup.potential, setup.l_b, setup.n_max)),
      initial_(setup.grid, setup.plan.l_max) {
    const auto ground = bound_states(setup.grid, setup.potential, 0, 1);
    if (ground.empty()) throw std::invalid_argument("potential has no bound l=0 state");
    ground_energy_ = ground.front().energy;
    initial_ = WaveFunction::from_channel(setup.grid, setup.plan.l_max, 0, ground.front().vector);
}

RunOutcome KickLab::run(const PulseSpec& p, const DiagnosticObserver& observer) const {
    PropagationResult r = propagator_->propagate(initial_, p, setup_.plan, {}, nullptr, observer);
    const double prob = ionization_probability(r.psi, projector_);
    return {prob, std::move(r)};
}

double KickLab::baseline(const PulseSpec& p) const {
    const auto key = std::make_tuple(p.peak_field, p.omega, p.n_cycles);
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = baseline_cache_.find(key); it != baseline_cache_.end()) return it->second;
    }
    const double value = run(p.without_kick()).probability;
    std::lock_guard lock(cache_mutex_);
    baseline_cache_.emplace(key, value);
    return value;
}

KickOutcome KickLab::delta_p(const PulseSpec& kicked) const {
    if (!kicked.signal) throw NoSignalError();
    KickOutcome out;
    if (kicked.signal->alpha == 0.0) {
        const auto first = run(kicked.without_kick());
        const auto second = run(kicked.without_kick());
        out.baseline = first.probability;
        out.kicked = second.probability;
        out.reflection_flag = first.propagation.reflection_flag;
    } else {
        out.baseline = baseline(kicked);
        const auto r = run(kicked);
        out.kicked = r.probability;
        out.reflection_flag = r.propagation.reflection_flag;
    }
    out.delta_p = out.kicked - out.baseline;
    return out;
}

Checkpoints KickLab::checkpoint(const PulseSpec& p, const std::vector<SignalKick>& kicks) const {
    const PulseSpec pulse = p.without_kick();
    std::set<int> unique_steps;
    for (const auto& k : kicks) {
        if (k.alpha == 0.0) continue;
        const PulseSpec kp = pulse.with_kick(k.tau, k.alpha, k.epsilon);
        kp.validate();
        unique_steps.insert(StepSchedule::make(kp, setup_.plan).window_first);
    }
    std::vector<int> steps(unique_steps.begin(), unique_steps.end());
    std::vector<WaveFunction> states;
    PropagationResult r = propagator_->propagate(initial_, pulse, setup_.plan, steps, &states);
    const double prob = ionization_probability(r.psi, projector_);
    {
        std::lock_guard lock(cache_mutex_);
        baseline_cache_.emplace(std::make_tuple(p.peak_field, p.omega, p.n_cycles), prob);
    }
    return {pulse, {prob, std::move(r)}, std::move(steps), std::move(states)};
}

KickOutcome KickLab::delta_p(const Checkpoints& c, const SignalKick& kick) const {
    KickOutcome out;
    out.baseline = c.baseline.probability;
    out.reflection_flag = c.baseline.propagation.reflection_flag;
    if (kick.alpha == 0.0) {
        out.kicked = out.baseline;
        return out;
    }
    const PulseSpec kicked = c.pulse.with_kick(kick.tau, kick.alpha, kick.epsilon);
    kicked.validate();
    const int first = StepSchedule::make(kicked, setup_.plan).window_first;
    const auto it = std::find(c.steps.begin(), c.steps.end(), first);
    PropagationResult r =
        it == c.steps.end()
            ? propagator_->propagate(initial_, kicked, setup_.plan)
            : propagator_->resume(c.states[it - c.steps.begin()], first, kicked, setup_.plan);
    out.kicked = ionization_probability(r.psi, projector_);
    out.reflection_flag = out.reflection_flag || r.reflection_flag;
    out.delta_p = out.kicked - out.baseline;
    return out;
}

double functional_derivative_estimate(double delta_p, double alpha) {
    if (alpha == 0.0) throw std::invalid_argument("alpha must be non-zero");
    return delta_p / (alpha * kSqrtPi);
}

namespace {

void require_ascending(const std::vector<double>& v, const char* name) {
    if (v.empty()) throw std::invalid_argument(std::string(name) + " list is empty");
    for (size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1]))
            throw std::invalid_argument(std::string(name) + " list must be strictly ascending");
}

template <class Job>
void run_parallel(int n_jobs, int workers, const std::atomic<bool>& stop, Job job) {
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (;;) {
            if (stop.load()) return;
            const int i = next.fetch_add(1);
            if (i >= n_jobs) return;
            job(i);
        }
    };
    const int n = std::clamp(workers, 1, std::max(n_jobs, 1));
    if (n == 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

// Journal lines: "B i e0 value crc" and "C i j e0 tau value reflected crc"; the crc
// is hex FNV-1a of everything before it.
class Journal {
public:
    static constexpr const char* kMagic = "sfi-scan-journal 1";

    Journal(const std::string& path, const std::string& fingerprint, bool resume,
            const ScanResult& shape)
        : path_(path) {
        if (path_.empty()) return;
        if (resume) load(fingerprint, shape);
        out_.open(path_, resume ? std::ios::app : std::ios::trunc);
        if (!out_) throw ScanJournalError("cannot open journal " + path_);
        if (!resume || !had_header_) append_line(std::string(kMagic) + " " + fingerprint);
    }

    std::map<int, double> baselines;
    std::map<std::pair<int, int>, std::pair<double, bool>> cells;

    void baseline(int i, double e0, double value) {
        append_line("B " + std::to_string(i) + " " + format_number(e0) + " " + format_number(value));
    }
    void cell(int i, int j, double e0, double tau, double value, bool reflected) {
        append_line("C " + std::to_string(i) + " " + std::to_string(j) + " " + format_number(e0) +
                    " " + format_number(tau) + " " + format_number(value) + " " +
                    (reflected ? "1" : "0"));
    }

private:
    void append_line(const std::string& body) {
        if (path_.empty()) return;
        std::lock_guard lock(mutex_);
        out_ << body << ' ' << hex64(fnv1a64(body)) << '\n';
        out_.flush();
    }

    void load(const std::string& fingerprint, const ScanResult& shape) {
        std::ifstream in(path_);
        if (!in) return;
        std::string line;
        while (std::getline(in, line)) {
            const auto cut = line.find_last_of(' ');
            if (cut == std::string::npos) continue;
            const std::string body = line.substr(0, cut);
            if (line.substr(cut + 1) != hex64(fnv1a64(body))) continue;  // torn write
            std::istringstream fields(body);
            std::string tag;
            fields >> tag;
            if (body.rfind(kMagic, 0) == 0) {
                std::string fp;
                fields >> fp >> fp;
                if (fp != fingerprint)
                    throw ScanJournalError("journal was written for a different configuration");
                had_header_ = true;
            } else if (tag == "B") {
                int i;
                std::string e0, value;
                fields >> i >> e0 >> value;
                if (i < 0 || i >= shape.rows() || e0 != format_number(shape.e0[i])) continue;
                baselines[i] = std::strtod(value.c_str(), nullptr);
            } else if (tag == "C") {
                int i, j;
                std::string e0, tau, value;
                int reflected = 0;
                fields >> i >> j >> e0 >> tau >> value >> reflected;
                if (i < 0 || i >= shape.rows() || j < 0 || j >= shape.cols()) continue;
                if (e0 != format_number(shape.e0[i]) || tau != format_number(shape.tau[j])) continue;
                cells[{i, j}] = {std::strtod(value.c_str(), nullptr), reflected == 1};
            }
        }
        if (!had_header_ && (!baselines.empty() || !cells.empty()))
            throw ScanJournalError("journal has no header");
    }

    std::string path_;
    std::ofstream out_;
    std::mutex mutex_;
    bool had_header_ = false;
};

}  // namespace

ScanRun scan(const KickLab& lab, const PulseSpec& base, const std::vector<double>& e0,
             const std::vector<double>& tau, double alpha, double epsilon,
             const ScanOptions& options) {
    require_ascending(e0, "E0");
    require_ascending(tau, "tau");
    ScanRun run;
    ScanResult& res = run.result;
    res.e0 = e0;
    res.tau = tau;
    res.alpha = alpha;
    res.epsilon = epsilon;
    res.fingerprint = options.fingerprint;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.delta_p = Eigen::MatrixXd::Constant(res.rows(), res.cols(), nan);
    res.baseline.assign(res.rows(), nan);

    Journal journal(options.journal_path, options.fingerprint, options.resume, res);
    std::vector<std::vector<std::string>> errors(res.rows(), std::vector<std::string>(res.cols()));
    std::vector<int> missing_rows;
    std::vector<std::pair<int, int>> missing_cells;
    std::vector<char> reflected(static_cast<size_t>(res.rows()) * res.cols(), 0);
    for (int i = 0; i < res.rows(); ++i) {
        bool row_missing = false;
        for (int j = 0; j < res.cols(); ++j) {
            if (auto it = journal.cells.find({i, j}); it != journal.cells.end()) {
                res.delta_p(i, j) = it->second.first;
                reflected[static_cast<size_t>(i) * res.cols() + j] = it->second.second;
                ++run.reused_cells;
            } else {
                missing_cells.emplace_back(i, j);
                row_missing = true;
            }
        }
        if (auto it = journal.baselines.find(i); it != journal.baselines.end())
            res.baseline[i] = it->second;
        if (row_missing) missing_rows.push_back(i);
    }

    const auto row_pulse = [&](int i) {
        PulseSpec p = base.without_kick();
        p.peak_field = e0[i];
        return p;
    };

    // Baselines with checkpoints for every row that still has open cells.
    std::vector<std::unique_ptr<Checkpoints>> checkpoints(res.rows());
    std::vector<std::string> row_error(res.rows());
    const std::atomic<bool> never{false};
    run_parallel(static_cast<int>(missing_rows.size()), options.workers, never, [&](int k) {
        const int i = missing_rows[k];
        try {
            const PulseSpec p = row_pulse(i);
            p.validate();
            std::vector<SignalKick> kicks;
            for (int j = 0; j < res.cols(); ++j) {
                if (journal.cells.count({i, j})) continue;
                // Invalid kicks fail later in their own cell.
                try {
                    p.with_kick(tau[j], alpha, epsilon).validate();
                    kicks.push_back({tau[j], alpha, epsilon});
                } catch (const std::invalid_argument&) {
                }
            }
            auto c = std::make_unique<Checkpoints>(lab.checkpoint(p, kicks));
            if (!journal.baselines.count(i)) journal.baseline(i, e0[i], c->baseline.probability);
            res.baseline[i] = c->baseline.probability;
            checkpoints[i] = std::move(c);
        } catch (const std::exception& e) {
            row_error[i] = std::string("baseline: ") + e.what();
        }
    });

    std::vector<std::atomic<int>> open_in_row(res.rows());
    for (const auto& [i, j] : missing_cells) open_in_row[i].fetch_add(1);
    std::atomic<int> computed{0};
    std::atomic<bool> stop{false};
    run_parallel(static_cast<int>(missing_cells.size()), options.workers, stop, [&](int k) {
        const auto [i, j] = missing_cells[k];
        if (!row_error[i].empty()) {
            errors[i][j] = row_error[i];
        } else {
            try {
                const KickOutcome o = lab.delta_p(*checkpoints[i], {tau[j], alpha, epsilon});
                res.delta_p(i, j) = o.delta_p;
                reflected[static_cast<size_t>(i) * res.cols() + j] = o.reflection_flag;
                journal.cell(i, j, e0[i], tau[j], o.delta_p, o.reflection_flag);
            } catch (const std::exception& e) {
                errors[i][j] = e.what();
            }
            const int done = computed.fetch_add(1) + 1;
            if (options.max_new_cells >= 0 && done >= options.max_new_cells) stop.store(true);
        }
        if (open_in_row[i].fetch_sub(1) == 1) checkpoints[i].reset();
    });
    run.computed_cells = computed.load();

    for (int i = 0; i < res.rows(); ++i)
        for (int j = 0; j < res.cols(); ++j) {
            if (!errors[i][j].empty()) res.failures.push_back({i, j, errors[i][j]});
            else if (!res.cell_ok(i, j)) run.interrupted = true;
        }
    for (int i = 0; i < res.rows(); ++i)
        for (int j = 0; j < res.cols(); ++j)
            if (reflected[static_cast<size_t>(i) * res.cols() + j])
                res.reflection_flags.push_back({i, j});
    return run;
}

std::pair<double, double> contour_crossings(const std::vector<double>& tau,
                                            const std::vector<double>& row, double level,
                                            double window_lo, double window_hi) {
    if (tau.size() != row.size()) throw std::invalid_argument("row and tau sizes differ");
    std::vector<size_t> idx;
    for (size_t j = 0; j < tau.size(); ++j)
        if (tau[j] >= window_lo && tau[j] <= window_hi) idx.push_back(j);
    if (idx.size() < 2) throw std::invalid_argument("level outside row range");
    double lo = row[idx.front()], hi = lo;
    for (size_t j : idx) {
        lo = std::min(lo, row[j]);
        hi = std::max(hi, row[j]);
    }
    if (!(level >= lo && level <= hi)) throw std::invalid_argument("level outside row range");
    std::vector<double> crossings;
    for (size_t q = 0; q + 1 < idx.size(); ++q) {
        const size_t a = idx[q], b = idx[q + 1];
        const bool above_a = row[a] >= level, above_b = row[b] >= level;
        if (above_a == above_b) continue;
        crossings.push_back(tau[a] + (level - row[a]) / (row[b] - row[a]) * (tau[b] - tau[a]));
    }
    if (crossings.size() < 2) throw std::invalid_argument("level outside row range");
    if (crossings.size() > 2) throw std::invalid_argument("non-monotone flanks");
    return {crossings.front(), crossings.back()};
}

DelayReport delay_report(const ScanResult& scan, const std::vector<double>& levels,
                         const PulseSpec& p) {
    if (scan.cols() < 3) throw std::invalid_argument("delay analysis needs at least 3 tau values");
    DelayReport rep;
    rep.field_peak = field_peak_time(p);
    for (int j = 1; j < scan.cols(); ++j)
        rep.tau_step = std::max(rep.tau_step, scan.tau[j] - scan.tau[j - 1]);
    const double lo = rep.field_peak - p.period() / 4.0;
    const double hi = rep.field_peak + p.period() / 4.0;

    for (int i = 0; i < scan.rows(); ++i) {
        const auto entry = [&](double level) {
            DelayEntry e;
            e.e0 = scan.e0[i];
            e.level = level;
            e.tau_step = rep.tau_step;
            return e;
        };
        const auto fail_row = [&](const std::string& why) {
            auto e = entry(1.0);
            e.error = why;
            rep.entries.push_back(e);
            for (double level : levels) {
                auto f = entry(level);
                f.error = why;
                rep.entries.push_back(f);
            }
        };
        std::vector<double> row(scan.cols());
        std::vector<double> t_in;
        std::vector<double> row_in;
        bool complete = true;
        for (int j = 0; j < scan.cols(); ++j) {
            row[j] = scan.delta_p(i, j);
            complete = complete && std::isfinite(row[j]);
        }
        if (!complete) {
            fail_row("row has failed cells");
            continue;
        }
        double extreme = 0.0;
        for (int j = 0; j < scan.cols(); ++j)
            if (scan.tau[j] >= lo && scan.tau[j] <= hi && std::abs(row[j]) > std::abs(extreme))
                extreme = row[j];
        if (extreme == 0.0) {
            fail_row("row vanishes in the analysis window");
            continue;
        }
        const double sign = extreme > 0.0 ? 1.0 : -1.0;
        int best = -1;
        for (int j = 0; j < scan.cols(); ++j) {
            row[j] *= sign;
            if (scan.tau[j] >= lo && scan.tau[j] <= hi && (best < 0 || row[j] > row[best])) best = j;
        }

        auto peak = entry(1.0);
        double peak_value = row[best];
        if (best == 0 || best == scan.cols() - 1 || scan.tau[best - 1] < lo ||
            scan.tau[best + 1] > hi) {
            peak.error = "peak on the window edge";
        } else {
            // Vertex of the parabola through the three samples around the maximum.
            const double x0 = scan.tau[best - 1], x1 = scan.tau[best], x2 = scan.tau[best + 1];
            const double y0 = row[best - 1], y1 = row[best], y2 = row[best + 1];
            const double d01 = (y1 - y0) / (x1 - x0);
            const double d12 = (y2 - y1) / (x2 - x1);
            const double curv = (d12 - d01) / (x2 - x0);
            if (curv < 0.0) {
                const double slope = d01 - curv * (x0 + x1);
                const double xv = -slope / (2.0 * curv);
                peak.tau_mid = xv;
                peak_value = y1 + (xv - x1) * (d01 + curv * (xv - x0));
            } else {
                peak.tau_mid = x1;
            }
            peak.delay = peak.tau_mid - rep.field_peak;
        }
        rep.entries.push_back(peak);

        for (double level : levels) {
            auto e = entry(level);
            try {
                const auto [l, r] = contour_crossings(scan.tau, row, level * peak_value, lo, hi);
                e.tau_mid = 0.5 * (l + r);
                e.delay = e.tau_mid - rep.field_peak;
            } catch (const std::exception& ex) {
                e.error = ex.what();
            }
            rep.entries.push_back(e);
        }
    }
    return rep;
}

double instantaneous_probability(const std::function<double(double)>& rate, const PulseSpec& p,
                                 int n_quad) {
    if (n_quad < 100) throw std::invalid_argument("n_quad must be >= 100");
    const int n = n_quad + n_quad % 2;
    const double t1 = p.duration();
    const double h = t1 / n;
    const auto w = [&](int k) { return rate(fundamental_field(k * h, p)); };
    double sum = w(0) + w(n);
    for (int k = 1; k < n; ++k) sum += (k % 2 == 1 ? 4.0 : 2.0) * w(k);
    return sum * h / 3.0;
}

}  // namespace sfi
