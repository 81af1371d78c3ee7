#pragma once

#include "sfi/atom.hpp"
#include "sfi/fields.hpp"
#include "sfi/propagator.hpp"
#include "sfi/scan_result.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace sfi {

/// Numerical parameters shared by every run of a study.
struct RunSetup {
    RadialGrid grid = RadialGrid::with_extent(0.05, 700.0);
    Potential potential = Potential::coulomb();
    PropagationPlan plan;
    int l_b = 12;
    int n_max = 15;
};

struct RunOutcome {
    double probability = 0.0;
    PropagationResult propagation;
};

/// Baseline run of one fundamental pulse with states kept at the start of
/// every kick window it will be asked about.
struct Checkpoints {
    PulseSpec pulse;
    RunOutcome baseline;
    std::vector<int> steps;
    std::vector<WaveFunction> states;
};

struct KickOutcome {
    double delta_p = 0.0;
    double baseline = 0.0;
    double kicked = 0.0;
    bool reflection_flag = false;
};

/// Immutable setup (grid, propagator factors, projector, ground state) plus a
/// cache of baseline probabilities. Safe to share between scan workers.
class KickLab {
public:
    explicit KickLab(const RunSetup& setup);

    const RunSetup& setup() const { return setup_; }
    const Propagator& propagator() const { return *propagator_; }
    const BoundProjector& projector() const { return projector_; }
    const WaveFunction& initial_state() const { return initial_; }
    double ground_energy() const { return ground_energy_; }

    /// One propagate + ionization_probability evaluation.
    RunOutcome run(const PulseSpec& p, const DiagnosticObserver& observer = {}) const;

    /// P[E_f] for the fundamental pulse of `p`, computed once per pulse.
    double baseline(const PulseSpec& p) const;

    /// P[E_f + dE] - P[E_f] with both terms from full runs; alpha = 0 runs the
    /// unkicked pipeline a second time.
    KickOutcome delta_p(const PulseSpec& kicked) const;

    Checkpoints checkpoint(const PulseSpec& p, const std::vector<SignalKick>& kicks) const;
    /// delta P for `kick` resumed from the matching checkpoint; bitwise equal to
    /// delta_p(), since the kicked field is identical to the baseline before
    /// the kick window.
    KickOutcome delta_p(const Checkpoints& c, const SignalKick& kick) const;

private:
    RunSetup setup_;
    std::unique_ptr<Propagator> propagator_;
    BoundProjector projector_;
    WaveFunction initial_;
    double ground_energy_ = 0.0;

    mutable std::map<std::tuple<double, double, int>, double> baseline_cache_;
    mutable std::mutex cache_mutex_;
};

/// delta P / (alpha sqrt(pi)).
double functional_derivative_estimate(double delta_p, double alpha);

struct ScanOptions {
    int workers = 1;
    std::string journal_path;  ///< empty: no journal
    bool resume = false;
    int max_new_cells = -1;    ///< stop after this many newly computed cells (testing)
    std::string fingerprint;
};

class ScanJournalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScanRun {
    ScanResult result;
    bool interrupted = false;
    int reused_cells = 0;
    int computed_cells = 0;
};

/// Fills the delta P table for kicks (tau_j, alpha, epsilon) on pulses with
/// peak field e0_i. Cell errors are recorded, never thrown.
ScanRun scan(const KickLab& lab, const PulseSpec& base, const std::vector<double>& e0,
             const std::vector<double>& tau, double alpha, double epsilon,
             const ScanOptions& options = {});

/// Leftmost and rightmost linear-interpolated crossings of `level` by the row
/// restricted to [window_lo, window_hi].
std::pair<double, double> contour_crossings(const std::vector<double>& tau,
                                            const std::vector<double>& row, double level,
                                            double window_lo, double window_hi);

struct DelayEntry {
    double e0 = 0.0;
    double level = 0.0;  ///< relative level; 1 marks the refined row peak
    double tau_mid = 0.0;
    double delay = 0.0;  ///< tau_mid - field peak time, a.u.
    double tau_step = 0.0;
    std::string error;   ///< non-empty if this row/level could not be analysed

    bool ok() const { return error.empty(); }
    double delay_as() const { return delay * kAttosecondsPerAu; }
};

struct DelayReport {
    double field_peak = 0.0;
    double tau_step = 0.0;
    std::vector<DelayEntry> entries;
};

/// Per row: peak (3-point parabola) and contour midpoints at level * peak,
/// inside field_peak +- T/4. Rows dominated by negative values are analysed
/// after a sign flip.
DelayReport delay_report(const ScanResult& scan, const std::vector<double>& levels,
                         const PulseSpec& p);

/// Composite Simpson rule for the integral of W(E_f(t)) over [0, T1].
double instantaneous_probability(const std::function<double(double)>& rate, const PulseSpec& p,
                                 int n_quad);

}  // namespace sfi
