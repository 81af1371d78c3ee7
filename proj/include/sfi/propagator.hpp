#pragma once

#include "sfi/atom.hpp"
#include "sfi/fields.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sfi {

struct PropagationPlan {
    double dt = 0.02;
    /// Upper bound on the step inside the kick window; 0 selects epsilon / 10.
    double dt_fine = 0.0;
    int l_max = 70;
    /// Emit a diagnostic sample every this many base steps (0 disables).
    int diagnostics_every = 0;

    void validate(const PulseSpec& p) const;
    double fine_step_bound(const PulseSpec& p) const;
};

class PropagationUnstable : public std::runtime_error {
public:
    explicit PropagationUnstable(double drift);
    double drift;
};

/// Time grid of a run: base steps of size T1/n_steps, the ones overlapping the
/// kick window split into equal substeps.
struct StepSchedule {
    int n_steps = 0;
    double dt = 0.0;
    int window_first = 0;  ///< first base step touching the kick window
    int window_last = -1;  ///< last base step touching the kick window
    int substeps = 1;

    static StepSchedule make(const PulseSpec& p, const PropagationPlan& plan);
    int substeps_at(int step) const {
        return step >= window_first && step <= window_last ? substeps : 1;
    }
};

struct PropagationResult {
    WaveFunction psi;
    double norm = 0.0;
    double initial_norm = 0.0;
    /// Largest population found beyond 90% of the box during the run.
    double outer_population = 0.0;
    bool reflection_flag = false;
    int steps_taken = 0;
};

using DiagnosticObserver = std::function<void(double t, const WaveFunction&)>;

/// Length-gauge split-operator propagator on the (l, r) grid.
///
/// One step of size h applies exp(-i H0 h/2) exp(-i E z h) exp(-i H0 h/2):
/// each field-free factor is the Cayley form (1 - i h H_l / 4)/(1 + i h H_l / 4)
/// per channel, the interaction is exact in the eigenbasis of the cos(theta)
/// coupling matrix with phases exp(-i lambda_j r_k E h).
class Propagator {
public:
    Propagator(const RadialGrid& grid, const Potential& pot, int l_max);
    ~Propagator();
    Propagator(const Propagator&) = delete;
    Propagator& operator=(const Propagator&) = delete;

    const RadialGrid& grid() const { return grid_; }
    int l_max() const { return l_max_; }
    const Eigen::VectorXd& coupling_eigenvalues() const { return lambda_; }

    /// A single split-operator step with field value `field`.
    WaveFunction step(const WaveFunction& psi, double dt, double field) const;

    /// psi(T1) for the pulse; throws PropagationUnstable if | ||psi|| - ||psi0|| | > 1e-6.
    /// States at the start of the base steps listed in `snapshot_steps` are
    /// copied into `snapshots`.
    PropagationResult propagate(const WaveFunction& psi0, const PulseSpec& p,
                                const PropagationPlan& plan,
                                const std::vector<int>& snapshot_steps = {},
                                std::vector<WaveFunction>* snapshots = nullptr,
                                const DiagnosticObserver& observer = {}) const;

    /// Continue a run from the state at the start of base step `first_step`.
    PropagationResult resume(const WaveFunction& psi, int first_step, const PulseSpec& p,
                             const PropagationPlan& plan,
                             const DiagnosticObserver& observer = {}) const;

private:
    struct CayleyFactors;
    struct Workspace;

    PropagationResult run(const WaveFunction& psi, int first_step, const PulseSpec& p,
                          const PropagationPlan& plan, const std::vector<int>& snapshot_steps,
                          std::vector<WaveFunction>* snapshots,
                          const DiagnosticObserver& observer) const;
    const CayleyFactors& factors(double h) const;
    void half_free(Workspace& ws, const CayleyFactors& f) const;
    void interaction(Workspace& ws, double field, double h) const;
    void full_step(Workspace& ws, double h, double field) const;

    void load(Workspace& ws, const WaveFunction& psi) const;
    WaveFunction store(const Workspace& ws) const;
    double outer_population(const Workspace& ws) const;

    RadialGrid grid_;
    Potential pot_;
    int l_max_;
    // Storage rows: even l at row l/2, odd l at row even_rows_ + l/2; both
    // blocks zero-padded to a multiple of 8 rows.
    int even_rows_ = 0;
    int odd_rows_ = 0;
    std::vector<int> row_of_l_;
    std::vector<int> l_of_row_;  // -1 for padding rows
    // cos(theta) couples only l and l +- 1, i.e. even to odd rows through a
    // block B = U S V^T. U, V are kept padded, in both orders the kernels need.
    std::vector<double> u_fwd_, u_bwd_, v_fwd_, v_bwd_;
    std::vector<double> sigma_;  // padded to odd_rows_ entries
    Eigen::VectorXd lambda_;
    std::vector<double> kinetic_potential_;  // 1/dr^2 + V(r_k)
    std::vector<double> inv_two_r2_;         // 1 / (2 r_k^2)
    double off_ = 0.0;

    mutable std::map<double, std::unique_ptr<CayleyFactors>> factor_cache_;
    mutable std::mutex cache_mutex_;
};

}  // namespace sfi
