#include "sfi/propagator.hpp"

#include <Eigen/SVD>
#include <xmmintrin.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace sfi {

namespace {

constexpr double kUnstableDrift = 1e-6;
constexpr double kReflectionLimit = 1e-6;
constexpr int kPhaseChunk = 32;
constexpr int kSentinelEvery = 100;
constexpr int kRowBlock = 8;
constexpr int kMaxBlockRows = 64;

int padded(int rows) { return (rows + kRowBlock - 1) / kRowBlock * kRowBlock; }

// High channels start out with amplitudes far below DBL_MIN; subnormal
// arithmetic there is slow and contributes nothing.
class FlushDenormals {
public:
    FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
    ~FlushDenormals() { _mm_setcsr(saved_); }
    FlushDenormals(const FlushDenormals&) = delete;
    FlushDenormals& operator=(const FlushDenormals&) = delete;

private:
    unsigned saved_;
};

}  // namespace

PropagationUnstable::PropagationUnstable(double d)
    : std::runtime_error("propagation unstable (norm drift " + std::to_string(d) + ")"),
      drift(d) {}

double PropagationPlan::fine_step_bound(const PulseSpec& p) const {
    if (!p.signal) return dt;
    return dt_fine > 0.0 ? dt_fine : p.signal->epsilon / 10.0;
}

void PropagationPlan::validate(const PulseSpec& p) const {
    if (!(dt > 0.0)) throw std::invalid_argument("propagation.dt must be > 0");
    if (l_max < 1) throw std::invalid_argument("propagation.l_max must be >= 1");
    if (dt_fine < 0.0) throw std::invalid_argument("propagation.dt_fine must be >= 0");
    if (p.signal && fine_step_bound(p) > p.signal->epsilon / 10.0 * (1.0 + 1e-12))
        throw std::invalid_argument("propagation.dt_fine must not exceed epsilon/10");
}

StepSchedule StepSchedule::make(const PulseSpec& p, const PropagationPlan& plan) {
    StepSchedule s;
    const double t1 = p.duration();
    s.n_steps = std::max(1, static_cast<int>(std::ceil(t1 / plan.dt - 1e-9)));
    s.dt = t1 / s.n_steps;
    s.window_first = s.n_steps;
    if (p.signal) {
        const double begin = std::max(0.0, p.signal->window_begin());
        const double end = std::min(t1, p.signal->window_end());
        s.window_first = std::clamp(static_cast<int>(std::floor(begin / s.dt)), 0, s.n_steps - 1);
        s.window_last = std::clamp(static_cast<int>(std::ceil(end / s.dt)) - 1, s.window_first,
                                   s.n_steps - 1);
        const double bound = plan.fine_step_bound(p);
        s.substeps = std::max(1, static_cast<int>(std::ceil(s.dt / bound - 1e-12)));
    }
    return s;
}

struct Propagator::CayleyFactors {
    double s = 0.0;                  // M = 1 + i h H / 4 has off-diagonal i*s
    std::vector<double> g_re, g_im;  // 1/w_k of the elimination, (row, k) at k*rows + row
};

// Rows index channels (see row_of_l_); column k holds the real parts at r_k,
// column n + k the imaginary parts.
struct Propagator::Workspace {
    Eigen::MatrixXd w;
    Eigen::MatrixXd d;  // Thomas scratch
};

Propagator::Propagator(const RadialGrid& grid, const Potential& pot, int l_max)
    : grid_(grid), pot_(pot), l_max_(l_max) {
    if (l_max < 1) throw std::invalid_argument("l_max must be >= 1");
    const int channels = l_max + 1;
    const int n_even = (channels + 1) / 2;
    const int n_odd = channels / 2;
    even_rows_ = padded(n_even);
    odd_rows_ = padded(n_odd);
    if (even_rows_ > kMaxBlockRows) throw std::invalid_argument("l_max too large");
    const int rows = even_rows_ + odd_rows_;
    row_of_l_.resize(channels);
    l_of_row_.assign(rows, -1);
    for (int l = 0; l < channels; ++l) {
        row_of_l_[l] = l % 2 == 0 ? l / 2 : even_rows_ + l / 2;
        l_of_row_[row_of_l_[l]] = l;
    }

    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n_even, n_odd);
    for (int l = 0; l < l_max_; ++l) {
        const double c = (l + 1.0) / std::sqrt((2.0 * l + 1.0) * (2.0 * l + 3.0));
        if (l % 2 == 0) block(l / 2, l / 2) = c;
        else block((l + 1) / 2, l / 2) = c;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(even_rows_, even_rows_);
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(odd_rows_, odd_rows_);
    u.topLeftCorner(n_even, n_even) = svd.matrixU();
    v.topLeftCorner(n_odd, n_odd) = svd.matrixV();
    const Eigen::VectorXd& sv = svd.singularValues();
    sigma_.assign(odd_rows_, 0.0);
    for (Eigen::Index i = 0; i < sv.size(); ++i) sigma_[i] = sv[i];
    // fwd[l * dim + j] = U(l, j), used as a_j = sum_l U(l, j) x_l; bwd is U column-major.
    const Eigen::MatrixXd ut = u.transpose();
    const Eigen::MatrixXd vt = v.transpose();
    u_fwd_.assign(ut.data(), ut.data() + ut.size());
    v_fwd_.assign(vt.data(), vt.data() + vt.size());
    u_bwd_.assign(u.data(), u.data() + u.size());
    v_bwd_.assign(v.data(), v.data() + v.size());

    // Eigenvalues of the full coupling matrix are +-sigma_j, plus 0 when even l outnumber odd.
    lambda_.setZero(channels);
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        lambda_[2 * i] = -sv[i];
        lambda_[2 * i + 1] = sv[i];
    }
    std::sort(lambda_.begin(), lambda_.end());

    const int n = grid_.size();
    const auto h0 = radial_hamiltonian(grid_, pot_, 0);
    off_ = h0.off_diagonal;
    kinetic_potential_ = h0.diagonal;
    inv_two_r2_.resize(n);
    for (int k = 0; k < n; ++k) inv_two_r2_[k] = 0.5 / (grid_.r(k) * grid_.r(k));
}

Propagator::~Propagator() = default;

const Propagator::CayleyFactors& Propagator::factors(double h) const {
    std::lock_guard lock(cache_mutex_);
    auto& slot = factor_cache_[h];
    if (slot) return *slot;
    auto f = std::make_unique<CayleyFactors>();
    const int n = grid_.size();
    const int rows = even_rows_ + odd_rows_;
    f->g_re.resize(static_cast<size_t>(rows) * n);
    f->g_im.resize(static_cast<size_t>(rows) * n);
    const double tau = 0.25 * h;
    f->s = tau * off_;
    const double s2 = f->s * f->s;  // -(i s)^2
    for (int row = 0; row < rows; ++row) {
        const int l = std::max(l_of_row_[row], 0);
        std::complex<double> w_prev;
        for (int k = 0; k < n; ++k) {
            const double diag = kinetic_potential_[k] + l * (l + 1) * inv_two_r2_[k];
            std::complex<double> w(1.0, tau * diag);
            if (k > 0) w += s2 / w_prev;
            const std::complex<double> g = 1.0 / w;
            const size_t i = static_cast<size_t>(k) * rows + row;
            f->g_re[i] = g.real();
            f->g_im[i] = g.imag();
            w_prev = w;
        }
    }
    slot = std::move(f);
    return *slot;
}

// b <- (1 - i h H/4)(1 + i h H/4)^{-1} b = 2 M^{-1} b - b for every channel.
void Propagator::half_free(Workspace& ws, const CayleyFactors& f) const {
    const int n = grid_.size();
    const int rows = even_rows_ + odd_rows_;
    const size_t half = static_cast<size_t>(n) * rows;
    const double s = f.s;
    double* __restrict wre = ws.w.data();
    double* __restrict wim = ws.w.data() + half;
    double* __restrict dre = ws.d.data();
    double* __restrict dim = ws.d.data() + half;
    const double* __restrict gre = f.g_re.data();
    const double* __restrict gim = f.g_im.data();

    for (int q = 0; q < rows; ++q) {
        dre[q] = wre[q] * gre[q] - wim[q] * gim[q];
        dim[q] = wre[q] * gim[q] + wim[q] * gre[q];
    }
    // d_k = (b_k - i s d_{k-1}) g_k
    for (int k = 1; k < n; ++k) {
        const size_t o = static_cast<size_t>(k) * rows;
        const size_t p = o - rows;
        for (int q = 0; q < rows; ++q) {
            const double ur = wre[o + q] + s * dim[p + q];
            const double ui = wim[o + q] - s * dre[p + q];
            dre[o + q] = ur * gre[o + q] - ui * gim[o + q];
            dim[o + q] = ur * gim[o + q] + ui * gre[o + q];
        }
    }
    {
        const size_t o = static_cast<size_t>(n - 1) * rows;
        for (int q = 0; q < rows; ++q) {
            wre[o + q] = 2.0 * dre[o + q] - wre[o + q];
            wim[o + q] = 2.0 * dim[o + q] - wim[o + q];
        }
    }
    // x_k = d_k - c_k x_{k+1}, c_k = i s g_k
    for (int k = n - 2; k >= 0; --k) {
        const size_t o = static_cast<size_t>(k) * rows;
        const size_t p = o + rows;
        for (int q = 0; q < rows; ++q) {
            const double cr = -s * gim[o + q];
            const double ci = s * gre[o + q];
            const double xr = dre[o + q] - (cr * dre[p + q] - ci * dim[p + q]);
            const double xi = dim[o + q] - (cr * dim[p + q] + ci * dre[p + q]);
            dre[o + q] = xr;
            dim[o + q] = xi;
            wre[o + q] = 2.0 * xr - wre[o + q];
            wim[o + q] = 2.0 * xi - wim[o + q];
        }
    }
}

namespace {

struct CouplingData {
    const double* u_fwd;
    const double* u_bwd;
    const double* v_fwd;
    const double* v_bwd;
    const double* sigma;
};

// exp(-i phi r_k C) at every radial point, phi = E h. In the singular basis of
// the even/odd block each pair (a_j, b_j) rotates by theta_j = sigma_j r_k phi:
// a' = cos a - i sin b, b' = -i sin a + cos b. Unpaired even components are
// left unchanged.
template <int NE, int NO>
void coupling_kernel(double* __restrict wre, double* __restrict wim, const RadialGrid& grid,
                     const CouplingData& cd, double phi) {
    static_assert(NO <= NE);
    constexpr int rows = NE + NO;
    constexpr int P = kPhaseChunk;
    using Even = Eigen::Matrix<double, NE, NE>;
    using Odd = Eigen::Matrix<double, NO, NO>;
    using Strided = Eigen::OuterStride<rows>;
    const Eigen::Map<const Even> u_t(cd.u_fwd);  // U^T
    const Eigen::Map<const Even> u(cd.u_bwd);
    const Eigen::Map<const Odd> v_t(cd.v_fwd);
    const Eigen::Map<const Odd> v(cd.v_bwd);
    const int n = grid.size();
    const double dr = grid.step();
    Eigen::Matrix<double, NE, P> ar, ai;
    Eigen::Matrix<double, NO, P> br, bi, c, s;
    for (int k0 = 0; k0 < n; k0 += P) {
        const int m = std::min(P, n - k0);
        // Phases on this chunk: exact at the first point, recurrence after.
        for (int j = 0; j < NO; ++j) {
            const double step_c = std::cos(cd.sigma[j] * dr * phi);
            const double step_s = std::sin(cd.sigma[j] * dr * phi);
            double zc = std::cos(cd.sigma[j] * grid.r(k0) * phi);
            double zs = std::sin(cd.sigma[j] * grid.r(k0) * phi);
            for (int q = 0; q < P; ++q) {
                c(j, q) = zc;
                s(j, q) = zs;
                const double nz = zc * step_c - zs * step_s;
                zs = zs * step_c + zc * step_s;
                zc = nz;
            }
        }
        double* xr = wre + static_cast<size_t>(k0) * rows;
        double* xi = wim + static_cast<size_t>(k0) * rows;
        if (m == P) {
            Eigen::Map<Eigen::Matrix<double, NE, P>, 0, Strided> er(xr), ei(xi);
            Eigen::Map<Eigen::Matrix<double, NO, P>, 0, Strided> odr(xr + NE), odi(xi + NE);
            ar.noalias() = u_t * er;
            ai.noalias() = u_t * ei;
            br.noalias() = v_t * odr;
            bi.noalias() = v_t * odi;
            auto ar_top = ar.template topRows<NO>();
            auto ai_top = ai.template topRows<NO>();
            const Eigen::Matrix<double, NO, P> a_r = ar_top, a_i = ai_top;
            ar_top = c.cwiseProduct(a_r) + s.cwiseProduct(bi);
            ai_top = c.cwiseProduct(a_i) - s.cwiseProduct(br);
            const Eigen::Matrix<double, NO, P> b_r = br;
            br = c.cwiseProduct(b_r) + s.cwiseProduct(a_i);
            bi = c.cwiseProduct(bi) - s.cwiseProduct(a_r);
            er.noalias() = u * ar;
            ei.noalias() = u * ai;
            odr.noalias() = v * br;
            odi.noalias() = v * bi;
        } else {
            Eigen::Map<Eigen::Matrix<double, NE, Eigen::Dynamic>, 0, Strided> er(xr, NE, m),
                ei(xi, NE, m);
            Eigen::Map<Eigen::Matrix<double, NO, Eigen::Dynamic>, 0, Strided> odr(xr + NE, NO, m),
                odi(xi + NE, NO, m);
            Eigen::Matrix<double, NE, Eigen::Dynamic> xa_r = u_t * er, xa_i = u_t * ei;
            Eigen::Matrix<double, NO, Eigen::Dynamic> xb_r = v_t * odr, xb_i = v_t * odi;
            const auto cc = c.leftCols(m);
            const auto ss = s.leftCols(m);
            const Eigen::Matrix<double, NO, Eigen::Dynamic> a_r = xa_r.template topRows<NO>();
            const Eigen::Matrix<double, NO, Eigen::Dynamic> a_i = xa_i.template topRows<NO>();
            xa_r.template topRows<NO>() = cc.cwiseProduct(a_r) + ss.cwiseProduct(xb_i);
            xa_i.template topRows<NO>() = cc.cwiseProduct(a_i) - ss.cwiseProduct(xb_r);
            const Eigen::Matrix<double, NO, Eigen::Dynamic> b_r = xb_r;
            xb_r = cc.cwiseProduct(b_r) + ss.cwiseProduct(a_i);
            xb_i = cc.cwiseProduct(xb_i) - ss.cwiseProduct(a_r);
            er.noalias() = u * xa_r;
            ei.noalias() = u * xa_i;
            odr.noalias() = v * xb_r;
            odi.noalias() = v * xb_i;
        }
    }
}

using CouplingKernel = void (*)(double*, double*, const RadialGrid&, const CouplingData&, double);

template <int N>
CouplingKernel pick_kernel(int even_rows, int odd_rows) {
    if constexpr (N > kMaxBlockRows) {
        return nullptr;
    } else {
        if (odd_rows == N && even_rows == N) return &coupling_kernel<N, N>;
        if constexpr (N + kRowBlock <= kMaxBlockRows) {
            if (odd_rows == N && even_rows == N + kRowBlock)
                return &coupling_kernel<N + kRowBlock, N>;
        }
        return pick_kernel<N + kRowBlock>(even_rows, odd_rows);
    }
}

}  // namespace

void Propagator::interaction(Workspace& ws, double field, double h) const {
    if (field == 0.0) return;
    const CouplingKernel kernel = pick_kernel<kRowBlock>(even_rows_, odd_rows_);
    if (!kernel) throw std::logic_error("no coupling kernel for this l_max");
    const size_t half = static_cast<size_t>(grid_.size()) * (even_rows_ + odd_rows_);
    const CouplingData cd{u_fwd_.data(), u_bwd_.data(), v_fwd_.data(), v_bwd_.data(),
                          sigma_.data()};
    kernel(ws.w.data(), ws.w.data() + half, grid_, cd, field * h);
}

void Propagator::full_step(Workspace& ws, double h, double field) const {
    const auto& f = factors(h);
    half_free(ws, f);
    interaction(ws, field, h);
    half_free(ws, f);
}

void Propagator::load(Workspace& ws, const WaveFunction& psi) const {
    if (!(psi.grid() == grid_) || psi.l_max() != l_max_)
        throw std::invalid_argument("grid mismatch");
    const int n = grid_.size();
    const int rows = even_rows_ + odd_rows_;
    ws.w = Eigen::MatrixXd::Zero(rows, 2 * n);
    ws.d.resize(rows, 2 * n);
    const auto& c = psi.coeffs();
    for (int l = 0; l <= l_max_; ++l) {
        const int row = row_of_l_[l];
        for (int k = 0; k < n; ++k) {
            ws.w(row, k) = c(k, l).real();
            ws.w(row, n + k) = c(k, l).imag();
        }
    }
}

WaveFunction Propagator::store(const Workspace& ws) const {
    WaveFunction psi(grid_, l_max_);
    const int n = grid_.size();
    auto& c = psi.coeffs();
    for (int l = 0; l <= l_max_; ++l) {
        const int row = row_of_l_[l];
        for (int k = 0; k < n; ++k) c(k, l) = {ws.w(row, k), ws.w(row, n + k)};
    }
    return psi;
}

double Propagator::outer_population(const Workspace& ws) const {
    const int n = grid_.size();
    const int k0 = static_cast<int>(0.9 * n);
    return grid_.step() *
           (ws.w.middleCols(k0, n - k0).squaredNorm() + ws.w.rightCols(n - k0).squaredNorm());
}

WaveFunction Propagator::step(const WaveFunction& psi, double dt, double field) const {
    const FlushDenormals ftz;
    Workspace ws;
    load(ws, psi);
    full_step(ws, dt, field);
    return store(ws);
}

PropagationResult Propagator::propagate(const WaveFunction& psi0, const PulseSpec& p,
                                        const PropagationPlan& plan,
                                        const std::vector<int>& snapshot_steps,
                                        std::vector<WaveFunction>* snapshots,
                                        const DiagnosticObserver& observer) const {
    return run(psi0, 0, p, plan, snapshot_steps, snapshots, observer);
}

PropagationResult Propagator::resume(const WaveFunction& psi, int first_step, const PulseSpec& p,
                                     const PropagationPlan& plan,
                                     const DiagnosticObserver& observer) const {
    return run(psi, first_step, p, plan, {}, nullptr, observer);
}

PropagationResult Propagator::run(const WaveFunction& psi, int first_step, const PulseSpec& p,
                                  const PropagationPlan& plan,
                                  const std::vector<int>& snapshot_steps,
                                  std::vector<WaveFunction>* snapshots,
                                  const DiagnosticObserver& observer) const {
    p.validate();
    plan.validate(p);
    if (plan.l_max != l_max_) throw std::invalid_argument("plan l_max differs from propagator");
    const auto schedule = StepSchedule::make(p, plan);
    if (first_step < 0 || first_step > schedule.n_steps)
        throw std::invalid_argument("resume step outside the schedule");
    const FlushDenormals ftz;

    Workspace ws;
    load(ws, psi);
    const double dr = grid_.step();
    PropagationResult result{psi};
    result.initial_norm = std::sqrt(dr * ws.w.squaredNorm());
    if (snapshots) snapshots->assign(snapshot_steps.size(), WaveFunction(grid_, l_max_));
    const auto take_snapshots = [&](int step) {
        if (!snapshots) return;
        for (size_t i = 0; i < snapshot_steps.size(); ++i)
            if (snapshot_steps[i] == step) (*snapshots)[i] = store(ws);
    };
    const bool sampling = observer && plan.diagnostics_every > 0;

    for (int step = first_step; step < schedule.n_steps; ++step) {
        take_snapshots(step);
        if (sampling && step % plan.diagnostics_every == 0) observer(step * schedule.dt, store(ws));
        const int m = schedule.substeps_at(step);
        const double h = schedule.dt / m;
        const double t0 = step * schedule.dt;
        for (int j = 0; j < m; ++j) full_step(ws, h, total_field(t0 + (j + 0.5) * h, p));
        if ((step + 1) % kSentinelEvery == 0)
            result.outer_population = std::max(result.outer_population, outer_population(ws));
    }
    take_snapshots(schedule.n_steps);
    result.outer_population = std::max(result.outer_population, outer_population(ws));
    result.steps_taken = schedule.n_steps - first_step;
    result.norm = std::sqrt(dr * ws.w.squaredNorm());
    result.reflection_flag = result.outer_population > kReflectionLimit;
    result.psi = store(ws);
    if (sampling) observer(p.duration(), result.psi);
    const double drift = std::abs(result.norm - result.initial_norm);
    if (!(drift <= kUnstableDrift)) throw PropagationUnstable(drift);
    return result;
}

}  // namespace sfi
