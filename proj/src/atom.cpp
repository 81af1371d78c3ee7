#include "sfi/atom.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace sfi {

RadialGrid::RadialGrid(double step, int n_points) : step_(step), n_(n_points) {
    if (!(step > 0.0)) throw std::invalid_argument("radial grid step must be > 0");
    if (n_points < 10) throw std::invalid_argument("radial grid needs at least 10 points");
}

RadialGrid RadialGrid::with_extent(double step, double r_max) {
    if (!(step > 0.0)) throw std::invalid_argument("radial grid step must be > 0");
    return RadialGrid(step, static_cast<int>(std::lround(r_max / step)));
}

Eigen::VectorXd RadialGrid::points() const {
    Eigen::VectorXd r(n_);
    for (int k = 0; k < n_; ++k) r[k] = this->r(k);
    return r;
}

Potential Potential::yukawa(double amplitude, double screening) {
    if (!(amplitude > 0.0) || !(screening > 0.0))
        throw std::invalid_argument("Yukawa amplitude and screening must be > 0");
    return {Kind::Yukawa, amplitude, screening};
}

double Potential::operator()(double r) const {
    if (kind == Kind::Coulomb) return -1.0 / r;
    return -amplitude * std::exp(-r / screening) / r;
}

double SymTridiagonal::entry(int i, int j) const {
    if (i == j) return diagonal.at(i);
    if (std::abs(i - j) == 1 && std::max(i, j) < size()) return off_diagonal;
    return 0.0;
}

SymTridiagonal radial_hamiltonian(const RadialGrid& grid, const Potential& pot, int ell) {
    if (ell < 0) throw std::invalid_argument("angular momentum must be >= 0");
    const double h2 = grid.step() * grid.step();
    const double centrifugal = 0.5 * ell * (ell + 1);
    SymTridiagonal h;
    h.diagonal.resize(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const double r = grid.r(k);
        h.diagonal[k] = 1.0 / h2 + centrifugal / (r * r) + pot(r);
    }
    h.off_diagonal = -0.5 / h2;
    return h;
}

namespace {

struct Eigenpairs {
    std::vector<double> values;
    std::vector<double> vectors;  // column-major n x count
};

Eigenpairs lowest_eigenpairs(const SymTridiagonal& h, int count, bool with_vectors) {
    const lapack_int n = h.size();
    count = std::min<int>(count, n);
    std::vector<double> d = h.diagonal;
    std::vector<double> e(std::max<lapack_int>(n, 1), h.off_diagonal);
    lapack_int found = 0;
    Eigenpairs out;
    out.values.resize(n);
    if (with_vectors) out.vectors.resize(static_cast<size_t>(n) * count);
    std::vector<lapack_int> support(2 * static_cast<size_t>(std::max(count, 1)));
    const lapack_int info = LAPACKE_dstevr(
        LAPACK_COL_MAJOR, with_vectors ? 'V' : 'N', 'I', n, d.data(), e.data(), 0.0, 0.0, 1,
        count, 0.0, &found, out.values.data(), with_vectors ? out.vectors.data() : nullptr,
        with_vectors ? n : 1, support.data());
    if (info != 0) throw std::runtime_error("dstevr failed, info=" + std::to_string(info));
    out.values.resize(found);
    return out;
}

}  // namespace

std::vector<BoundState> bound_states(const RadialGrid& grid, const Potential& pot, int ell,
                                     int max_count) {
    if (max_count < 1) throw std::invalid_argument("max_count must be >= 1");
    const auto h = radial_hamiltonian(grid, pot, ell);
    const auto pairs = lowest_eigenpairs(h, max_count, true);
    const int n = grid.size();
    const double scale = 1.0 / std::sqrt(grid.step());
    std::vector<BoundState> states;
    for (size_t i = 0; i < pairs.values.size(); ++i) {
        if (!(pairs.values[i] < 0.0)) break;
        Eigen::Map<const Eigen::VectorXd> v(pairs.vectors.data() + i * n, n);
        BoundState s{pairs.values[i], v * scale};
        // Fix the sign so the innermost significant lobe is positive.
        Eigen::Index first = 0;
        s.vector.cwiseAbs().maxCoeff(&first);
        for (Eigen::Index k = 0; k < n; ++k) {
            if (std::abs(s.vector[k]) > 1e-3 * std::abs(s.vector[first])) {
                first = k;
                break;
            }
        }
        if (s.vector[first] < 0.0) s.vector = -s.vector;
        states.push_back(std::move(s));
    }
    return states;
}

double lowest_eigenvalue(const RadialGrid& grid, const Potential& pot, int ell) {
    return lowest_eigenpairs(radial_hamiltonian(grid, pot, ell), 1, false).values.at(0);
}

double calibrate_yukawa(double screening, double target, const RadialGrid& grid) {
    if (!(target < 0.0)) throw std::invalid_argument("calibration target must be negative");
    if (!(screening > 0.0)) throw std::invalid_argument("screening length must be > 0");
    const auto mismatch = [&](double a) {
        return lowest_eigenvalue(grid, Potential::yukawa(a, screening), 0) - target;
    };
    double lo = 0.5, hi = 10.0;
    double f_lo = mismatch(lo);
    if (f_lo < 0.0 || mismatch(hi) > 0.0) throw CalibrationError();
    // Ground energy decreases monotonically with A.
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = mismatch(mid);
        if (f == 0.0) return mid;
        if ((f > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

WaveFunction::WaveFunction(const RadialGrid& grid, int l_max)
    : grid_(grid), coeffs_(Eigen::MatrixXcd::Zero(grid.size(), l_max + 1)) {
    if (l_max < 0) throw std::invalid_argument("l_max must be >= 0");
}

WaveFunction WaveFunction::from_channel(const RadialGrid& grid, int l_max, int ell,
                                        const Eigen::VectorXd& radial) {
    if (ell > l_max) throw std::invalid_argument("channel exceeds l_max");
    if (radial.size() != grid.size()) throw std::invalid_argument("radial vector size mismatch");
    WaveFunction psi(grid, l_max);
    psi.coeffs_.col(ell) = radial.cast<std::complex<double>>();
    return psi;
}

std::complex<double> WaveFunction::inner(const WaveFunction& other) const {
    if (!(grid_ == other.grid_) || l_max() != other.l_max())
        throw std::invalid_argument("grid mismatch");
    return grid_.step() * (coeffs_.conjugate().cwiseProduct(other.coeffs_)).sum();
}

WaveFunction& WaveFunction::operator-=(const WaveFunction& other) {
    if (!(grid_ == other.grid_) || l_max() != other.l_max())
        throw std::invalid_argument("grid mismatch");
    coeffs_ -= other.coeffs_;
    return *this;
}

BoundProjector::BoundProjector(const RadialGrid& grid,
                               std::vector<std::vector<BoundState>> channels)
    : grid_(grid), channels_(std::move(channels)) {
    for (const auto& states : channels_) {
        Eigen::MatrixXd basis(grid_.size(), static_cast<Eigen::Index>(states.size()));
        for (size_t i = 0; i < states.size(); ++i) basis.col(i) = states[i].vector;
        bases_.push_back(std::move(basis));
    }
}

BoundProjector BoundProjector::build(const RadialGrid& grid, const Potential& pot, int l_b,
                                     int n_max) {
    if (l_b < 0) throw std::invalid_argument("l_b must be >= 0");
    std::vector<std::vector<BoundState>> channels(l_b + 1);
    for (int ell = 0; ell <= l_b; ++ell) {
        const int count = n_max - ell;
        if (count >= 1) channels[ell] = bound_states(grid, pot, ell, count);
    }
    return BoundProjector(grid, std::move(channels));
}

int BoundProjector::state_count() const {
    int n = 0;
    for (const auto& c : channels_) n += static_cast<int>(c.size());
    return n;
}

BoundProjector BoundProjector::truncated(int l_b) const {
    if (l_b < 0 || l_b > this->l_b()) throw std::invalid_argument("invalid truncation l_b");
    return BoundProjector(grid_, {channels_.begin(), channels_.begin() + l_b + 1});
}

WaveFunction project_bound(const WaveFunction& psi, const BoundProjector& q) {
    if (!(psi.grid() == q.grid())) throw std::invalid_argument("grid mismatch");
    WaveFunction phi(psi.grid(), psi.l_max());
    const int top = std::min(psi.l_max(), q.l_b());
    const double dr = psi.grid().step();
    for (int ell = 0; ell <= top; ++ell) {
        const auto& basis = q.bases_[ell];
        if (basis.cols() == 0) continue;
        const Eigen::VectorXcd overlaps = dr * (basis.transpose() * psi.coeffs().col(ell));
        phi.coeffs().col(ell) = basis * overlaps;
    }
    return phi;
}

double ionization_probability(const WaveFunction& psi, const BoundProjector& q) {
    if (psi.norm_squared() > 1.0 + 1e-6)
        throw std::invalid_argument("wave function norm exceeds 1");
    WaveFunction chi = psi;
    chi -= project_bound(psi, q);
    return chi.norm_squared();
}

}  // namespace sfi
