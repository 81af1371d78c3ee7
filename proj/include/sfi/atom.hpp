#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

namespace sfi {

/// Uniform radial mesh r_k = (k+1) dr, k = 0..n-1. Reduced radial functions
/// vanish at r = 0 and one step beyond the last point.
class RadialGrid {
public:
    RadialGrid(double step, int n_points);
    /// Grid with n = round(r_max / step) points.
    static RadialGrid with_extent(double step, double r_max);

    double step() const { return step_; }
    int size() const { return n_; }
    double r(int k) const { return (k + 1) * step_; }
    double extent() const { return n_ * step_; }
    Eigen::VectorXd points() const;

    bool operator==(const RadialGrid&) const = default;

private:
    double step_;
    int n_;
};

struct Potential {
    enum class Kind { Coulomb, Yukawa };

    Kind kind = Kind::Coulomb;
    double amplitude = 1.0;  ///< Yukawa A
    double screening = 1.0;  ///< Yukawa a

    static Potential coulomb() { return {}; }
    static Potential yukawa(double amplitude, double screening);

    double operator()(double r) const;
};

/// Symmetric tridiagonal matrix with constant off-diagonal.
struct SymTridiagonal {
    std::vector<double> diagonal;
    double off_diagonal = 0.0;

    int size() const { return static_cast<int>(diagonal.size()); }
    double entry(int i, int j) const;
};

/// -1/2 d^2/dr^2 + l(l+1)/(2r^2) + V(r), three-point stencil, Dirichlet ends.
SymTridiagonal radial_hamiltonian(const RadialGrid& grid, const Potential& pot, int ell);

struct BoundState {
    double energy;
    Eigen::VectorXd vector;  ///< normalised with the grid inner product dr * sum(v^2)
};

/// Lowest negative-energy eigenpairs of the radial Hamiltonian, ascending.
std::vector<BoundState> bound_states(const RadialGrid& grid, const Potential& pot, int ell,
                                     int max_count);

/// Lowest eigenvalue of the radial Hamiltonian, bound or not.
double lowest_eigenvalue(const RadialGrid& grid, const Potential& pot, int ell);

class CalibrationError : public std::runtime_error {
public:
    CalibrationError() : std::runtime_error("calibration bracket exhausted") {}
};

/// Yukawa amplitude A giving an l = 0 ground state at `target` (bisection on [0.5, 10]).
double calibrate_yukawa(double screening, double target, const RadialGrid& grid);

/// m = 0 partial-wave expansion: column l holds the reduced radial function of channel l.
class WaveFunction {
public:
    WaveFunction(const RadialGrid& grid, int l_max);

    static WaveFunction from_channel(const RadialGrid& grid, int l_max, int ell,
                                     const Eigen::VectorXd& radial);

    const RadialGrid& grid() const { return grid_; }
    int l_max() const { return static_cast<int>(coeffs_.cols()) - 1; }

    Eigen::MatrixXcd& coeffs() { return coeffs_; }
    const Eigen::MatrixXcd& coeffs() const { return coeffs_; }

    double norm_squared() const { return grid_.step() * coeffs_.squaredNorm(); }
    std::complex<double> inner(const WaveFunction& other) const;

    WaveFunction& operator-=(const WaveFunction& other);

private:
    RadialGrid grid_;
    Eigen::MatrixXcd coeffs_;  // n_points x (l_max + 1)
};

/// Orthogonal projector onto the field-free bound states with l <= l_b.
class BoundProjector {
public:
    /// Keeps every negative-energy state with principal number n <= n_max.
    static BoundProjector build(const RadialGrid& grid, const Potential& pot, int l_b,
                                int n_max = 15);

    const RadialGrid& grid() const { return grid_; }
    int l_b() const { return static_cast<int>(channels_.size()) - 1; }
    const std::vector<BoundState>& channel(int ell) const { return channels_.at(ell); }
    int state_count() const;

    /// The same projector restricted to channels l <= l_b.
    BoundProjector truncated(int l_b) const;

private:
    BoundProjector(const RadialGrid& grid, std::vector<std::vector<BoundState>> channels);

    friend WaveFunction project_bound(const WaveFunction&, const BoundProjector&);

    RadialGrid grid_;
    std::vector<std::vector<BoundState>> channels_;
    std::vector<Eigen::MatrixXd> bases_;  // per l: n_points x count
};

WaveFunction project_bound(const WaveFunction& psi, const BoundProjector& q);

/// ||psi - Q psi||^2 ; requires ||psi||^2 <= 1 + 1e-6.
double ionization_probability(const WaveFunction& psi, const BoundProjector& q);

}  // namespace sfi
