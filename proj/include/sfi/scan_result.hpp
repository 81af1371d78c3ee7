#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace sfi {

struct CellFailure {
    int row = 0;  ///< E0 index
    int col = 0;  ///< tau index
    std::string message;
};

/// delta P over (E0, tau): rows follow e0, columns follow tau. Failed cells
/// hold NaN and are listed in `failures`.
struct ScanResult {
    std::vector<double> e0;
    std::vector<double> tau;
    Eigen::MatrixXd delta_p;
    std::vector<double> baseline;  ///< P[E_f] per E0
    double alpha = 0.0;
    double epsilon = 0.0;
    std::string fingerprint;
    std::vector<CellFailure> failures;
    /// Cells whose runs tripped the outer-box population sentinel.
    std::vector<std::pair<int, int>> reflection_flags;

    int rows() const { return static_cast<int>(e0.size()); }
    int cols() const { return static_cast<int>(tau.size()); }
    bool cell_ok(int i, int j) const;
};

}  // namespace sfi
