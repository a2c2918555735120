#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "concept_monitor/embedding.hpp"
#include "concept_monitor/errors.hpp"

namespace concept_monitor::embed {

MatrixD Projection2D::project(const MatrixD& points) const {
    if (points.cols() != mean.size())
        throw InputError("projection basis has dimension " + std::to_string(mean.size()) + ", points have " +
                         std::to_string(points.cols()));
    MatrixD out(points.rows(), 2);
    for (std::size_t p = 0; p < points.rows(); ++p)
        for (std::size_t a = 0; a < 2; ++a) {
            double s = 0.0;
            for (std::size_t k = 0; k < mean.size(); ++k) s += (points(p, k) - mean[k]) * directions(a, k);
            out(p, a) = s;
        }
    return out;
}

Projection2D PcaProjector::fit(const MatrixD& points) const {
    const std::size_t n = points.rows(), d = points.cols();
    if (n < 2) throw InputError("projection needs at least 2 points");
    if (d < 2) throw InputError("projection needs dimension >= 2");
    bool identical = true;
    for (std::size_t p = 1; p < n && identical; ++p)
        identical = std::equal(points.row(p).begin(), points.row(p).end(), points.row(0).begin());
    if (identical) throw InputError("zero variance: all points are identical");

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> x(points.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw ComputeError("eigendecomposition failed");

    const double total = std::max(0.0, cov.trace());
    Projection2D out;
    out.mean.assign(mean.data(), mean.data() + d);
    out.directions = MatrixD(2, d);
    out.coordinates = MatrixD(n, 2);
    for (std::size_t a = 0; a < 2; ++a) {
        const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - a);  // eigenvalues ascend
        for (std::size_t k = 0; k < d; ++k) out.directions(a, k) = eig.eigenvectors()(static_cast<Eigen::Index>(k), col);
        out.explained_variance[a] = total > 0.0 ? std::max(0.0, eig.eigenvalues()(col)) / total : 0.0;
    }
    // Coordinates go through project() so fitted and re-projected points agree bit for bit.
    out.coordinates = out.project(points);
    for (std::size_t a = 0; a < 2; ++a) {
        std::size_t arg = 0;
        for (std::size_t p = 1; p < n; ++p)
            if (std::abs(out.coordinates(p, a)) > std::abs(out.coordinates(arg, a))) arg = p;
        if (out.coordinates(arg, a) < 0.0) {
            for (std::size_t k = 0; k < d; ++k) out.directions(a, k) = -out.directions(a, k);
            for (std::size_t p = 0; p < n; ++p) out.coordinates(p, a) = -out.coordinates(p, a);
        }
    }
    return out;
}

Projection2D project_2d(const MatrixD& points) { return PcaProjector{}.fit(points); }

}  // namespace concept_monitor::embed
