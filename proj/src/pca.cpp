#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "gpert/analysis.hpp"
#include "gpert/error.hpp"

namespace gpert {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw Error("ragged matrix rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

ProjectionModel pca_fit(const Matrix& rows, std::size_t D) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n < 2) throw Error("pca_fit needs at least 2 rows");
  if (D < 1 || D > std::min(n - 1, d))
    throw Error("pca_fit: D=" + std::to_string(D) + " outside [1, min(n-1, d)=" +
                std::to_string(std::min(n - 1, d)) + "]");

  ProjectionModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) model.mean[c] += rows(r, c);
  for (double& m : model.mean) m /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = rows(r, c) - model.mean[c];
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  model.total_variance = cov.trace();
  if (!(model.total_variance > 0.0)) throw Error("pca_fit: zero variance (all rows identical)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("pca_fit: eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  for (std::size_t i = 0; i < D; ++i) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - i);
    std::vector<double> comp(d);
    for (std::size_t c = 0; c < d; ++c) comp[c] = vectors(static_cast<Eigen::Index>(c), col);
    auto lead = std::find_if(comp.begin(), comp.end(), [](double x) { return std::abs(x) > 1e-12; });
    if (lead != comp.end() && *lead < 0)
      for (double& x : comp) x = -x;
    model.components.push_back(std::move(comp));
    model.explained_variance.push_back(std::max(0.0, values(col)));
  }
  return model;
}

Matrix pca_project(const ProjectionModel& model, const Matrix& rows) {
  if (rows.cols() != model.input_dim())
    throw Error("pca_project: row dimension " + std::to_string(rows.cols()) + " does not match model dimension " +
                std::to_string(model.input_dim()));
  Matrix out(rows.rows(), model.output_dim());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t k = 0; k < model.output_dim(); ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < rows.cols(); ++c) s += (rows(r, c) - model.mean[c]) * model.components[k][c];
      out(r, k) = s;
    }
  }
  return out;
}

Matrix pca_reconstruct(const ProjectionModel& model, const Matrix& projected) {
  if (projected.cols() != model.output_dim()) throw Error("pca_reconstruct: dimension mismatch");
  Matrix out(projected.rows(), model.input_dim());
  for (std::size_t r = 0; r < projected.rows(); ++r) {
    for (std::size_t c = 0; c < model.input_dim(); ++c) {
      double s = model.mean[c];
      for (std::size_t k = 0; k < model.output_dim(); ++k) s += projected(r, k) * model.components[k][c];
      out(r, c) = s;
    }
  }
  return out;
}

}  // namespace gpert
