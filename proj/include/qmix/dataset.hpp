#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace qmix {

using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Immutable N x d point set, d in {2, 3}. N >= 1 is accepted so that single
// points can be evaluated; fitting requires N >= 2 and checks it itself.
class Dataset {
 public:
  explicit Dataset(Points points);

  const Points& points() const { return points_; }
  Eigen::Index n() const { return points_.rows(); }
  Eigen::Index d() const { return points_.cols(); }
  Eigen::VectorXd point(Eigen::Index i) const { return points_.row(i).transpose(); }

  Eigen::VectorXd mean() const;
  // Maximum-likelihood (divide by N) covariance of all points.
  Eigen::MatrixXd covariance() const;

 private:
  Points points_;
};

struct LabeledDataset {
  Dataset data;
  std::vector<int> labels;  // 0-based class index per point
};

// CSV with header x,y or x,y,z and an optional trailing label column.
LabeledDataset read_csv(const std::string& path);
void write_csv(const std::string& path, const Dataset& data, const std::vector<int>* labels = nullptr);

}  // namespace qmix
