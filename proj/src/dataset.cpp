#include "qmix/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "qmix/error.hpp"
#include "qmix/format.hpp"

namespace qmix {

Dataset::Dataset(Points points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw Error(ErrorCode::InvalidArgument, "dataset is empty");
  if (points_.cols() != 2 && points_.cols() != 3)
    throw Error(ErrorCode::InvalidArgument, "dataset dimension must be 2 or 3");
  if (!points_.allFinite()) throw Error(ErrorCode::InvalidArgument, "dataset has non-finite coordinates");
}

Eigen::VectorXd Dataset::mean() const { return points_.colwise().mean().transpose(); }

Eigen::MatrixXd Dataset::covariance() const {
  Eigen::VectorXd m = mean();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d(), d());
  for (Eigen::Index i = 0; i < n(); ++i) {
    Eigen::VectorXd r = point(i) - m;
    c += r * r.transpose();
  }
  return c / static_cast<double>(n());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace

LabeledDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IO, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IO, path + ": missing header");
  auto header = split(line);
  std::size_t d = 0;
  bool has_label = false;
  if (header.size() >= 2 && header[0] == "x" && header[1] == "y") {
    d = 2;
    if (header.size() >= 3 && header[2] == "z") d = 3;
    if (header.size() == d + 1 && header[d] == "label") has_label = true;
    else if (header.size() != d)
      throw Error(ErrorCode::IO, path + ": unexpected header '" + line + "'");
  } else {
    throw Error(ErrorCode::IO, path + ": header must be x,y or x,y,z");
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != d + (has_label ? 1 : 0))
      throw Error(ErrorCode::IO, path + ":" + std::to_string(row) + ": wrong column count");
    for (std::size_t j = 0; j < d; ++j) {
      try {
        std::size_t used = 0;
        double v = std::stod(cells[j], &used);
        if (used != cells[j].size()) throw std::invalid_argument("trailing");
        values.push_back(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IO, path + ":" + std::to_string(row) + ": bad number '" + cells[j] + "'");
      }
    }
    if (has_label) labels.push_back(std::stoi(cells[d]));
  }
  if (values.empty()) throw Error(ErrorCode::IO, path + ": no data rows");
  Points pts(values.size() / d, d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < pts.cols(); ++j) pts(i, j) = values[i * d + j];
  return {Dataset(std::move(pts)), std::move(labels)};
}

void write_csv(const std::string& path, const Dataset& data, const std::vector<int>* labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IO, "cannot write " + path);
  out << (data.d() == 2 ? "x,y" : "x,y,z") << (labels ? ",label" : "") << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.d(); ++j) out << (j ? "," : "") << fmt_num(data.points()(i, j));
    if (labels) out << "," << (*labels)[i];
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::IO, "write failed for " + path);
}

}  // namespace qmix
