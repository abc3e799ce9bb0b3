#pragma once

#include <filesystem>
#include <iosfwd>

#include <Eigen/Dense>

namespace propen {

/// Designs x_i (rows) in R^m with property values y_i = g(x_i).
struct DesignSet {
  Eigen::MatrixXd designs;     // n x m
  Eigen::VectorXd properties;  // n

  Eigen::Index size() const { return designs.rows(); }
  Eigen::Index dim() const { return designs.cols(); }
  Eigen::VectorXd design(Eigen::Index i) const { return designs.row(i).transpose(); }

  // Throws when properties.size() != n or any entry is non-finite.
  void validate() const;

  // Rows selected by index, in the given order.
  DesignSet subset(const std::vector<Eigen::Index>& rows) const;
};

// CSV with header "x0,...,x{m-1},y", one design per row.
void write_design_set_csv(std::ostream& out, const DesignSet& data);
void write_design_set_csv(const std::filesystem::path& path, const DesignSet& data);
DesignSet read_design_set_csv(std::istream& in);
DesignSet read_design_set_csv(const std::filesystem::path& path);

}  // namespace propen
