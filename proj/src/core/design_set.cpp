#include "propen/design_set.hpp"

#include <fstream>
#include <string>

#include "propen/csv.hpp"
#include "propen/error.hpp"

namespace propen {

void DesignSet::validate() const {
  if (properties.size() != designs.rows())
    throw DimensionError(dimension_message("properties", designs.rows(), properties.size()));
  if (!designs.allFinite()) throw NonFiniteError("design entries must be finite");
  if (!properties.allFinite()) throw NonFiniteError("property values must be finite");
}

DesignSet DesignSet::subset(const std::vector<Eigen::Index>& rows) const {
  DesignSet out;
  out.designs.resize(static_cast<Eigen::Index>(rows.size()), dim());
  out.properties.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = rows[k];
    if (r < 0 || r >= size()) throw InvalidArgument("subset row out of range: " + std::to_string(r));
    out.designs.row(static_cast<Eigen::Index>(k)) = designs.row(r);
    out.properties[static_cast<Eigen::Index>(k)] = properties[r];
  }
  return out;
}

void write_design_set_csv(std::ostream& out, const DesignSet& data) {
  for (Eigen::Index c = 0; c < data.dim(); ++c) out << 'x' << c << ',';
  out << "y\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.dim(); ++c) out << csv::format(data.designs(r, c)) << ',';
    out << csv::format(data.properties[r]) << '\n';
  }
}

void write_design_set_csv(const std::filesystem::path& path, const DesignSet& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_design_set_csv(out, data);
  if (!out) throw IoError("failed writing " + path.string());
}

DesignSet read_design_set_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("design CSV is empty (missing header)");
  const auto header = csv::split(line);
  if (header.empty() || header.back() != "y") throw IoError("design CSV header must end with column 'y'");
  const auto m = static_cast<Eigen::Index>(header.size() - 1);
  for (Eigen::Index c = 0; c < m; ++c)
    if (header[static_cast<std::size_t>(c)] != "x" + std::to_string(c))
      throw IoError("design CSV header column " + std::to_string(c) + " must be 'x" + std::to_string(c) + "'");

  std::vector<double> values;
  long line_no = 1;
  Eigen::Index n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    if (static_cast<Eigen::Index>(fields.size()) != m + 1)
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(m + 1) + " fields, got " +
                    std::to_string(fields.size()));
    for (const auto& f : fields) {
      try {
        values.push_back(csv::parse_double(f));
      } catch (const InvalidArgument& e) {
        throw IoError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    ++n;
  }
  DesignSet data;
  data.designs.resize(n, m);
  data.properties.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) data.designs(r, c) = values[static_cast<std::size_t>(r * (m + 1) + c)];
    data.properties[r] = values[static_cast<std::size_t>(r * (m + 1) + m)];
  }
  data.validate();
  return data;
}

DesignSet read_design_set_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_design_set_csv(in);
}

}  // namespace propen
