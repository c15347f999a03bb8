#include "ctes/dataset.hpp"

#include "ctes/errors.hpp"

namespace ctes {

void PairedDataset::validate() const {
  const Index n = characteristics.rows();
  if (expressions.rows() != n || groups.size() != n)
    throw InputError("dataset rows are not aligned: " + std::to_string(n) + " characteristics, " +
                     std::to_string(expressions.rows()) + " expressions, " +
                     std::to_string(groups.size()) + " group labels");
  if (outcome && outcome->size() != n)
    throw InputError("dataset outcome column is not aligned with rows");
  for (Index i = 0; i < n; ++i)
    if (groups[i] < 1 || groups[i] > num_groups)
      throw InputError("group label " + std::to_string(groups[i]) + " at row " +
                       std::to_string(i) + " is outside [1, " + std::to_string(num_groups) + "]");
  if (!image.empty() && image.pixels() != expressions.cols())
    throw InputError("image shape does not match expression width");
}

std::vector<Index> PairedDataset::rows_in_group(int group) const {
  std::vector<Index> rows;
  for (Index i = 0; i < groups.size(); ++i)
    if (groups[i] == group) rows.push_back(i);
  return rows;
}

PairedDataset PairedDataset::subset(const std::vector<Index>& rows) const {
  PairedDataset out;
  out.characteristics = characteristics(rows, Eigen::all);
  out.expressions = expressions(rows, Eigen::all);
  out.groups = groups(rows);
  out.num_groups = num_groups;
  out.image = image;
  if (outcome) out.outcome = VectorXi((*outcome)(rows));
  return out;
}

}  // namespace ctes
