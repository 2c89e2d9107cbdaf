#include "iqbart/data.hpp"

#include <cmath>

#include "iqbart/error.hpp"

namespace iqbart {

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = (*this)(i, j);
  return out;
}

void Dataset::validate() const {
  if (x.rows != y.rows) throw InputError("dataset: x and y row counts differ");
  if (x.data.size() != x.rows * x.cols || y.data.size() != y.rows * y.cols) throw InputError("dataset: malformed matrix");
  for (double v : x.data)
    if (!std::isfinite(v)) throw NonFiniteError("dataset: non-finite covariate value");
  for (double v : y.data)
    if (!std::isfinite(v)) throw NonFiniteError("dataset: non-finite response value");
}

}  // namespace iqbart
