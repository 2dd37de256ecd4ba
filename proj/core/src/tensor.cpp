#include "idat/tensor.hpp"

#include <sstream>

namespace idat {

std::string shape_str(std::span<const int> shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(std::span<const int> shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_str(shape));
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace idat
