#pragma once

#include "popsan/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace popsan::ckpt {

// Versioned binary tensor container. Layout, all little-endian:
//   magic "PSAN" | u32 format version | u32 tensor count |
//   per tensor: u32 name length, name bytes, u32 rank, u32 dims[rank],
//               f64 data[prod(dims)] (row-major)
inline constexpr std::uint32_t kFormatVersion = 1;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

// std::map keys iterate sorted, so identical content always serializes to
// identical bytes.
using TensorMap = std::map<std::string, Tensor>;

void save(const std::string& path, const TensorMap& tensors);
TensorMap load(const std::string& path);

Tensor from_matrix(const MatrixXd& m);
Tensor from_vector(const VectorXd& v);
Tensor from_scalar(double x);
Tensor from_string(const std::string& s);  // one byte per element

MatrixXd to_matrix(const Tensor& t);
VectorXd to_vector(const Tensor& t);
double to_scalar(const Tensor& t);
std::string to_string(const Tensor& t);

const Tensor& get(const TensorMap& map, const std::string& key);

}  // namespace popsan::ckpt
