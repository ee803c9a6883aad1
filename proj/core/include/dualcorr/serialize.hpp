#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dualcorr/rng.hpp"
#include "dualcorr/tensor.hpp"

namespace dualcorr::num {

// Flat tensor blob: int32 LE rank, int32 LE extent per dimension, then
// float64 LE values in row-major order. Byte-identical for identical tensors.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Named collection of trainable leaf tensors. Creation order is recorded so
// optimizers can walk parameters deterministically; persistence is sorted by
// name so a checkpoint's bytes do not depend on construction order.
class ParameterStore {
 public:
  // Creates a leaf with requires_grad=true, initialized uniformly on
  // [-scale, scale]. Throws if the name is taken.
  Tensor create(const std::string& name, Shape shape, Rng& rng, double scale);

  // Same, initialized to a constant.
  Tensor create_const(const std::string& name, Shape shape, double value);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;  // creation order
  std::size_t size() const { return order_.size(); }

  void zero_grad();

  // Container format: "DCP1", uint32 LE entry count, then per entry a
  // uint32 LE name length, the name bytes, and the tensor blob. Entries are
  // written sorted by name.
  void save(const std::string& path) const;

  // Copies stored values into same-named parameters (shapes must match) and
  // creates parameters for names not present yet.
  void load(const std::string& path);

 private:
  std::map<std::string, Tensor> params_;
  std::vector<std::string> order_;
};

}  // namespace dualcorr::num
