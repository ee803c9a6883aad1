#include "dualcorr/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dualcorr::num {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("tensor read: truncated header");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  auto u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("tensor read: truncated values");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

constexpr char kCheckpointMagic[4] = {'D', 'C', 'P', '1'};

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : t.values()) put_f64(out, v);
}

Tensor read_tensor(std::istream& in) {
  const auto rank = get_u32(in);
  if (rank > 8) {
    throw std::runtime_error("tensor read: implausible rank " +
                             std::to_string(rank));
  }
  Shape shape(rank);
  for (auto& e : shape) {
    const auto ext = get_u32(in);
    if (ext == 0 || ext > (1u << 28)) {
      throw std::runtime_error("tensor read: implausible extent " +
                               std::to_string(ext));
    }
    e = static_cast<int>(ext);
  }
  const auto n = shape_size(shape);
  std::vector<double> values(n);
  for (auto& v : values) v = get_f64(in);
  return Tensor::from_values(std::move(shape), std::move(values));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  write_tensor(out, t);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_tensor(in);
}

Tensor ParameterStore::create(const std::string& name, Shape shape, Rng& rng,
                              double scale) {
  if (params_.count(name)) {
    throw std::invalid_argument("parameter exists: " + name);
  }
  auto t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  for (auto& v : t.mutable_values()) v = rng.uniform(-scale, scale);
  params_.emplace(name, t);
  order_.push_back(name);
  return t;
}

Tensor ParameterStore::create_const(const std::string& name, Shape shape,
                                    double value) {
  if (params_.count(name)) {
    throw std::invalid_argument("parameter exists: " + name);
  }
  auto t = Tensor::full(std::move(shape), value, /*requires_grad=*/true);
  params_.emplace(name, t);
  order_.push_back(name);
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::out_of_range("no such parameter: " + name);
  }
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

std::vector<std::string> ParameterStore::names() const { return order_; }

void ParameterStore::zero_grad() {
  for (auto& [name, t] : params_) {
    Tensor copy = t;
    copy.zero_grad();
  }
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kCheckpointMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(params_.size()));
  // std::map iterates sorted by name
  for (const auto& [name, t] : params_) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, t);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void ParameterStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const auto count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get_u32(in);
    if (name_len > 4096) {
      throw std::runtime_error("checkpoint read: implausible name length");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("checkpoint read: truncated name");
    Tensor stored = read_tensor(in);
    auto it = params_.find(name);
    if (it == params_.end()) {
      auto t = Tensor::from_values(stored.shape(),
                                   {stored.values().begin(),
                                    stored.values().end()},
                                   /*requires_grad=*/true);
      params_.emplace(name, t);
      order_.push_back(name);
    } else {
      if (it->second.shape() != stored.shape()) {
        throw std::runtime_error("checkpoint shape mismatch for " + name +
                                 ": have " + shape_str(it->second.shape()) +
                                 ", file has " + shape_str(stored.shape()));
      }
      auto dst = it->second.mutable_values();
      std::copy(stored.values().begin(), stored.values().end(), dst.begin());
    }
  }
}

}  // namespace dualcorr::num
