#include "popsan/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace popsan::ckpt {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'A', 'N'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    check_runtime(pos + n <= buf.size(), "checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save(const std::string& path, const TensorMap& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    size_t count = 1;
    for (std::uint32_t d : t.dims) {
      put_u32(out, d);
      count *= d;
    }
    check_runtime(count == t.data.size(), "checkpoint: tensor '" + name + "' dims/data mismatch");
    for (double x : t.data) put_f64(out, x);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check_runtime(f.good(), "checkpoint: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  check_runtime(f.good(), "checkpoint: write to '" + path + "' failed");
}

TensorMap load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check_runtime(f.good(), "checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  std::string magic = r.bytes(4);
  check_runtime(std::memcmp(magic.data(), kMagic, 4) == 0,
                "checkpoint: bad magic bytes in '" + path + "'");
  const std::uint32_t version = r.u32();
  check_runtime(version == kFormatVersion,
                "checkpoint: format version " + std::to_string(version) +
                    " unsupported, this build reads version " + std::to_string(kFormatVersion));

  TensorMap map;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    Tensor t;
    const std::uint32_t rank = r.u32();
    size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
    }
    t.data.resize(n);
    for (size_t k = 0; k < n; ++k) t.data[k] = r.f64();
    map.emplace(std::move(name), std::move(t));
  }
  check_runtime(r.pos == buf.size(), "checkpoint: trailing bytes in '" + path + "'");
  return map;
}

Tensor from_matrix(const MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(static_cast<size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) t.data.push_back(m(i, j));
  return t;
}

Tensor from_vector(const VectorXd& v) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

Tensor from_scalar(double x) {
  Tensor t;
  t.dims = {1};
  t.data = {x};
  return t;
}

Tensor from_string(const std::string& s) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(s.size())};
  t.data.reserve(s.size());
  for (unsigned char c : s) t.data.push_back(static_cast<double>(c));
  return t;
}

MatrixXd to_matrix(const Tensor& t) {
  check_runtime(t.dims.size() == 2, "checkpoint: expected rank-2 tensor");
  MatrixXd m(t.dims[0], t.dims[1]);
  size_t k = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = t.data[k++];
  return m;
}

VectorXd to_vector(const Tensor& t) {
  check_runtime(t.dims.size() == 1, "checkpoint: expected rank-1 tensor");
  return Eigen::Map<const VectorXd>(t.data.data(), static_cast<Index>(t.data.size()));
}

double to_scalar(const Tensor& t) {
  check_runtime(t.data.size() == 1, "checkpoint: expected scalar tensor");
  return t.data[0];
}

std::string to_string(const Tensor& t) {
  std::string s;
  s.reserve(t.data.size());
  for (double d : t.data) s.push_back(static_cast<char>(static_cast<unsigned char>(d)));
  return s;
}

const Tensor& get(const TensorMap& map, const std::string& key) {
  auto it = map.find(key);
  check_runtime(it != map.end(), "checkpoint: missing tensor '" + key + "'");
  return it->second;
}

}  // namespace popsan::ckpt
