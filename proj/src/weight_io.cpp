#include "gvf/weight_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace gvf {

namespace le {

namespace {

template <typename UInt>
void put(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t k = 0; k < sizeof(UInt); ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw IoError("weight file truncated");
  UInt v = 0;
  for (std::size_t k = 0; k < sizeof(UInt); ++k) v |= static_cast<UInt>(bytes[k]) << (8 * k);
  return v;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::istream& in) { return get<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get<std::uint64_t>(in); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

}  // namespace le

namespace {

constexpr char kDenseMagic[4] = {'G', 'V', 'F', 'W'};
constexpr char kSparseMagic[4] = {'G', 'V', 'F', 'S'};

bool is_stored(double v) { return std::bit_cast<std::uint64_t>(v) != 0; }

}  // namespace

void write_weights(std::ostream& out, const Weights& w, WeightEncoding encoding) {
  const auto dim = static_cast<std::uint64_t>(w.size());
  if (encoding == WeightEncoding::kDense) {
    out.write(kDenseMagic, 4);
    le::put_u32(out, kWeightFormatVersion);
    le::put_u64(out, dim);
    for (Eigen::Index i = 0; i < w.size(); ++i) le::put_f64(out, w[i]);
  } else {
    out.write(kSparseMagic, 4);
    le::put_u32(out, kWeightFormatVersion);
    le::put_u64(out, dim);
    std::uint64_t count = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) count += is_stored(w[i]) ? 1 : 0;
    le::put_u64(out, count);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (!is_stored(w[i])) continue;
      le::put_u64(out, static_cast<std::uint64_t>(i));
      le::put_f64(out, w[i]);
    }
  }
  if (!out) throw IoError("failed writing weight vector");
}

Weights read_weights(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in) throw IoError("weight file truncated");
  const bool dense = std::memcmp(magic, kDenseMagic, 4) == 0;
  const bool sparse = std::memcmp(magic, kSparseMagic, 4) == 0;
  if (!dense && !sparse) throw IoError("not a weight file (bad magic)");
  const std::uint32_t version = le::get_u32(in);
  if (version != kWeightFormatVersion)
    throw IoError("unsupported weight format version " + std::to_string(version));
  const std::uint64_t dim = le::get_u64(in);
  if (dim == 0 || dim > (std::uint64_t{1} << 40)) throw IoError("implausible weight dimension");

  Weights w = Weights::Zero(static_cast<Eigen::Index>(dim));
  if (dense) {
    for (std::uint64_t i = 0; i < dim; ++i) w[static_cast<Eigen::Index>(i)] = le::get_f64(in);
    return w;
  }
  const std::uint64_t count = le::get_u64(in);
  if (count > dim) throw IoError("sparse weight count exceeds dimension");
  std::uint64_t previous = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t index = le::get_u64(in);
    if (index >= dim || (k > 0 && index <= previous))
      throw IoError("sparse weight indices must be increasing and in range");
    w[static_cast<Eigen::Index>(index)] = le::get_f64(in);
    previous = index;
  }
  return w;
}

void save_weights(const std::filesystem::path& path, const Weights& w, WeightEncoding encoding) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_weights(out, w, encoding);
}

Weights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_weights(in);
}

}  // namespace gvf
