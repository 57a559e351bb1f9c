#include "llseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace llseg {

namespace {

constexpr char kMagic[5] = {'K', 'P', 'R', 'M', '1'};

void write_u64(std::ostream& os, std::uint64_t x) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("checkpoint truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return x;
}

void write_f64(std::ostream& os, double d) {
  write_u64(os, std::bit_cast<std::uint64_t>(d));
}

double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_u64(is));
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  for (const NamedTensor& nt : tensors) {
    write_u64(os, nt.name.size());
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    write_u64(os, nt.t.rank());
    for (std::size_t e : nt.t.shape) write_u64(os, e);
    for (double d : nt.t.v) write_f64(os, d);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  std::vector<NamedTensor> out;
  while (true) {
    is.peek();
    if (is.eof()) break;
    NamedTensor nt;
    const std::uint64_t nlen = read_u64(is);
    nt.name.resize(nlen);
    is.read(nt.name.data(), static_cast<std::streamsize>(nlen));
    if (!is) throw std::runtime_error("checkpoint truncated");
    const std::uint64_t rank = read_u64(is);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<std::size_t>(read_u64(is));
      n *= shape[i];
    }
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f64(is);
    nt.t = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  return out;
}

void restore_tensor(const std::vector<NamedTensor>& ckpt,
                    const std::string& name, Tensor& into) {
  for (const NamedTensor& nt : ckpt) {
    if (nt.name == name) {
      if (nt.t.shape != into.shape)
        throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
      into = nt.t;
      return;
    }
  }
  throw std::runtime_error("checkpoint tensor missing: " + name);
}

}  // namespace llseg
