#include "antkit/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace antkit {

namespace {

constexpr char kMagic[4] = {'A', 'N', 'T', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  std::ifstream in;
  std::uint64_t offset = 0;
  std::string path;

  void read(void* dst, std::size_t n) {
    if (!in.read(static_cast<char*>(dst), std::streamsize(n)))
      throw FormatError("checkpoint truncated at byte offset " +
                        std::to_string(offset) + ": " + path);
    offset += n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

Reader open_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad checkpoint magic in " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " in " + path);
  return r;
}

void write_tensor(std::ostream& out, const std::vector<int>& shape,
                  const std::vector<double>& data) {
  put_u32(out, std::uint32_t(shape.size()));
  for (int d : shape) put_u32(out, std::uint32_t(d));
  for (double v : data) put_f64(out, v);
}

void read_tensor_into(Reader& r, const std::vector<int>& shape,
                      std::vector<double>& data, const std::string& what) {
  const std::uint32_t ndim = r.u32();
  if (ndim != shape.size())
    throw FormatError("checkpoint tensor rank mismatch for " + what);
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = r.u32();
    if (int(d) != shape[i])
      throw FormatError("checkpoint tensor shape mismatch for " + what);
    numel *= d;
  }
  if (data.size() != numel)
    throw FormatError("checkpoint tensor size mismatch for " + what);
  for (std::size_t i = 0; i < numel; ++i) data[i] = r.f64();
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const std::string spec = emit_spec(net.spec());
  put_u64(out, spec.size());
  out.write(spec.data(), std::streamsize(spec.size()));

  auto stats = net.running_stats();
  put_u64(out, net.parameters().size() + stats.size());
  for (auto& p : net.parameters())
    write_tensor(out, p.tensor.shape(), p.tensor.data());
  for (auto& s : stats)
    write_tensor(out, {int(s.values->size())}, *s.values);
  if (!out) throw FormatError("write failure on checkpoint: " + path);
}

NetworkSpec read_checkpoint_spec(const std::string& path) {
  Reader r = open_checkpoint(path);
  const std::uint64_t len = r.u64();
  std::string spec(len, '\0');
  r.read(spec.data(), len);
  return parse_spec(spec, false);
}

void load_checkpoint(const std::string& path, Network& net) {
  Reader r = open_checkpoint(path);
  const std::uint64_t len = r.u64();
  std::string spec_text(len, '\0');
  r.read(spec_text.data(), len);
  NetworkSpec spec = parse_spec(spec_text, false);
  if (!(spec == net.spec()))
    throw FormatError("checkpoint spec does not match the network: " + path);

  auto stats = net.running_stats();
  const std::uint64_t count = r.u64();
  if (count != net.parameters().size() + stats.size())
    throw FormatError("checkpoint tensor count mismatch in " + path);
  for (auto& p : net.parameters())
    read_tensor_into(r, p.tensor.shape(), p.tensor.data(), p.name);
  for (auto& s : stats)
    read_tensor_into(r, {int(s.values->size())}, *s.values, s.name);
}

}  // namespace antkit
