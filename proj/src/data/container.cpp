#include "pit/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pit {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(origin_ + ": truncated container while reading " + what + " at byte " + std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(const NamedTensors& tensors) {
  std::string out = "PITD";
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

NamedTensors decode_tensors(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "PITD") != 0) throw DataError(origin + ": bad magic, not a PITD container");
  Reader r(bytes, origin);
  r.bytes(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kContainerVersion) {
    throw DataError(origin + ": unsupported container version " + std::to_string(version) + " (expected " +
                    std::to_string(kContainerVersion) + ")");
  }
  const std::uint32_t count = r.u32("record count");
  NamedTensors out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = r.u32("name length");
    std::string name = r.bytes(name_len, "name");
    const std::uint32_t rank = r.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("extent"));
    const std::size_t n = numel_of(shape);
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(std::bit_cast<float>(r.u32("payload")));
    out.emplace_back(std::move(name), Tensor(shape, std::move(data)));
  }
  if (!r.done()) throw DataError(origin + ": trailing bytes after the last record");
  return out;
}

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  const std::string bytes = encode_tensors(tensors);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path);
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_tensors(ss.str(), path);
}

}  // namespace pit
