#include "vgent/selector/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vgent::selector {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    if (n > in_.size() - pos_) throw InputError("checkpoint is truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > in_.size() - pos_) throw InputError("checkpoint is truncated");
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string serialize_checkpoint(const SelectorModel<double>& model) {
  auto& m = const_cast<SelectorModel<double>&>(model);
  Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(model.config.to_json());
  std::uint32_t blobs = 0;
  m.for_each([&](const std::string&, auto&) { ++blobs; });
  w.u32(blobs);
  m.for_each([&](const std::string& name, auto& mat) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(mat.rows()));
    w.u32(static_cast<std::uint32_t>(mat.cols()));
    w.raw(mat.data(), sizeof(double) * static_cast<std::size_t>(mat.size()));
  });
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.raw(&sum, sizeof sum);
  return std::move(w.bytes());
}

SelectorModel<double> deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + 4 + 8) throw InputError("checkpoint is truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw InputError("not a selector checkpoint (bad magic)");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof stored, sizeof stored);
  const std::string_view body(bytes.data(), bytes.size() - sizeof stored);

  Reader r(body);
  char magic[8];
  r.raw(magic, sizeof magic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  if (fnv1a(body.data(), body.size()) != stored) throw InputError("checkpoint checksum mismatch");

  SelectorModel<double> model(SelectorConfig::from_json(r.str()));
  const std::uint32_t blobs = r.u32();
  std::uint32_t expected = 0;
  model.for_each([&](const std::string&, auto&) { ++expected; });
  if (blobs != expected) throw InputError("checkpoint parameter count does not match its config");
  model.for_each([&](const std::string& name, auto& mat) {
    const std::string got = r.str();
    if (got != name) throw InputError("checkpoint parameter '" + got + "' where '" + name + "' expected");
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (rows != mat.rows() || cols != mat.cols()) throw InputError("checkpoint shape mismatch for " + name);
    r.raw(mat.data(), sizeof(double) * static_cast<std::size_t>(mat.size()));
  });
  if (!r.done()) throw InputError("trailing bytes in checkpoint");
  if (!model.all_finite()) throw InputError("checkpoint holds non-finite parameters");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const SelectorModel<double>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

SelectorModel<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

std::uint64_t checkpoint_checksum(const SelectorModel<double>& model) {
  const std::string bytes = serialize_checkpoint(model);
  std::uint64_t sum;
  std::memcpy(&sum, bytes.data() + bytes.size() - sizeof sum, sizeof sum);
  return sum;
}

}  // namespace vgent::selector
