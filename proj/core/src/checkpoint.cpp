#include "hfadapt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hfadapt/error.hpp"

namespace hfadapt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr unsigned char kMagic[4] = {'F', 'F', 'R', 'G'};

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const unsigned char> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> serialize(const ModelParameters& model) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.size()));
  for (const auto& e : model.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    const auto* p = reinterpret_cast<const unsigned char*>(e.value.data());
    out.insert(out.end(), p, p + e.value.numel() * sizeof(float));
  }
  return out;
}

ModelParameters deserialize(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("bad checkpoint magic", 0);
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const auto count = r.get<std::uint32_t>("record count");
  ModelParameters model;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t record_at = r.pos();
    const auto name_len = r.get<std::uint32_t>("name length");
    auto name_bytes = r.take(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::size_t rank_at = r.pos();
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw ParseError("implausible rank " + std::to_string(rank), rank_at);
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::size_t dim_at = r.pos();
      const auto d = r.get<std::uint32_t>("dimension");
      if (d == 0) throw ParseError("zero dimension", dim_at);
      shape.push_back(d);
      numel *= d;
      if (numel > bytes.size()) throw ParseError("record larger than file", dim_at);
    }
    auto payload = r.take(numel * sizeof(float), "values");
    std::vector<float> values(numel);
    std::memcpy(values.data(), payload.data(), payload.size());
    if (model.contains(name)) throw ParseError("duplicate record '" + name + "'", record_at);
    const bool trainable = !is_buffer_name(name);
    model.add(std::move(name), Tensor(std::move(shape), std::move(values)), trainable);
  }
  if (!r.done()) throw ParseError("trailing bytes after last record", r.pos());
  return model;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<unsigned char> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error("short read on " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const ModelParameters& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(model));
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

void validate_layout(const ModelParameters& loaded, const ModelParameters& expected) {
  for (const auto& e : expected.entries()) {
    if (!loaded.contains(e.name)) throw ValidationError("checkpoint lacks '" + e.name + "'");
    const Shape& got = loaded.at(e.name).shape();
    if (got != e.value.shape()) {
      throw ValidationError("checkpoint entry '" + e.name + "' has shape " + shape_str(got) +
                            ", expected " + shape_str(e.value.shape()));
    }
  }
  for (const auto& e : loaded.entries()) {
    if (!expected.contains(e.name)) throw ValidationError("unexpected checkpoint entry '" + e.name + "'");
  }
}

ModelParameters load_checkpoint(const std::filesystem::path& path, const ModelParameters& expected) {
  ModelParameters m = load_checkpoint(path);
  validate_layout(m, expected);
  return m;
}

}  // namespace hfadapt
