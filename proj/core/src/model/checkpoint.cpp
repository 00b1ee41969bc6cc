#include "ciat/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ciat/error.hpp"

namespace ciat::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U take(std::istream& in, const std::string& what) {
  U value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (!in) throw FormatError("checkpoint truncated while reading " + what);
  return value;
}

std::string take_bytes(std::istream& in, std::uint64_t n, const std::string& what) {
  if (n > (1ULL << 32)) throw FormatError("checkpoint " + what + " length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("checkpoint truncated while reading " + what);
  return s;
}

KeyValues read_prelude(std::istream& in, const std::filesystem::path& path) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) {
    throw FormatError(path.string() + ": not a checkpoint (expected format tag " + kCheckpointMagic + ")");
  }
  const auto len = take<std::uint64_t>(in, "header length");
  return KeyValues::parse(take_bytes(in, len, "header"));
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

template <typename T>
void save_container(const std::filesystem::path& path, const KeyValues& header,
                    const ParamStore<T>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << kCheckpointMagic << '\n';
  const std::string text = header.to_text("=");
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, var] : tensors.all()) {
    const Tensor<T>& t = var.value();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, sizeof(T) == 4 ? 0 : 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.numel() * sizeof(T)));
  }
  if (!out) throw Error("failed writing " + path.string());
}

template <typename T>
Container<T> load_container(const std::filesystem::path& path) {
  auto in = open_in(path);
  Container<T> c;
  c.header = read_prelude(in, path);
  const auto count = take<std::uint64_t>(in, "tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint32_t>(in, "name length");
    const std::string name = take_bytes(in, name_len, "tensor name");
    const auto dtype = take<std::uint8_t>(in, "dtype of " + name);
    if (dtype > 1) throw FormatError("tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
    const auto rank = take<std::uint32_t>(in, "rank of " + name);
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = take<std::uint64_t>(in, "shape of " + name);
    const std::size_t n = shape_numel(shape);
    Tensor<T> t(shape);
    if (dtype == 0) {
      std::vector<float> raw(n);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)));
      std::copy(raw.begin(), raw.end(), t.raw());
    } else {
      std::vector<double> raw(n);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(double)));
      std::copy(raw.begin(), raw.end(), t.raw());
    }
    if (!in) throw FormatError("checkpoint truncated in payload of '" + name + "'");
    c.tensors.add(name, std::move(t));
  }
  return c;
}

KeyValues read_header(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_prelude(in, path);
}

template <typename T>
void save_model(const std::filesystem::path& path, const Transformer<T>& model, const KeyValues& extra) {
  KeyValues header = extra;
  header.set("kind", "model");
  const KeyValues model_kv = model.config().to_kv();
  for (const auto& [k, v] : model_kv.entries()) header.set("model." + k, v);
  save_container(path, header, model.params());
}

template <typename T>
Transformer<T> load_model(const std::filesystem::path& path, KeyValues* header) {
  auto c = load_container<T>(path);
  if (c.header.get_or("kind", "") != "model") {
    throw FormatError(path.string() + " is not a model checkpoint (kind=" + c.header.get_or("kind", "?") + ")");
  }
  const ModelConfig config = ModelConfig::from_kv(c.header.with_prefix("model."));
  if (header) *header = c.header;
  return Transformer<T>(config, std::move(c.tensors));
}

#define CIAT_CKPT(T)                                                                              \
  template void save_container<T>(const std::filesystem::path&, const KeyValues&, const ParamStore<T>&); \
  template Container<T> load_container<T>(const std::filesystem::path&);                         \
  template void save_model<T>(const std::filesystem::path&, const Transformer<T>&, const KeyValues&); \
  template Transformer<T> load_model<T>(const std::filesystem::path&, KeyValues*);
CIAT_CKPT(float)
CIAT_CKPT(double)
#undef CIAT_CKPT

}  // namespace ciat::model
