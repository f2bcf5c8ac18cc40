#include "prefrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace prefrl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'R', 'F', 'L'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(in), "checkpoint: truncated file " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "checkpoint: cannot open for writing: " + path.string());

  out.write(kMagic, 4);
  write_raw(out, meta.version);
  write_raw(out, meta.seed);
  write_raw(out, meta.config_hash);
  write_raw(out, static_cast<std::uint32_t>(params.tensors.size()));

  for (const auto& [name, param] : params.tensors) {
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint32_t>(param.value.rank()));
    for (std::size_t e : param.value.shape) write_raw(out, static_cast<std::uint64_t>(e));
    write_raw(out, static_cast<std::uint8_t>(param.trainable ? 1 : 0));
    out.write(reinterpret_cast<const char*>(param.value.data.data()),
              static_cast<std::streamsize>(param.value.data.size() * sizeof(double)));
  }
  require(static_cast<bool>(out), "checkpoint: write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "checkpoint: missing or unreadable: " + path.string());

  char magic[4] = {};
  in.read(magic, 4);
  require(static_cast<bool>(in) && std::memcmp(magic, kMagic, 4) == 0,
          "checkpoint: bad magic in " + path.string());

  CheckpointMeta m;
  m.version = read_raw<std::uint32_t>(in, path);
  require(m.version == 1, "checkpoint: unsupported format version " + std::to_string(m.version));
  m.seed = read_raw<std::uint64_t>(in, path);
  m.config_hash = read_raw<std::uint64_t>(in, path);
  const auto count = read_raw<std::uint32_t>(in, path);

  ModelParams params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    require(static_cast<bool>(in), "checkpoint: truncated file " + path.string());

    const auto rank = read_raw<std::uint32_t>(in, path);
    require(rank >= 1 && rank <= 4, "checkpoint: implausible rank in " + path.string());
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = static_cast<std::size_t>(read_raw<std::uint64_t>(in, path));
      require(e > 0, "checkpoint: zero extent in " + path.string());
      numel *= e;
    }
    const auto trainable = read_raw<std::uint8_t>(in, path);

    std::vector<double> data(numel);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    require(static_cast<bool>(in), "checkpoint: truncated file " + path.string());

    require(params.tensors.count(name) == 0,
            "checkpoint: duplicate tensor '" + name + "' in " + path.string());
    params.tensors[name] = Param{Tensor(std::move(shape), std::move(data)), trainable != 0};
  }
  if (meta) *meta = m;
  return params;
}

}  // namespace prefrl
