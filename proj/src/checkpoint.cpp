#include "svs/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace svs {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw io_error("checkpoint truncated while reading a u32");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string encode_config(const NetworkConfig& cfg) {
  return strcat("base_channels=", cfg.base_channels, "\n",
                "depth=", cfg.depth, "\n",
                "input_size=", cfg.input_size, "\n",
                "aux_loss_weight=", format_double(cfg.aux_loss_weight), "\n",
                "seed=", cfg.seed, "\n");
}

NetworkConfig decode_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string line =
        text.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw io_error(strcat("malformed config line: ", line));
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  NetworkConfig cfg;
  try {
    cfg.base_channels = std::stoi(kv.at("base_channels"));
    cfg.depth = std::stoi(kv.at("depth"));
    cfg.input_size = std::stoi(kv.at("input_size"));
    cfg.aux_loss_weight = std::stod(kv.at("aux_loss_weight"));
    cfg.seed = std::stoull(kv.at("seed"));
  } catch (const std::exception& e) {
    throw io_error(strcat("malformed checkpoint config: ", e.what()));
  }
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path,
                     const SvsNet<float>& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(strcat("cannot write checkpoint ", path.string()));
  out.write("SVSN", 4);
  put_u32(out, kCheckpointVersion);
  const std::string cfg = encode_config(net.config());
  put_u32(out, std::uint32_t(cfg.size()));
  out.write(cfg.data(), std::streamsize(cfg.size()));
  for (const auto& [name, var] : net.named_parameters()) {
    put_u32(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    const Shape s = var->value.shape();
    put_u32(out, 4);
    for (Index d : {s.b, s.h, s.w, s.c}) put_u32(out, std::uint32_t(d));
    out.write(reinterpret_cast<const char*>(var->value.data()),
              std::streamsize(var->value.size() * 4));
  }
  if (!out) throw io_error(strcat("failed writing checkpoint ", path.string()));
}

SvsNet<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(strcat("cannot read checkpoint ", path.string()));
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SVSN", 4) != 0)
    throw io_error(strcat(path.string(), " is not a checkpoint (bad magic)"));
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw io_error(strcat("unsupported checkpoint version ", version));
  const std::uint32_t cfg_len = get_u32(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  if (!in) throw io_error("checkpoint truncated in config block");

  SvsNet<float> net(decode_config(cfg_text));
  for (const auto& [name, var] : net.named_parameters()) {
    const std::uint32_t name_len = get_u32(in);
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    if (!in || stored != name)
      throw io_error(strcat("checkpoint parameter '", stored,
                            "' does not match expected '", name, "'"));
    const std::uint32_t rank = get_u32(in);
    if (rank != 4)
      throw io_error(strcat("parameter ", name, " has rank ", rank,
                            ", expected 4"));
    Shape s{};
    s.b = Index(get_u32(in));
    s.h = Index(get_u32(in));
    s.w = Index(get_u32(in));
    s.c = Index(get_u32(in));
    if (s != var->value.shape())
      throw io_error(strcat("parameter ", name, " has shape ", to_string(s),
                            ", expected ", to_string(var->value.shape())));
    in.read(reinterpret_cast<char*>(var->value.data()),
            std::streamsize(var->value.size() * 4));
    if (!in) throw io_error(strcat("checkpoint truncated in ", name));
  }
  in.peek();
  if (!in.eof())
    throw io_error(strcat("trailing bytes after the last parameter in ",
                          path.string()));
  return net;
}

}  // namespace svs
