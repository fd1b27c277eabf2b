#include "cher/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace cher {
namespace {

using nlohmann::json;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
  return v;
}

void write_reals(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(data[i]));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
}

Vec read_reals(std::istream& in, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    char buf[8];
    if (!in.read(buf, 8)) throw ValidationError("checkpoint payload truncated");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    v[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  return v;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_json_array(const json& j) {
  auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

const Mlp& Checkpoint::network(const std::string& name) const {
  for (const auto& [n, net] : networks)
    if (n == name) return net;
  throw ValidationError("checkpoint has no network '" + name + "'");
}

const Vec& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, arr] : arrays)
    if (n == name) return arr;
  throw ValidationError("checkpoint has no array '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  json blocks = json::array();
  for (const auto& [name, net] : ckpt.networks) {
    blocks.push_back({{"name", name},
                      {"kind", "mlp"},
                      {"layer_dims", net.layer_dims()},
                      {"output_activation", to_string(net.output_activation())},
                      {"output_scale", to_std(net.output_scale())},
                      {"output_offset", to_std(net.output_offset())},
                      {"count", net.num_params()}});
  }
  for (const auto& [name, arr] : ckpt.arrays) {
    blocks.push_back({{"name", name}, {"kind", "array"}, {"count", arr.size()}});
  }
  json header = {{"meta", ckpt.meta}, {"blocks", blocks}};
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  for (const auto& [name, net] : ckpt.networks)
    write_reals(out, net.params().data(), net.num_params());
  for (const auto& [name, arr] : ckpt.arrays) write_reals(out, arr.data(), arr.size());
  if (!out) throw Error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw ValidationError("not a checkpoint (missing " + std::string(kCheckpointMagic) + ")");
  std::string header_line;
  if (!std::getline(in, header_line)) throw ValidationError("checkpoint header missing");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", json::object());
  for (const auto& block : header.at("blocks")) {
    const auto name = block.at("name").get<std::string>();
    const auto kind = block.at("kind").get<std::string>();
    const auto count = block.at("count").get<Eigen::Index>();
    if (kind == "mlp") {
      Mlp net(block.at("layer_dims").get<std::vector<int>>(),
              output_activation_from_string(block.at("output_activation").get<std::string>()),
              from_json_array(block.at("output_scale")), from_json_array(block.at("output_offset")));
      if (net.num_params() != count)
        throw ValidationError("checkpoint block '" + name + "' has inconsistent parameter count");
      ckpt.networks.emplace_back(name, std::move(net));
    } else if (kind == "array") {
      ckpt.arrays.emplace_back(name, Vec(count));
    } else {
      throw ValidationError("unknown checkpoint block kind '" + kind + "'");
    }
  }
  for (auto& [name, net] : ckpt.networks) net.set_params(read_reals(in, net.num_params()));
  for (auto& [name, arr] : ckpt.arrays) arr = read_reals(in, arr.size());
  if (in.peek() != std::char_traits<char>::eof())
    throw ValidationError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, ckpt);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace cher
