#pragma once

#include "cher/common.hpp"
#include "cher/mlp.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cher {

inline constexpr const char* kCheckpointMagic = "CHERCKPT1";

/// Container for networks and raw arrays.
///
/// On-disk layout:
///   line 1: the magic string CHERCKPT1
///   line 2: a single-line JSON header {"meta": {...}, "blocks": [...]}, where
///           each block records its name, kind ("mlp" or "array") and value
///           count; mlp blocks also record layer_dims, output_activation,
///           output_scale and output_offset
///   rest:   the values of every block, in header order, as little-endian
///           IEEE-754 64-bit reals
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Mlp>> networks;
  std::vector<std::pair<std::string, Vec>> arrays;

  const Mlp& network(const std::string& name) const;
  const Vec& array(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

// Writes to a temporary sibling and renames, so readers never see a partial file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cher
