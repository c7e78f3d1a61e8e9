#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>

#include "fcgaga/config.hpp"
#include "fcgaga/params.hpp"
#include "fcgaga/train.hpp"

namespace fcgaga {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::optional<AdamState> optimizer;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

/// Binary, bit-exact. Written to a temporary file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws CheckpointError on a malformed file or parameters that do not
/// match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fcgaga
