#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "hetmarket/network.hpp"
#include "hetmarket/ppo.hpp"

namespace hetmarket {

struct ExperimentConfig;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Versioned little-endian binary container: magic, version, config hash,
/// layer shapes, parameters as 64-bit floats, then normalizer statistics.
struct Checkpoint {
  PolicyParams params;
  ObservationNormalizer normalizer;
  std::uint64_t config_hash = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const PolicyParams& params,
                      const ObservationNormalizer& normalizer, std::uint64_t config_hash);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const ObservationNormalizer& normalizer, std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::string& path);

/// Rejects checkpoints whose network shape differs from the config's.
void check_compatible(const Checkpoint& checkpoint, const ExperimentConfig& config);

}  // namespace hetmarket
