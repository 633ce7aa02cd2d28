#pragma once

#include <stdexcept>
#include <string>

namespace masm {

// Invalid configuration values (schedule bounds, probabilities, scenario ids).
class config_error : public std::runtime_error {
public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated on-disk data.
class format_error : public std::runtime_error {
public:
  explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite input where finite values are required.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// The weighted design has no stimulus energy at some (frequency, voxel).
class singular_design_error : public std::runtime_error {
public:
  singular_design_error(const std::string& msg, int freq_index, long voxel_index)
      : std::runtime_error(msg + " (frequency index " + std::to_string(freq_index) +
                           ", voxel index " + std::to_string(voxel_index) + ")"),
        freq_index(freq_index),
        voxel_index(voxel_index) {}

  int freq_index;
  long voxel_index;
};

}  // namespace masm
