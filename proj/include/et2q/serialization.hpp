#pragma once

// Binary model files. Layout is documented in FORMAT.md: "ET2Q" magic, a
// little-endian u16 format version, then one tagged section.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "et2q/learner.hpp"

namespace et2q {

inline constexpr std::uint16_t kFormatVersion = 1;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize(const OnlineModel& model);
std::vector<std::uint8_t> serialize(const Classifier& classifier);

OnlineModel deserialize_model(std::span<const std::uint8_t> bytes);
Classifier deserialize_classifier(std::span<const std::uint8_t> bytes);

void save_classifier(const Classifier& classifier, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace et2q
