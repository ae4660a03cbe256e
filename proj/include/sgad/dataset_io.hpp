#pragma once

#include <string>

#include "sgad/core.hpp"

namespace sgad {

inline constexpr char kDatasetMagic[] = "SGADDSET";
inline constexpr std::uint32_t kDatasetVersion = 1;

void dataset_write(const Dataset& d, const std::string& path);
Dataset dataset_read(const std::string& path);

}  // namespace sgad
