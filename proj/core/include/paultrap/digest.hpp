#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace paultrap::harness {

/// SHA-256 as 64 lowercase hex characters.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path &path);

} // namespace paultrap::harness
