#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adresp/binary_model.hpp"

namespace adresp {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Writes to a temporary sibling and renames it over the target, so readers
/// never observe a partial file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// File name for a campaign's model: bytes outside [A-Za-z0-9._-] are
/// percent-encoded, so distinct campaigns never collide.
std::string model_file_name(std::string_view campaign);

inline constexpr std::string_view kManifestName = "manifest.json";

/// Writes one <campaign>.json per model plus manifest.json listing each
/// file with its SHA-256 and size. Existing model files of other campaigns
/// are left alone but dropped from the manifest.
void write_model_dir(const std::filesystem::path& dir, std::span<const BinaryModel> models);

/// Loads every model listed in the manifest, checking hashes. Throws
/// InvalidModel on a missing file, a hash mismatch or a bad document.
std::vector<BinaryModel> load_model_dir(const std::filesystem::path& dir);

BinaryModel load_model_file(const std::filesystem::path& file);

}  // namespace adresp
