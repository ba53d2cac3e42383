#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ramstore {

struct ObjectId {
  std::string pool;
  std::string name;

  friend auto operator<=>(const ObjectId&, const ObjectId&) = default;
};

/// Throws InvalidName for empty names or names containing '/'.
void validate_object_name(std::string_view name);

using Metadata = std::map<std::string, std::string>;

/// The metadata part of an object: how the payload was chunked, where the
/// pieces are named, and the CRC-32 of the whole payload.
///
/// `generation` distinguishes successive versions of the same object; chunk
/// names are stable across versions, the generation is carried beside them.
struct ObjectManifest {
  ObjectId object_id;
  std::uint64_t total_size_bytes = 0;
  std::uint64_t chunk_size_bytes = 0;
  std::vector<std::string> chunk_names;
  std::uint32_t checksum = 0;
  Metadata user_metadata;
  std::uint64_t generation = 0;

  friend bool operator==(const ObjectManifest&, const ObjectManifest&) = default;
};

std::uint64_t chunk_count(std::uint64_t total_size, std::uint64_t chunk_size);

/// name + "." + zero-padded index (8 digits).
std::string chunk_name(std::string_view object_name, std::uint64_t index);
/// name + ".manifest"
std::string manifest_name(std::string_view object_name);

void to_json(nlohmann::json& j, const ObjectManifest& manifest);
void from_json(const nlohmann::json& j, ObjectManifest& manifest);

std::vector<std::byte> encode_manifest(const ObjectManifest& manifest);
ObjectManifest decode_manifest(std::span<const std::byte> bytes);

}  // namespace ramstore
