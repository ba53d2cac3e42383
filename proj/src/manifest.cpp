#include "ramstore/manifest.hpp"

#include <cstdio>
#include <span>

#include "ramstore/error.hpp"

namespace ramstore {

void validate_object_name(std::string_view name) {
  if (name.empty()) throw Error(Errc::InvalidName, "object name must not be empty");
  if (name.find('/') != std::string_view::npos) {
    throw Error(Errc::InvalidName, "object name '" + std::string(name) + "' contains '/'");
  }
}

std::uint64_t chunk_count(std::uint64_t total_size, std::uint64_t chunk_size) {
  if (chunk_size == 0) throw Error(Errc::InvalidArgument, "chunk size must be positive");
  return total_size / chunk_size + (total_size % chunk_size != 0 ? 1 : 0);
}

std::string chunk_name(std::string_view object_name, std::uint64_t index) {
  char digits[24];
  std::snprintf(digits, sizeof digits, "%08llu", static_cast<unsigned long long>(index));
  std::string out(object_name);
  out += '.';
  out += digits;
  return out;
}

std::string manifest_name(std::string_view object_name) {
  return std::string(object_name) + ".manifest";
}

void to_json(nlohmann::json& j, const ObjectManifest& m) {
  j = nlohmann::json{{"v", 1},
                     {"pool", m.object_id.pool},
                     {"name", m.object_id.name},
                     {"total_size_bytes", m.total_size_bytes},
                     {"chunk_size_bytes", m.chunk_size_bytes},
                     {"chunk_names", m.chunk_names},
                     {"checksum", m.checksum},
                     {"user_metadata", m.user_metadata},
                     {"generation", m.generation}};
}

void from_json(const nlohmann::json& j, ObjectManifest& m) {
  if (j.value("v", 0) != 1) throw Error(Errc::Protocol, "unsupported manifest version");
  m.object_id.pool = j.at("pool").get<std::string>();
  m.object_id.name = j.at("name").get<std::string>();
  m.total_size_bytes = j.at("total_size_bytes").get<std::uint64_t>();
  m.chunk_size_bytes = j.at("chunk_size_bytes").get<std::uint64_t>();
  m.chunk_names = j.at("chunk_names").get<std::vector<std::string>>();
  m.checksum = j.at("checksum").get<std::uint32_t>();
  m.user_metadata = j.value("user_metadata", Metadata{});
  m.generation = j.at("generation").get<std::uint64_t>();
}

std::vector<std::byte> encode_manifest(const ObjectManifest& manifest) {
  const std::string text = nlohmann::json(manifest).dump();
  const auto* p = reinterpret_cast<const std::byte*>(text.data());
  return {p, p + text.size()};
}

ObjectManifest decode_manifest(std::span<const std::byte> bytes) {
  const auto* p = reinterpret_cast<const char*>(bytes.data());
  auto j = nlohmann::json::parse(p, p + bytes.size(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ChecksumMismatch, "manifest is not valid JSON");
  try {
    return j.get<ObjectManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ChecksumMismatch, std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace ramstore
