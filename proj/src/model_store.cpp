#include "adresp/model_store.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <unistd.h>

#include "adresp/errors.hpp"

namespace adresp {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  static constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned i = 0; i < len; ++i) {
    hex += kDigits[digest[i] >> 4];
    hex += kDigits[digest[i] & 15];
  }
  return hex;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string model_file_name(std::string_view campaign) {
  std::string name;
  for (unsigned char c : campaign) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      name += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      name += buf;
    }
  }
  // "." and ".." are not usable file names.
  if (name.empty() || name.find_first_not_of('.') == std::string::npos) name = "%2E" + name;
  return name + ".json";
}

void write_model_dir(const std::filesystem::path& dir, std::span<const BinaryModel> models) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& m : models) {
    m.validate();
    const auto text = dump_model(m);
    const auto file = model_file_name(m.campaign);
    write_file_atomic(dir / file, text);
    entries.push_back({{"campaign", m.campaign},
                       {"file", file},
                       {"sha256", sha256_hex(text)},
                       {"bytes", text.size()}});
  }
  const nlohmann::json manifest = {{"format", "adresp-models/1"}, {"models", entries}};
  write_file_atomic(dir / kManifestName, manifest.dump(2) + "\n");
}

BinaryModel load_model_file(const std::filesystem::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const std::runtime_error& e) {
    throw InvalidModel(e.what());
  }
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw InvalidModel(file.string() + ": not JSON");
  return model_from_json(doc);
}

std::vector<BinaryModel> load_model_dir(const std::filesystem::path& dir) {
  std::string text;
  try {
    text = read_file(dir / kManifestName);
  } catch (const std::runtime_error& e) {
    throw InvalidModel(e.what());
  }
  const auto manifest = nlohmann::json::parse(text, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("models")) {
    throw InvalidModel((dir / kManifestName).string() + ": malformed manifest");
  }
  std::vector<BinaryModel> out;
  try {
    for (const auto& entry : manifest.at("models")) {
      const auto file = dir / entry.at("file").get<std::string>();
      std::string body;
      try {
        body = read_file(file);
      } catch (const std::runtime_error& e) {
        throw InvalidModel(e.what());
      }
      if (sha256_hex(body) != entry.at("sha256").get<std::string>()) {
        throw InvalidModel(file.string() + ": content hash does not match the manifest");
      }
      const auto doc = nlohmann::json::parse(body, nullptr, false);
      if (doc.is_discarded()) throw InvalidModel(file.string() + ": not JSON");
      auto model = model_from_json(doc);
      if (model.campaign != entry.at("campaign").get<std::string>()) {
        throw InvalidModel(file.string() + ": campaign differs from the manifest");
      }
      out.push_back(std::move(model));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModel(std::string("malformed manifest: ") + e.what());
  }
  return out;
}

}  // namespace adresp
