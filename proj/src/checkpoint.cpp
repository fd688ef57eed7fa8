#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "outfit/error.hpp"
#include "outfit/training.hpp"

namespace outfit {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are written as native little-endian");

namespace {

constexpr const char* kFormat = "outfit-checkpoint";
constexpr int kVersion = 1;

std::string sha256_hex(const std::uint8_t* data, std::size_t size) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  if (!ck.model) throw Error(ErrorKind::kConfig, "checkpoint has no model");
  const Model& model = *ck.model;
  const auto specs = {model.image_backbone().spec(), model.text_backbone().spec()};
  for (const auto& s : specs) {
    if (s.kind == BackboneKind::kExternalPretrained) {
      throw Error(ErrorKind::kConfig, "checkpoints with external backbones are not supported");
    }
  }
  std::vector<std::uint8_t> payload;
  json arrays = json::array();
  for (const Param* p : model.parameters()) {
    const std::size_t nbytes = static_cast<std::size_t>(p->value.size()) * sizeof(double);
    arrays.push_back({{"name", p->name},
                      {"dtype", "f64"},
                      {"shape", {p->value.rows(), p->value.cols()}},
                      {"offset", payload.size()},
                      {"nbytes", nbytes}});
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(p->value.data());
    payload.insert(payload.end(), bytes, bytes + nbytes);
  }
  json manifest = {{"format", kFormat},
                   {"version", kVersion},
                   {"model_config", to_json(ck.model_config)},
                   {"train_config", to_json(ck.train_config)},
                   {"vocabulary", ck.vocabulary},
                   {"d_f", ck.model_config.feature_dim()},
                   {"d_e", ck.model_config.embed_dim},
                   {"backbones", {{"image", std::string(to_string(model.image_backbone().spec().kind))},
                                  {"text", std::string(to_string(model.text_backbone().spec().kind))}}},
                   {"threshold", ck.threshold},
                   {"metrics", ck.metrics},
                   {"data_root", ck.data_root},
                   {"arrays", arrays},
                   {"payload_bytes", payload.size()},
                   {"payload_sha256", sha256_hex(payload.data(), payload.size())}};
  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint " + path.string(), {path.string()});
  std::uint64_t len = text.size();
  std::uint8_t prefix[8];
  for (int i = 0; i < 8; ++i) prefix[i] = static_cast<std::uint8_t>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(prefix), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing checkpoint " + path.string(), {path.string()});
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "checkpoint not found: " + path.string(), {path.string()});
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorKind::kIntegrity, "corrupt checkpoint " + path.string() + ": " + why, {path.string()});
  };
  if (bytes.size() < 8) throw corrupt("truncated header");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
  if (len > bytes.size() - 8) throw corrupt("manifest length exceeds file size");
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw corrupt(std::string("manifest is not valid JSON: ") + e.what());
  }
  const std::size_t payload_at = 8 + len;
  const std::uint8_t* payload = bytes.data() + payload_at;
  const std::size_t payload_size = bytes.size() - payload_at;

  Checkpoint ck;
  try {
    if (manifest.at("format") != kFormat || manifest.at("version") != kVersion) throw corrupt("unknown format");
    if (manifest.at("payload_bytes").get<std::size_t>() != payload_size) throw corrupt("payload size mismatch");
    if (manifest.at("payload_sha256").get<std::string>() != sha256_hex(payload, payload_size)) {
      throw corrupt("payload hash mismatch");
    }
    ck.model_config = model_config_from_json(manifest.at("model_config"));
    ck.train_config = train_config_from_json(manifest.at("train_config"));
    ck.vocabulary = manifest.at("vocabulary").get<std::vector<std::string>>();
    ck.threshold = manifest.at("threshold");
    ck.metrics = manifest.at("metrics");
    ck.data_root = manifest.value("data_root", "");
    for (const char* which : {"image", "text"}) {
      if (parse_backbone_kind(manifest.at("backbones").at(which).get<std::string>()) ==
          BackboneKind::kExternalPretrained) {
        throw Error(ErrorKind::kConfig, "checkpoint needs an external backbone adapter");
      }
    }
    if (manifest.at("d_e").get<int>() != ck.model_config.embed_dim ||
        manifest.at("d_f").get<int>() != ck.model_config.feature_dim()) {
      throw Error(ErrorKind::kShape, "manifest dimensions (d_f, d_e) disagree with the model config");
    }
    ck.model = std::make_shared<Model>(ck.model_config, 0);
    const auto params = ck.model->parameters();
    const json& arrays = manifest.at("arrays");
    if (arrays.size() != params.size()) {
      throw Error(ErrorKind::kShape, "checkpoint has " + std::to_string(arrays.size()) + " arrays, model expects " +
                                         std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& a = arrays[i];
      Param& p = *params[i];
      if (a.at("name") != p.name) throw corrupt("array " + std::to_string(i) + " is " + a.at("name").get<std::string>() + ", expected " + p.name);
      if (a.at("dtype") != "f64") throw corrupt("unsupported dtype for " + p.name);
      const auto rows = a.at("shape").at(0).get<Eigen::Index>();
      const auto cols = a.at("shape").at(1).get<Eigen::Index>();
      if (rows != p.value.rows() || cols != p.value.cols()) {
        throw Error(ErrorKind::kShape, "array " + p.name + " has shape " + std::to_string(rows) + "x" +
                                           std::to_string(cols) + ", model expects " + std::to_string(p.value.rows()) +
                                           "x" + std::to_string(p.value.cols()),
                    {p.name});
      }
      const auto offset = a.at("offset").get<std::size_t>();
      const auto nbytes = a.at("nbytes").get<std::size_t>();
      if (nbytes != static_cast<std::size_t>(p.value.size()) * sizeof(double) || offset + nbytes > payload_size) {
        throw corrupt("array " + p.name + " lies outside the payload");
      }
      std::memcpy(p.value.data(), payload + offset, nbytes);
    }
  } catch (const json::exception& e) {
    throw corrupt(std::string("malformed manifest: ") + e.what());
  }
  return ck;
}

}  // namespace outfit
