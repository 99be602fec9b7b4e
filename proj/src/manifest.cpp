#include "pimc/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "pimc/container.hpp"
#include "pimc/errors.hpp"

namespace pimc {
namespace {

void check_header(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("manifest references missing file " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::vector<char> head(kHeaderBytes);
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  std::size_t consumed = 0;
  try {
    // Header-only check: decode fails later on payload, which is fine here.
    decode_container(head, &consumed);
  } catch (const CorruptionError&) {
    if (head.size() < kHeaderBytes) throw CorruptionError(path.string() + ": truncated header");
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ValidationError("unknown split \"" + name + "\" (expected train|val|test)");
}

std::vector<const ManifestEntry*> DatasetManifest::in_split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& r : regions) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  DatasetManifest m;
  try {
    m.format_version = doc.at("format_version").get<int>();
    if (m.format_version != 1) throw FormatError("manifest: unsupported format_version " + std::to_string(m.format_version));
    std::set<std::string> ids;
    for (const auto& r : doc.at("regions")) {
      ManifestEntry e;
      e.region_id = r.at("region_id").get<std::string>();
      if (!ids.insert(e.region_id).second) throw ValidationError("manifest: duplicate region id " + e.region_id);
      e.cube = base / r.at("cube").get<std::string>();
      e.split = parse_split(r.at("split").get<std::string>());
      if (r.contains("labels") && !r.at("labels").is_null()) e.labels = base / r.at("labels").get<std::string>();
      m.regions.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  for (const auto& r : m.regions) {
    check_header(r.cube);
    if (r.labels) check_header(*r.labels);
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    const auto r = std::filesystem::relative(p, base.empty() ? std::filesystem::path(".") : base);
    return (r.empty() ? p : r).generic_string();
  };
  nlohmann::json doc;
  doc["format_version"] = manifest.format_version;
  doc["regions"] = nlohmann::json::array();
  for (const auto& r : manifest.regions) {
    nlohmann::json e;
    e["region_id"] = r.region_id;
    e["cube"] = rel(r.cube);
    e["split"] = split_name(r.split);
    e["labels"] = r.labels ? nlohmann::json(rel(*r.labels)) : nlohmann::json(nullptr);
    doc["regions"].push_back(std::move(e));
  }
  if (!base.empty()) std::filesystem::create_directories(base);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace pimc
