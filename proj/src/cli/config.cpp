#include "internal.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dtl::cli {

namespace {

bool compatible(const json& def, const json& value) {
  if (def.is_number()) return value.is_number() && (def.is_number_float() || !value.is_number_float());
  if (def.is_array()) return value.is_array();
  return def.type() == value.type();
}

}  // namespace

json merge_config_file(const std::filesystem::path& path, const json& defaults,
                       const std::string& command) {
  json file;
  try {
    file = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": malformed JSON: " + e.what());
  }
  if (!file.is_object()) throw UsageError(path.string() + ": config must be a JSON object");
  if (!file.contains("version")) throw UsageError(path.string() + ": missing 'version'");
  if (file.at("version") != kConfigVersion) {
    throw UsageError(path.string() + ": unsupported config version " + file.at("version").dump());
  }
  json merged = defaults;
  for (const auto& item : file.items()) {
    if (item.key() == "version") continue;
    if (!defaults.contains(item.key())) {
      throw UsageError(path.string() + ": unknown key '" + item.key() + "' for " + command);
    }
    if (!compatible(defaults.at(item.key()), item.value())) {
      throw UsageError(path.string() + ": '" + item.key() + "' has the wrong type (expected " +
                       std::string(defaults.at(item.key()).type_name()) + ")");
    }
    merged[item.key()] = item.value();
  }
  return merged;
}

void write_snapshot(const json& resolved, const std::filesystem::path& path) {
  json out = json::object();
  out["version"] = kConfigVersion;
  for (const auto& item : resolved.items()) {
    if (item.key() != "version") out[item.key()] = item.value();
  }
  write_text(path, out.dump(2) + "\n");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("DTL_OUTPUT_ROOT"); env && *env) return env;
  return "dtl-output";
}

}  // namespace dtl::cli
