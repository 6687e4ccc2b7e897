#include "metadapt/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "metadapt/errors.hpp"

namespace metadapt {

void save_param_set(const std::string& path, const ParamSet& params) {
  nlohmann::json doc;
  doc["format"] = "paramset-v1";
  auto& entries = doc["entries"] = nlohmann::json::array();
  for (const auto& [name, tensor] : params) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape();
    entry["values"] = tensor.values();
    entries.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << doc.dump(2) << "\n";
}

ParamSet load_param_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != "paramset-v1") {
    throw DataError("checkpoint '" + path + "' has an unknown format");
  }
  ParamSet params;
  for (const auto& entry : doc.at("entries")) {
    std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::vector<double> values = entry.at("values").get<std::vector<double>>();
    params.add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
  }
  return params;
}

}  // namespace metadapt
