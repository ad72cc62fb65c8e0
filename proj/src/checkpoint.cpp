#include "tabfuse/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tabfuse/errors.hpp"
#include "tabfuse/rng.hpp"

namespace tabfuse {

namespace {

using nlohmann::json;

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json params_json(const std::vector<Tensor>& params) {
  json arr = json::array();
  for (const Tensor& p : params) {
    json entry;
    entry["name"] = p.name();
    entry["rows"] = p.rows();
    entry["cols"] = p.cols();
    json data = json::array();
    const Matrix& m = p.value();
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    entry["data"] = std::move(data);
    arr.push_back(std::move(entry));
  }
  return arr;
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("checkpoint: cannot write " + path);
  }
  out << doc.dump(2) << '\n';
}

json read_json(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingInputError("checkpoint not found: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingInputError("checkpoint not readable: " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
}

void check_header(const json& doc, const std::string& path,
                  const std::string& kind, std::uint64_t expected_hash) {
  if (doc.value("format_version", 0) != 1) {
    throw DataError("checkpoint " + path + ": unsupported format version");
  }
  if (doc.value("kind", "") != kind) {
    throw DataError("checkpoint " + path + ": kind '" +
                    doc.value("kind", "") + "', expected '" + kind + "'");
  }
  if (doc.value("schema_hash", "") != hash_hex(expected_hash)) {
    throw DataError("checkpoint " + path +
                    ": schema hash mismatch; the file was written against a "
                    "different schema");
  }
}

void restore_params(const json& doc, const std::string& path,
                    std::vector<Tensor>& params) {
  const json& arr = doc.at("params");
  if (arr.size() != params.size()) {
    throw DataError("checkpoint " + path + ": expected " +
                    std::to_string(params.size()) + " parameters, found " +
                    std::to_string(arr.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = arr.at(i);
    Tensor& p = params[i];
    if (entry.value("name", "") != p.name()) {
      throw DataError("checkpoint " + path + ": parameter " +
                      std::to_string(i) + " is '" + entry.value("name", "") +
                      "', expected '" + p.name() + "'");
    }
    const Index rows = entry.value("rows", Index{0});
    const Index cols = entry.value("cols", Index{0});
    if (rows != p.rows() || cols != p.cols()) {
      throw DataError("checkpoint " + path + ": parameter '" + p.name() +
                      "' has shape " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", expected " +
                      std::to_string(p.rows()) + "x" +
                      std::to_string(p.cols()));
    }
    const json& data = entry.at("data");
    if (static_cast<Index>(data.size()) != rows * cols) {
      throw DataError("checkpoint " + path + ": parameter '" + p.name() +
                      "' has " + std::to_string(data.size()) + " values");
    }
    Matrix& m = p.mutable_value();
    Index idx = 0;
    for (Index i2 = 0; i2 < rows; ++i2) {
      for (Index j = 0; j < cols; ++j) {
        m(i2, j) = data.at(static_cast<std::size_t>(idx++)).get<double>();
      }
    }
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const NaimModel& model,
                     std::uint64_t schema_hash) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "naim";
  doc["schema_hash"] = hash_hex(schema_hash);
  doc["config"] = {{"d_model", model.config().d_model},
                   {"heads", model.config().heads},
                   {"layers", model.config().layers},
                   {"ffn", model.config().ffn},
                   {"dropout", model.config().dropout}};
  doc["params"] = params_json(model.parameters());
  write_json(path, doc);
}

void save_checkpoint(const std::string& path, const MlpModel& model,
                     std::uint64_t schema_hash) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "mlp";
  doc["schema_hash"] = hash_hex(schema_hash);
  doc["config"] = {{"input", model.config().input},
                   {"hidden", model.config().hidden},
                   {"classes", model.config().classes}};
  doc["params"] = params_json(model.parameters());
  write_json(path, doc);
}

NaimModel load_naim_checkpoint(const std::string& path,
                               const FeatureSchema& schema) {
  const json doc = read_json(path);
  check_header(doc, path, "naim", schema.hash());
  NaimConfig config;
  try {
    const json& c = doc.at("config");
    config.d_model = c.at("d_model").get<int>();
    config.heads = c.at("heads").get<int>();
    config.layers = c.at("layers").get<int>();
    config.ffn = c.at("ffn").get<int>();
    config.dropout = c.at("dropout").get<double>();
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  auto scratch = substream(0, "checkpoint-load");
  NaimModel model(schema, config, scratch);
  restore_params(doc, path, model.parameters());
  return model;
}

MlpModel load_mlp_checkpoint(const std::string& path,
                             std::uint64_t expected_schema_hash) {
  const json doc = read_json(path);
  check_header(doc, path, "mlp", expected_schema_hash);
  MlpConfig config;
  try {
    const json& c = doc.at("config");
    config.input = c.at("input").get<int>();
    config.hidden = c.at("hidden").get<std::vector<int>>();
    config.classes = c.at("classes").get<int>();
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  auto scratch = substream(0, "checkpoint-load");
  MlpModel model(config, scratch);
  restore_params(doc, path, model.parameters());
  return model;
}

}  // namespace tabfuse
