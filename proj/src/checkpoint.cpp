#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hamassim/io.hpp"
#include "hamassim/models.hpp"

namespace hamassim {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double unhex(const json& j, const std::string& field) {
  if (!j.is_string()) fail(ErrorCode::MalformedCheckpoint, field + ": expected a hex-float string");
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorCode::MalformedCheckpoint, field + ": cannot parse '" + s + "'");
  return v;
}

json hex_array(const Eigen::Ref<const Vector>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(hex(v[i]));
  return a;
}

Vector read_hex_array(const json& j, const std::string& field, Eigen::Index expected) {
  if (!j.is_array()) fail(ErrorCode::MalformedCheckpoint, field + ": expected an array");
  if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected) {
    fail(ErrorCode::MalformedCheckpoint, field + ": expected " + std::to_string(expected) + " entries, found " +
                                             std::to_string(j.size()));
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = unhex(j[i], field);
  return v;
}

const json& require(const json& doc, const char* field) {
  if (!doc.contains(field)) fail(ErrorCode::MalformedCheckpoint, std::string("missing field '") + field + "'");
  return doc.at(field);
}

}  // namespace

std::string checkpoint_to_string(const LearnedModel& model) {
  const MlpParams& net = model.net();
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = to_string(model.kind());
  doc["layer_sizes"] = net.layer_sizes;
  doc["activation"] = "tanh";
  json weights = json::array();
  json biases = json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    // Row-major flattening of the out x in weight matrix.
    const Matrix w = net.weight(l);
    Vector row_major(w.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) row_major[k++] = w(i, j);
    }
    weights.push_back(hex_array(row_major));
    biases.push_back(hex_array(net.bias(l)));
  }
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);
  doc["norm_min"] = hex_array(model.norm().min);
  doc["norm_max"] = hex_array(model.norm().max);
  doc["dt"] = hex(model.dt());
  doc["substeps"] = model.substeps();
  doc["field_scale"] = hex(model.field_scale());
  doc["W"] = model.window();
  doc["seed"] = model.seed;
  doc["system"] = model.system;
  return doc.dump(1) + "\n";
}

LearnedModel checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedCheckpoint, std::string("not a valid document: ") + e.what());
  }
  try {
    const int version = require(doc, "format_version").get<int>();
    if (version > kFormatVersion || version < 1) {
      fail(ErrorCode::MalformedCheckpoint, "unsupported format_version " + std::to_string(version));
    }
    if (require(doc, "activation").get<std::string>() != "tanh") {
      fail(ErrorCode::MalformedCheckpoint, "activation: only tanh is supported");
    }
    const ModelKind kind = model_kind_from_string(require(doc, "kind").get<std::string>());
    MlpParams net = MlpParams::zeros(require(doc, "layer_sizes").get<std::vector<int>>());
    const json& weights = require(doc, "weights");
    const json& biases = require(doc, "biases");
    if (!weights.is_array() || !biases.is_array() || static_cast<int>(weights.size()) != net.num_layers() ||
        static_cast<int>(biases.size()) != net.num_layers()) {
      fail(ErrorCode::MalformedCheckpoint, "weights/biases: need one entry per layer");
    }
    for (int l = 0; l < net.num_layers(); ++l) {
      auto w = net.weight(l);
      const Vector flat =
          read_hex_array(weights[static_cast<std::size_t>(l)], "weights[" + std::to_string(l) + "]", w.size());
      Eigen::Index k = 0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[k++];
      }
      net.bias(l) = read_hex_array(biases[static_cast<std::size_t>(l)], "biases[" + std::to_string(l) + "]",
                                   net.bias(l).size());
    }
    const Eigen::Index dim = net.input_dim();
    NormalizationStats norm{read_hex_array(require(doc, "norm_min"), "norm_min", dim),
                            read_hex_array(require(doc, "norm_max"), "norm_max", dim)};
    const double dt = unhex(require(doc, "dt"), "dt");
    LearnedModel model(kind, std::move(net), std::move(norm), dt, require(doc, "W").get<int>(),
                       require(doc, "substeps").get<int>(),
                       doc.contains("field_scale") ? unhex(doc["field_scale"], "field_scale") : 1.0);
    model.seed = doc.value("seed", std::uint64_t{0});
    model.system = doc.value("system", std::string());
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedCheckpoint, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedCheckpoint) throw;
    fail(ErrorCode::MalformedCheckpoint, e.what());
  }
}

void save_checkpoint(const LearnedModel& model, const std::string& path) {
  io::write_file_atomic(path, checkpoint_to_string(model));
}

LearnedModel load_checkpoint(const std::string& path) { return checkpoint_from_string(io::read_file(path)); }

}  // namespace hamassim
