#include "uvsim/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "uvsim/errors.hpp"
#include "uvsim/prf.hpp"

namespace uvsim {

namespace {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

double require_positive(const nlohmann::json& j, const std::string& key,
                        const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw data_error(where + ": missing numeric field '" + key + "'");
  double v = j[key].get<double>();
  if (!(v > 0.0) || !std::isfinite(v))
    throw data_error(where + ": field '" + key + "' must be positive");
  return v;
}

}  // namespace

Model load_model(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw data_error("cannot open manifest: " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("manifest parse error in " + manifest_path + ": " +
                     e.what());
  }
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw data_error(manifest_path + ": manifest needs a non-empty 'layers' array");

  const std::filesystem::path dir =
      std::filesystem::path(manifest_path).parent_path();

  Model model;
  model.name = j.value("name", "unnamed");
  int index = 0;
  for (const auto& lj : j["layers"]) {
    const std::string where =
        manifest_path + ": layer " + std::to_string(index);
    LayerSpecInfo spec;
    spec.name = lj.value("name", "layer" + std::to_string(index));
    if (!lj.contains("in_dim") || !lj.contains("out_dim"))
      throw data_error(where + ": missing in_dim/out_dim");
    spec.in_dim = lj["in_dim"].get<int>();
    spec.out_dim = lj["out_dim"].get<int>();
    if (spec.in_dim < 1 || spec.out_dim < 1)
      throw data_error(where + ": dimensions must be >= 1");
    if (!lj.contains("weights") || !lj.contains("bias"))
      throw data_error(where + ": missing weights/bias file fields");
    spec.weights_file = lj["weights"].get<std::string>();
    spec.bias_file = lj["bias"].get<std::string>();
    spec.weight_scale = require_positive(lj, "weight_scale", where);
    spec.input_scale = require_positive(lj, "input_scale", where);
    spec.output_scale = require_positive(lj, "output_scale", where);
    const std::string act = lj.value("activation", "relu");
    if (act == "relu") {
      spec.relu = true;
    } else if (act == "none") {
      spec.relu = false;
    } else {
      throw data_error(where + ": unknown activation '" + act +
                       "' (expected relu|none)");
    }

    if (index > 0) {
      const LayerSpecInfo& prev = model.specs.back();
      if (prev.out_dim != spec.in_dim)
        throw data_error(where + ": in_dim " + std::to_string(spec.in_dim) +
                         " does not chain from previous out_dim " +
                         std::to_string(prev.out_dim));
      if (prev.relu && prev.output_scale != spec.input_scale)
        throw data_error(where +
                         ": input_scale does not chain from previous "
                         "output_scale");
    }

    LayerDef layer;
    layer.name = spec.name;

    const std::string wpath = (dir / spec.weights_file).string();
    std::vector<char> wbytes = read_file(wpath);
    const size_t wexpect =
        static_cast<size_t>(spec.out_dim) * static_cast<size_t>(spec.in_dim);
    if (wbytes.size() != wexpect)
      throw data_error(wpath + ": expected " + std::to_string(wexpect) +
                       " weight bytes, found " + std::to_string(wbytes.size()));
    layer.weights = QTensor::zeros(spec.out_dim, spec.in_dim, spec.weight_scale);
    for (size_t i = 0; i < wbytes.size(); ++i)
      layer.weights.data[i] = static_cast<int8_t>(wbytes[i]);

    const std::string bpath = (dir / spec.bias_file).string();
    std::vector<char> bbytes = read_file(bpath);
    const size_t bexpect = static_cast<size_t>(spec.out_dim) * 4;
    if (bbytes.size() != bexpect)
      throw data_error(bpath + ": expected " + std::to_string(bexpect) +
                       " bias bytes, found " + std::to_string(bbytes.size()));
    layer.bias.resize(spec.out_dim);
    for (int i = 0; i < spec.out_dim; ++i) {
      uint32_t u = 0;
      for (int b = 3; b >= 0; --b)
        u = (u << 8) | static_cast<uint8_t>(bbytes[i * 4 + b]);
      const int32_t v = static_cast<int32_t>(u);
      if (v < kAccMin || v > kAccMax)
        throw data_error(bpath + ": bias " + std::to_string(i) + " value " +
                         std::to_string(v) + " outside 24-bit range");
      layer.bias[i] = v;
    }

    layer.out_scale = spec.output_scale;
    layer.relu = spec.relu;

    model.specs.push_back(std::move(spec));
    model.layers.push_back(std::move(layer));
    ++index;
  }
  return model;
}

IdxData load_idx(const std::string& path) {
  std::vector<char> bytes = read_file(path);
  if (bytes.size() < 4)
    throw data_error(path + ": truncated at byte " +
                     std::to_string(bytes.size()) + " (header incomplete)");
  const uint8_t z0 = static_cast<uint8_t>(bytes[0]);
  const uint8_t z1 = static_cast<uint8_t>(bytes[1]);
  const uint8_t dtype = static_cast<uint8_t>(bytes[2]);
  const uint8_t ndims = static_cast<uint8_t>(bytes[3]);
  if (z0 != 0 || z1 != 0 || dtype != 0x08 || ndims == 0)
    throw data_error(path + ": bad IDX magic");

  const size_t header = 4 + static_cast<size_t>(ndims) * 4;
  if (bytes.size() < header)
    throw data_error(path + ": truncated at byte " +
                     std::to_string(bytes.size()) + " (expected " +
                     std::to_string(header) + "-byte header)");

  IdxData out;
  size_t total = 1;
  for (int d = 0; d < ndims; ++d) {
    uint32_t size = 0;
    for (int b = 0; b < 4; ++b)
      size = (size << 8) | static_cast<uint8_t>(bytes[4 + d * 4 + b]);
    out.dims.push_back(static_cast<int>(size));
    total *= size;
  }
  const size_t expected = header + total;
  if (bytes.size() < expected)
    throw data_error(path + ": truncated at byte " +
                     std::to_string(bytes.size()) + " (expected " +
                     std::to_string(expected) + " bytes)");
  out.bytes.assign(bytes.begin() + header, bytes.begin() + expected);
  return out;
}

Dataset load_dataset(const std::string& images_path,
                     const std::string& labels_path) {
  IdxData images = load_idx(images_path);
  if (images.dims.size() != 3)
    throw data_error(images_path + ": bad IDX magic (images need 3 dims, found " +
                     std::to_string(images.dims.size()) + ")");
  IdxData labels = load_idx(labels_path);
  if (labels.dims.size() != 1)
    throw data_error(labels_path + ": bad IDX magic (labels need 1 dim, found " +
                     std::to_string(labels.dims.size()) + ")");
  if (images.dims[0] != labels.dims[0])
    throw data_error(images_path + ": image count " +
                     std::to_string(images.dims[0]) + " does not match label count " +
                     std::to_string(labels.dims[0]));
  Dataset data;
  data.count = images.dims[0];
  data.rows = images.dims[1];
  data.cols = images.dims[2];
  data.images = std::move(images.bytes);
  data.labels = std::move(labels.bytes);
  return data;
}

QTensor images_to_activations(const Dataset& data,
                              std::span<const int> indices, double scale) {
  const int pixels = data.rows * data.cols;
  const int B = static_cast<int>(indices.size());
  if (B < 1) throw config_error("images_to_activations: empty selection");
  QTensor acts = QTensor::zeros(pixels, B, scale);
  for (int j = 0; j < B; ++j) {
    const int idx = indices[j];
    if (idx < 0 || idx >= data.count)
      throw config_error("images_to_activations: index " + std::to_string(idx) +
                         " out of range");
    const uint8_t* img = &data.images[static_cast<size_t>(idx) * pixels];
    for (int k = 0; k < pixels; ++k) {
      const double x = static_cast<double>(img[k]) / 255.0;
      double q = std::nearbyint(x / scale);
      if (q > 127.0) q = 127.0;
      acts.data[static_cast<size_t>(k) * B + j] = static_cast<int8_t>(q);
    }
  }
  return acts;
}

Splits derive_splits(int count, int validation_size, int test_size,
                     uint64_t seed) {
  if (validation_size < 0 || test_size < 0)
    throw config_error("derive_splits: negative split sizes");
  if (validation_size + test_size > count)
    throw config_error("derive_splits: splits need " +
                       std::to_string(validation_size + test_size) +
                       " images but dataset has " + std::to_string(count));
  std::vector<int> order(count);
  for (int i = 0; i < count; ++i) order[i] = i;
  // Fisher-Yates keyed on (seed, position): deterministic across platforms.
  for (int i = count - 1; i > 0; --i) {
    const uint64_t h = hash_tuple(
        seed, static_cast<uint64_t>(Stream::kSplitShuffle), i);
    const uint32_t j = bounded(h, static_cast<uint32_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  Splits splits;
  splits.validation.assign(order.begin(), order.begin() + validation_size);
  splits.test.assign(order.begin() + validation_size,
                     order.begin() + validation_size + test_size);
  return splits;
}

}  // namespace uvsim
