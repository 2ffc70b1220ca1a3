// model.hpp: quantized model manifests, tensor files, and MNIST-style IDX
// dataset ingestion.
//
// A model is a chain of fully-connected int8 layers described by a JSON
// manifest. Weight files are raw little-endian int8, row-major
// (out_dim × in_dim); bias files are raw little-endian int32 already scaled
// to the accumulator scale (weight_scale · input_scale) and within 24-bit
// range. Activation scales must chain: layer i's input scale equals layer
// i-1's output scale, and layer 0's input scale is the dataset scale.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvsim/dataflow.hpp"
#include "uvsim/qarith.hpp"

namespace uvsim {

struct LayerSpecInfo {
  std::string name;
  int in_dim = 0, out_dim = 0;
  std::string weights_file, bias_file;
  double weight_scale = 0.0;
  double input_scale = 0.0;
  double output_scale = 0.0;
  bool relu = true;  // manifest "activation": "relu" | "none"
};

struct Model {
  std::string name;
  std::vector<LayerSpecInfo> specs;
  std::vector<LayerDef> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }
  double input_scale() const { return specs.front().input_scale; }
};

// Loads and fully validates a model. Diagnostics distinguish unreadable
// files, byte-size mismatches, dimension chains that do not compose, and
// activation-scale chains that do not match.
Model load_model(const std::string& manifest_path);

// Raw IDX file: dtype must be unsigned byte (0x08).
struct IdxData {
  std::vector<int> dims;
  std::vector<uint8_t> bytes;
};

// Parses the standard IDX format: zero-padded magic with dimension count,
// big-endian dimension sizes, then raw payload. Throws data_error on a bad
// magic or on truncation (reporting the byte offset where data ran out).
IdxData load_idx(const std::string& path);

struct Dataset {
  int count = 0, rows = 0, cols = 0;
  std::vector<uint8_t> images;  // count × rows × cols
  std::vector<uint8_t> labels;  // count
};

// Loads an image/label IDX pair and cross-validates the counts.
Dataset load_dataset(const std::string& images_path,
                     const std::string& labels_path);

// Quantizes selected images into a (rows·cols) × batch activation tensor:
// pixel/255 quantized at `scale`.
QTensor images_to_activations(const Dataset& data,
                              std::span<const int> indices, double scale);

struct Splits {
  std::vector<int> validation;
  std::vector<int> test;
};

// Seed-derived disjoint validation/test index sets: a Fisher-Yates shuffle
// of [0, count) keyed on the seed, split front/back.
Splits derive_splits(int count, int validation_size, int test_size,
                     uint64_t seed);

}  // namespace uvsim
