#include "uvsim/simulator.hpp"

#include <algorithm>

#include "uvsim/errors.hpp"

namespace uvsim {

NetworkRun run_network(const Model& model, const Dataset& data,
                       std::span<const int> indices, const RunSettings& settings,
                       std::span<const double> r_per_layer,
                       std::span<const double> p_per_layer) {
  const int L = model.num_layers();
  if (static_cast<int>(r_per_layer.size()) != L ||
      static_cast<int>(p_per_layer.size()) != L)
    throw config_error("run_network: per-layer r/p arrays must match layer count");
  if (indices.empty()) throw config_error("run_network: empty image selection");
  if (settings.batch < 1) throw config_error("run_network: batch must be >= 1");
  validate(settings.array);
  validate(settings.energy);

  NetworkRun run;
  run.layers.resize(L);
  run.layer_energy.assign(L, 0.0);
  run.layer_baseline.assign(L, 0.0);
  bool first_batch = true;

  for (size_t pos = 0; pos < indices.size(); pos += settings.batch) {
    const size_t chunk =
        std::min<size_t>(settings.batch, indices.size() - pos);
    std::vector<int> batch_idx(indices.begin() + pos,
                               indices.begin() + pos + chunk);
    std::vector<uint64_t> image_ids(chunk);
    for (size_t j = 0; j < chunk; ++j)
      image_ids[j] = static_cast<uint64_t>(batch_idx[j]);

    QTensor acts = images_to_activations(data, batch_idx, model.input_scale());
    std::vector<int32_t> final_acc;
    int final_out = 0;
    for (int l = 0; l < L; ++l) {
      LayerResult res =
          run_layer(model.layers[l], acts, settings.array, r_per_layer[l],
                    p_per_layer[l], settings.seed, l, image_ids,
                    settings.workers);
      run.layer_energy[l] += layer_energy(res.stats, r_per_layer[l],
                                          settings.energy,
                                          settings.array.policy);
      run.layer_baseline[l] +=
          baseline_layer_energy(res.stats, settings.energy);
      if (first_batch) {
        run.layers[l] = res.stats;
      } else {
        run.layers[l].merge(res.stats);
      }
      if (l + 1 < L) {
        acts = std::move(res.activations);
      } else {
        final_acc = std::move(res.raw_acc);
        final_out = model.layers[l].weights.rows;
      }
    }
    first_batch = false;

    for (size_t j = 0; j < chunk; ++j) {
      int best = 0;
      int32_t best_v = final_acc[j];
      for (int i = 1; i < final_out; ++i) {
        const int32_t v = final_acc[static_cast<size_t>(i) * chunk + j];
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      ++run.total;
      if (best == data.labels[batch_idx[j]]) ++run.correct;
    }
  }

  for (int l = 0; l < L; ++l) {
    run.total_energy += run.layer_energy[l];
    run.baseline_energy += run.layer_baseline[l];
    run.total_cycles += run.layers[l].cycles;
  }
  run.savings = savings(run.total_energy, run.baseline_energy);
  run.accuracy = static_cast<double>(run.correct) / run.total;
  return run;
}

NetworkRun run_network_flat(const Model& model, const Dataset& data,
                            std::span<const int> indices,
                            const RunSettings& settings, double r, double p) {
  std::vector<double> rs(model.num_layers(), r);
  std::vector<double> ps(model.num_layers(), p);
  return run_network(model, data, indices, settings, rs, ps);
}

}  // namespace uvsim
