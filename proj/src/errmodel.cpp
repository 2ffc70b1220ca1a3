#include "uvsim/errmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uvsim/errors.hpp"
#include "uvsim/prf.hpp"

namespace uvsim {

VoltageErrorProfile::VoltageErrorProfile(std::vector<ProfilePoint> rows)
    : rows_(std::move(rows)) {
  if (rows_.empty()) throw data_error("profile: empty table");
  for (size_t i = 0; i < rows_.size(); ++i) {
    const auto& row = rows_[i];
    if (!(row.r > 0.0) || !std::isfinite(row.r))
      throw data_error("profile: r must be positive and finite");
    if (!(row.p >= 0.0 && row.p <= 1.0))
      throw data_error("profile: p must lie in [0, 1]");
    if (i > 0) {
      if (!(rows_[i - 1].r < row.r))
        throw data_error("profile: r rows must be strictly ascending");
      if (rows_[i - 1].p < row.p)
        throw data_error("profile: p must be non-increasing in r");
    }
  }
}

double VoltageErrorProfile::error_prob(double r) const {
  if (!std::isfinite(r)) throw config_error("error_prob: r must be finite");
  if (r <= rows_.front().r) return rows_.front().p;
  if (r >= rows_.back().r) return rows_.back().p;
  // First row with rows_[hi].r > r; its predecessor brackets from below.
  auto it = std::upper_bound(
      rows_.begin(), rows_.end(), r,
      [](double value, const ProfilePoint& row) { return value < row.r; });
  const ProfilePoint& hi = *it;
  const ProfilePoint& lo = *(it - 1);
  if (r == lo.r) return lo.p;
  if (hi.p <= 0.0) return 0.0;  // zero tail reaches down to lo's boundary
  double t = (r - lo.r) / (hi.r - lo.r);
  return std::exp((1.0 - t) * std::log(lo.p) + t * std::log(hi.p));
}

VoltageErrorProfile VoltageErrorProfile::scaled(double factor) const {
  if (!(factor > 0.0)) throw config_error("profile scale factor must be positive");
  std::vector<ProfilePoint> rows = rows_;
  for (auto& row : rows) row.p = std::min(1.0, row.p * factor);
  return VoltageErrorProfile(std::move(rows));
}

double error_prob(const VoltageErrorProfile& profile, double r) {
  return profile.error_prob(r);
}

double global_error_rate(double p, uint64_t m) {
  if (m == 0 || p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(m) * std::log1p(-p));
}

namespace {

uint64_t coord_hash(Stream stream, const ErrorCoords& c) {
  return hash_tuple(c.seed, static_cast<uint64_t>(stream), c.layer, c.block,
                    c.row, c.col, c.k);
}

}  // namespace

bool sample_error(double p, const ErrorCoords& coords) {
  if (p <= 0.0) return false;  // skip hashing on the clean fast path
  return bernoulli(coord_hash(Stream::kErrorDecision, coords), p);
}

Acc24 splice24(Acc24 correct, Acc24 previous, int cut) {
  require_invariant(cut >= 0 && cut < 24, "splice24: cut out of range");
  uint32_t low_mask = (1u << cut) - 1u;
  uint32_t bits = (acc_bits(correct) & low_mask) |
                  (acc_bits(previous) & ~low_mask & 0xFFFFFFu);
  return acc_from_bits(bits);
}

Acc24 corrupt(Acc24 correct, Acc24 previous, const ErrorCoords& coords) {
  int cut = static_cast<int>(bounded(coord_hash(Stream::kCorruptCut, coords), 24));
  return splice24(correct, previous, cut);
}

ChipSample draw_chip_sample(uint64_t chip_seed, double sigma) {
  if (sigma < 0.0) throw config_error("process variation sigma must be >= 0");
  double z = gaussian(
      hash_tuple(chip_seed, static_cast<uint64_t>(Stream::kChipFactorA)),
      hash_tuple(chip_seed, static_cast<uint64_t>(Stream::kChipFactorB)));
  double f = 1.0 + sigma * z;
  // sigma is a few percent in practice; the floor only guards pathological
  // configurations from producing a non-positive delay factor.
  return ChipSample{std::max(f, 0.05), chip_seed};
}

VoltageErrorProfile apply_process_variation(const VoltageErrorProfile& profile,
                                            double sigma, uint64_t chip_seed) {
  ChipSample chip = draw_chip_sample(chip_seed, sigma);
  if (sigma == 0.0) return profile;
  std::vector<ProfilePoint> rows = profile.rows();
  // p'(r) = p(r / f): a given error rate moves to an r scaled by f.
  for (auto& row : rows) row.r *= chip.factor;
  return VoltageErrorProfile(std::move(rows));
}

double default_profile_steepness() {
  // Solves the two-anchor system p(0.85) = 1e-4, p(0.90) = 1e-5 for the
  // logistic p(r) = p_max / (1 + exp(k (r - r0))) with p_max = 0.2:
  // the odds terms are 1999 and 19999.
  return std::log(19999.0 / 1999.0) / 0.05;
}

double default_profile_r0() {
  return 0.85 - std::log(1999.0) / default_profile_steepness();
}

VoltageErrorProfile default_profile() {
  const double k = default_profile_steepness();
  const double r0 = default_profile_r0();
  auto logistic = [&](double r) {
    return kDefaultProfilePMax / (1.0 + std::exp(k * (r - r0)));
  };
  std::vector<ProfilePoint> rows;
  for (double r : {0.55, 0.60, 0.65, 0.70, 0.75, 0.80})
    rows.push_back({r, logistic(r)});
  // Anchor rows are pinned literally so queries at these voltages return
  // the exact published rates, free of exp/log round-trip noise.
  rows.push_back({0.85, 1e-4});
  rows.push_back({0.90, 1e-5});
  rows.push_back({0.95, 0.0});
  rows.push_back({1.00, 0.0});
  return VoltageErrorProfile(std::move(rows));
}

std::vector<VoltageErrorProfile> layer_profiles(const VoltageErrorProfile& base,
                                                int num_layers, double spread) {
  if (num_layers < 1) throw config_error("layer_profiles: need at least one layer");
  if (!(spread >= 1.0))
    throw config_error("layer_profiles: spread must be >= 1");
  std::vector<VoltageErrorProfile> out;
  out.reserve(num_layers);
  for (int i = 0; i < num_layers; ++i) {
    double exponent =
        num_layers == 1
            ? 0.0
            : static_cast<double>(i) / (num_layers - 1) - 0.5;
    out.push_back(base.scaled(std::pow(spread, exponent)));
  }
  return out;
}

std::vector<VoltageErrorProfile> load_profiles(const std::string& path,
                                               int num_layers) {
  if (num_layers < 1) throw config_error("load_profiles: need at least one layer");
  std::ifstream in(path);
  if (!in) throw data_error("cannot open profile file: " + path);

  std::vector<ProfilePoint> wildcard;
  std::vector<std::vector<ProfilePoint>> specific(num_layers);
  bool has_wildcard = false;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Trim whitespace; skip blanks and comments.
    size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    size_t end = line.find_last_not_of(" \t\r");
    std::string body = line.substr(begin, end - begin + 1);
    if (body[0] == '#') continue;

    auto bad = [&](const std::string& why) {
      return data_error(path + ":" + std::to_string(line_no) + ": " + why);
    };
    std::istringstream fields(body);
    std::string id_field, r_field, p_field, extra;
    if (!std::getline(fields, id_field, ',') ||
        !std::getline(fields, r_field, ',') ||
        !std::getline(fields, p_field, ','))
      throw bad("expected layer_id,r,p");
    if (std::getline(fields, extra, ',')) throw bad("trailing field");

    double r = 0.0, p = 0.0;
    try {
      size_t pos = 0;
      r = std::stod(r_field, &pos);
      if (pos != r_field.find_last_not_of(" \t") + 1 &&
          r_field.substr(pos).find_first_not_of(" \t") != std::string::npos)
        throw bad("unparseable r value '" + r_field + "'");
      p = std::stod(p_field, &pos);
      if (p_field.substr(pos).find_first_not_of(" \t") != std::string::npos)
        throw bad("unparseable p value '" + p_field + "'");
    } catch (const data_error&) {
      throw;
    } catch (const std::exception&) {
      throw bad("unparseable number");
    }

    size_t id_begin = id_field.find_first_not_of(" \t");
    size_t id_end = id_field.find_last_not_of(" \t");
    if (id_begin == std::string::npos) throw bad("empty layer_id");
    std::string id = id_field.substr(id_begin, id_end - id_begin + 1);
    if (id == "*") {
      wildcard.push_back({r, p});
      has_wildcard = true;
    } else {
      int layer = -1;
      try {
        size_t pos = 0;
        layer = std::stoi(id, &pos);
        if (pos != id.size()) throw bad("unparseable layer_id '" + id + "'");
      } catch (const data_error&) {
        throw;
      } catch (const std::exception&) {
        throw bad("unparseable layer_id '" + id + "'");
      }
      if (layer < 0 || layer >= num_layers)
        throw bad("layer_id " + std::to_string(layer) + " out of range [0, " +
                  std::to_string(num_layers - 1) + "]");
      specific[layer].push_back({r, p});
    }
  }

  std::vector<VoltageErrorProfile> out;
  out.reserve(num_layers);
  for (int layer = 0; layer < num_layers; ++layer) {
    // Specific rows take precedence; the wildcard covers the rest.
    const std::vector<ProfilePoint>& rows =
        !specific[layer].empty() ? specific[layer] : wildcard;
    if (rows.empty())
      throw data_error(path + ": no profile rows for layer " +
                       std::to_string(layer) +
                       (has_wildcard ? "" : " and no '*' fallback"));
    try {
      out.emplace_back(rows);
    } catch (const data_error& e) {
      throw data_error(path + ": layer " + std::to_string(layer) + ": " +
                       e.what());
    }
  }
  return out;
}

}  // namespace uvsim
