#pragma once

// Sample files (JSONL) and conversion of samples into a featurized Dataset.
//
// One JSON object per line, fields in this order:
//   schema_version, map_id, state, K, target, alpha, complete, source,
//   problem_id, h_g_s, goal, mode

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loha/collector.hpp"
#include "loha/features.hpp"
#include "loha/model.hpp"
#include "loha/problem.hpp"

namespace loha {

inline constexpr int kSampleSchemaVersion = 1;

inline nlohmann::ordered_json sample_to_json(const Sample& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSampleSchemaVersion;
  j["map_id"] = s.map_id;
  j["state"] = s.state;
  j["K"] = s.K;
  j["target"] = s.target;
  j["alpha"] = s.alpha;
  j["complete"] = s.complete;
  j["source"] = to_string(s.source);
  j["problem_id"] = s.problem_id;
  j["h_g_s"] = s.h_g_s;
  j["goal"] = s.goal;
  j["mode"] = s.mode;
  return j;
}

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSampleSchemaVersion) throw ValidationError("unsupported sample schema_version " + std::to_string(version));
    s.map_id = j.at("map_id").get<std::string>();
    s.state = j.at("state").get<std::vector<int>>();
    s.K = j.at("K").get<int>();
    s.target = j.at("target").get<double>();
    s.alpha = j.at("alpha").get<double>();
    s.complete = j.at("complete").get<bool>();
    s.source = parse_sample_source(j.at("source").get<std::string>());
    s.problem_id = j.at("problem_id").get<std::int64_t>();
    s.h_g_s = j.at("h_g_s").get<double>();
    s.goal = j.at("goal").get<std::vector<int>>();
    s.mode = j.value("mode", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed sample: ") + e.what());
  }
  if (!(s.alpha > 0.0 && s.alpha <= 1.0)) throw ValidationError("sample alpha must lie in (0, 1]");
  return s;
}

inline void write_samples(const std::vector<Sample>& samples, std::ostream& out) {
  for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

inline void write_samples(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open samples for writing: " + path);
  write_samples(samples, out);
  if (!out) throw IoError("failed writing samples: " + path);
}

inline std::vector<Sample> read_samples(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    try {
      out.push_back(sample_from_json(j));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<Sample> read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open samples: " + path);
  return read_samples(in);
}

/// FNV-1a over the canonical JSONL encoding.
inline std::uint64_t samples_hash(const std::vector<Sample>& samples) {
  std::ostringstream ss;
  write_samples(samples, ss);
  return fnv1a64(ss.str());
}

/// Featurizes samples against their maps. All samples must share K.
template <class D>
Dataset build_dataset(const std::vector<Sample>& samples, const MapSet& maps) {
  if (samples.empty()) throw ValidationError("empty dataset");
  const int K = samples.front().K;
  const int dim = feature_size<D>(K);
  Dataset data;
  data.features.resize(dim, static_cast<Eigen::Index>(samples.size()));
  data.targets.resize(static_cast<Eigen::Index>(samples.size()));
  data.alphas.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.K != K) throw ValidationError("mixed-K dataset: found K=" + std::to_string(s.K) + " and K=" + std::to_string(K));
    const D domain(lookup_map(maps, s.map_id));
    const auto idx = static_cast<Eigen::Index>(i);
    featurize_into(domain, D::from_ints(s.state), D::from_ints(s.goal), K, data.features.col(idx).data());
    data.targets[idx] = s.target;
    data.alphas[idx] = s.alpha;
  }
  return data;
}

/// Deterministic subsample of at most `limit` samples (order preserved).
inline std::vector<Sample> subsample(const std::vector<Sample>& samples, std::size_t limit, std::uint64_t seed) {
  if (limit == 0 || samples.size() <= limit) return samples;
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  std::vector<Sample> out;
  out.reserve(limit);
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

/// Appends the 7 non-identity square symmetries of every column.
template <class D>
Dataset augment_symmetries(const Dataset& data, int K) {
  const Eigen::Index n = data.size();
  Dataset out;
  out.features.resize(data.features.rows(), 8 * n);
  out.targets.resize(8 * n);
  out.alphas.resize(8 * n);
  for (int t = 0; t < 8; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index j = t * n + i;
      transform_features<D>(data.features.col(i).data(), out.features.col(j).data(), K, t);
      out.targets[j] = data.targets[i];
      out.alphas[j] = data.alphas[i];
    }
  }
  return out;
}

/// How raw samples become a training set.
struct DataConfig {
  /// Keep at most this many incomplete samples per complete one; negative keeps all.
  double incomplete_ratio = -1.0;
  /// Cap on samples after balancing (0 = no cap), applied before augmentation.
  std::size_t max_samples = 0;
  bool augment = false;
  std::uint64_t seed = 0;
};

/// Balance, subsample and featurize; augmentation last.
template <class D>
Dataset prepare_training_data(const std::vector<Sample>& samples, const MapSet& maps, const DataConfig& cfg) {
  std::vector<Sample> kept;
  if (cfg.incomplete_ratio >= 0.0) {
    std::vector<Sample> complete, incomplete;
    for (const auto& s : samples) (s.complete ? complete : incomplete).push_back(s);
    const auto limit = static_cast<std::size_t>(cfg.incomplete_ratio * static_cast<double>(complete.size()));
    incomplete = limit == 0 ? std::vector<Sample>{} : subsample(incomplete, limit, derive_seed(cfg.seed, "balance"));
    kept = std::move(complete);
    kept.insert(kept.end(), incomplete.begin(), incomplete.end());
    if (kept.empty()) kept = samples;  // nothing complete: fall back to everything
  } else {
    kept = samples;
  }
  kept = subsample(kept, cfg.max_samples, derive_seed(cfg.seed, "subsample"));
  Dataset data = build_dataset<D>(kept, maps);
  return cfg.augment ? augment_symmetries<D>(data, kept.front().K) : data;
}

}  // namespace loha
