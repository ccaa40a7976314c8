#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftls/environments.hpp"
#include "driftls/errors.hpp"
#include "driftls/linalg.hpp"
#include "driftls/rng.hpp"

namespace driftls {

// One logged round: the offered arms and, for logged-policy data, the arm
// that was shown and its reward.
struct EventRecord {
  std::uint64_t t = 0;
  std::vector<Arm> arms;
  std::optional<std::int64_t> chosen;
  std::optional<double> reward;
};

inline bool operator==(const EventRecord& a, const EventRecord& b) {
  if (a.t != b.t || a.chosen != b.chosen || a.reward != b.reward || a.arms.size() != b.arms.size()) return false;
  for (std::size_t k = 0; k < a.arms.size(); ++k) {
    if (a.arms[k].id != b.arms[k].id || a.arms[k].x.size() != b.arms[k].x.size()) return false;
    if (a.arms[k].x != b.arms[k].x) return false;
  }
  return true;
}

inline constexpr double kLogNormSlack = 1e-9;

inline nlohmann::ordered_json to_json(const EventRecord& r) {
  nlohmann::ordered_json j;
  j["t"] = r.t;
  auto arms = nlohmann::ordered_json::array();
  for (const Arm& a : r.arms) {
    nlohmann::ordered_json arm;
    arm["id"] = a.id;
    arm["x"] = std::vector<double>(a.x.data(), a.x.data() + a.x.size());
    arms.push_back(std::move(arm));
  }
  j["arms"] = std::move(arms);
  if (r.chosen) j["chosen"] = *r.chosen;
  if (r.reward) j["reward"] = *r.reward;
  return j;
}

namespace detail {

inline EventRecord parse_event(const nlohmann::json& j, std::size_t line, std::size_t max_arms,
                               std::optional<Index>& dim) {
  if (!j.is_object()) throw SchemaError(line, "record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "t" && key != "arms" && key != "chosen" && key != "reward") {
      throw SchemaError(line, "unexpected field '" + key + "'");
    }
  }
  EventRecord r;
  if (!j.contains("t")) throw SchemaError(line, "missing field 't'");
  if (!j["t"].is_number_unsigned()) throw SchemaError(line, "'t' must be a non-negative integer");
  r.t = j["t"].get<std::uint64_t>();

  if (!j.contains("arms")) throw SchemaError(line, "missing field 'arms'");
  const auto& arms = j["arms"];
  if (!arms.is_array() || arms.empty()) throw SchemaError(line, "'arms' must be a non-empty array");
  if (max_arms > 0 && arms.size() > max_arms) {
    throw SchemaError(line, "record offers " + std::to_string(arms.size()) + " arms, more than K = " +
                                std::to_string(max_arms));
  }
  for (const auto& a : arms) {
    if (!a.is_object()) throw SchemaError(line, "arm must be an object");
    for (const auto& [key, _] : a.items()) {
      if (key != "id" && key != "x") throw SchemaError(line, "unexpected arm field '" + key + "'");
    }
    if (!a.contains("id")) throw SchemaError(line, "arm missing field 'id'");
    if (!a.contains("x")) throw SchemaError(line, "arm missing field 'x'");
    if (!a["id"].is_number_integer()) throw SchemaError(line, "arm 'id' must be an integer");
    const auto& xs = a["x"];
    if (!xs.is_array() || xs.empty()) throw SchemaError(line, "arm 'x' must be a non-empty array");
    Vec x(static_cast<Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!xs[i].is_number()) throw SchemaError(line, "arm 'x' entries must be numbers");
      x(static_cast<Index>(i)) = xs[i].get<double>();
    }
    if (!x.allFinite()) throw SchemaError(line, "arm 'x' must be finite");
    if (x.norm() > 1.0 + kLogNormSlack) throw SchemaError(line, "arm feature norm exceeds 1");
    if (dim && *dim != x.size()) throw SchemaError(line, "arm feature dimension differs from earlier records");
    dim = x.size();
    r.arms.push_back({a["id"].get<std::int64_t>(), std::move(x)});
  }

  const bool has_chosen = j.contains("chosen");
  const bool has_reward = j.contains("reward");
  if (has_chosen != has_reward) throw SchemaError(line, "'chosen' and 'reward' must appear together");
  if (has_chosen) {
    if (!j["chosen"].is_number_integer()) throw SchemaError(line, "'chosen' must be an integer arm id");
    if (!j["reward"].is_number()) throw SchemaError(line, "'reward' must be a number");
    r.chosen = j["chosen"].get<std::int64_t>();
    r.reward = j["reward"].get<double>();
    const bool offered = std::any_of(r.arms.begin(), r.arms.end(), [&](const Arm& a) { return a.id == *r.chosen; });
    if (!offered) throw SchemaError(line, "'chosen' is not one of the offered arm ids");
  }
  return r;
}

}  // namespace detail

// One JSON object per line, fields (t, arms:[{id, x}], chosen?, reward?).
inline void write_event_log(const std::filesystem::path& path, const std::vector<EventRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const EventRecord& r : records) out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// max_arms = 0 skips the K bound.
inline std::vector<EventRecord> read_event_log(const std::filesystem::path& path, std::size_t max_arms = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<EventRecord> records;
  std::optional<Index> dim;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(line, std::string("malformed JSON: ") + e.what());
    }
    records.push_back(detail::parse_event(j, line, max_arms, dim));
  }
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return records;
}

// Generator settings for the synthetic news stream. The click model and the
// feature distribution are inventions of this tool, not a model of any real
// dataset.
struct NewsStreamConfig {
  ArmSetSpec arms{.d = 20, .k = 10, .density = 0.3, .nonnegative = true, .fixed_pool = false, .pool_seed = 0};
  std::size_t horizon = 1000;
  double theta_norm = 1.0;
  NoiseModel noise = NoiseModel::uniform();
};

struct NewsStream {
  Vec theta_star;
  std::vector<EventRecord> records;
};

// Logged under a uniform-random display policy with binary clicks.
inline NewsStream synth_news_stream(const NewsStreamConfig& cfg, const Rng& rng) {
  NewsStream out;
  Rng truth_rng = rng.split(1);
  out.theta_star = random_direction(cfg.arms.d, truth_rng, cfg.theta_norm);
  ArmSetSpec spec = cfg.arms;
  const Rng arm_rng = rng.split(2);
  Rng play_rng = rng.split(3);
  ClickModel clicks{out.theta_star, cfg.noise, 0.5};
  out.records.reserve(cfg.horizon);
  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    EventRecord r;
    r.t = t;
    r.arms = gen_arm_set(spec, t, arm_rng);
    const auto k = static_cast<std::size_t>(play_rng.uniform_index(r.arms.size()));
    r.chosen = r.arms[k].id;
    r.reward = clicks.click(r.arms[k].x, play_rng);
    out.records.push_back(std::move(r));
  }
  return out;
}

inline void write_truth_file(const std::filesystem::path& path, const Vec& theta_star) {
  nlohmann::ordered_json j;
  j["theta_star"] = std::vector<double>(theta_star.data(), theta_star.data() + theta_star.size());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Vec read_truth_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(1, std::string("malformed truth file: ") + e.what());
  }
  if (!j.contains("theta_star") || !j["theta_star"].is_array()) throw SchemaError(1, "missing 'theta_star'");
  const auto v = j["theta_star"].get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace driftls
