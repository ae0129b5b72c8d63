#include "bpnc/channel/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bpnc/rlnc/symbols.hpp"

namespace bpnc::channel {

using nlohmann::json;

double TimingConfig::ttr_s(std::size_t channel_count) const {
  const std::size_t visits = discovery_visits == 0 ? channel_count : discovery_visits;
  return static_cast<double>(visits) * dwell_s;
}

namespace {

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

void require_positive(double v, const std::string& field) {
  require(std::isfinite(v) && v > 0, field, "must be a positive number");
}

void require_non_negative(double v, const std::string& field) {
  require(std::isfinite(v) && v >= 0, field, "must be zero or positive");
}

}  // namespace

std::size_t Scenario::block_size_of(std::size_t flow) const {
  return flows.at(flow).coded ? coding.block_size : 1;
}

std::size_t Scenario::data_frame_bytes(std::size_t block_size) const {
  const std::size_t symbols = rlnc::symbol_count(coding.payload_bytes, coding.field_bits);
  return 5 + block_size + rlnc::packed_size(block_size, coding.field_bits) +
         rlnc::packed_size(symbols, coding.field_bits);
}

void Scenario::validate() const {
  const auto& t = topology;
  require(t.nodes >= 2 && t.nodes <= 254, "nodes", "must be between 2 and 254");
  require(!t.channels_ghz.empty() && t.channels_ghz.size() <= 16, "channels", "need 1 to 16 channels");
  for (double f : t.channels_ghz) require_positive(f, "channels");
  require(std::isfinite(t.noise_dbm), "topology.noise_dbm", "must be finite");
  require(std::isfinite(t.shadowing_sigma_db) && t.shadowing_sigma_db >= 0, "topology.shadowing_sigma_db",
          "must be non-negative");
  for (std::size_t i = 0; i < t.links.size(); ++i) {
    const auto& l = t.links[i];
    const std::string f = "links[" + std::to_string(i) + "]";
    require(l.a >= 1 && l.a <= t.nodes, f + ".src", "unknown node");
    require(l.b >= 1 && l.b <= t.nodes, f + ".dst", "unknown node");
    require(l.a != l.b, f, "self link");
    require(l.channel >= -1 && l.channel < static_cast<int>(t.channels_ghz.size()), f + ".channel",
            "unknown channel");
    require(std::isfinite(l.gain_db), f + ".gain_db", "must be finite");
  }

  const auto& r = radio;
  require(r.power_min_dbm <= r.power_max_dbm, "radio.power_min_dbm", "exceeds power_max_dbm");
  require(r.nominal_power_dbm >= r.power_min_dbm && r.nominal_power_dbm <= r.power_max_dbm,
          "radio.nominal_power_dbm", "outside the power range");
  require(std::isfinite(r.target_snr_db), "radio.target_snr_db", "must be finite");
  require(r.listen_power_fraction >= 0 && r.listen_power_fraction <= 1, "radio.listen_power_fraction",
          "must be in [0, 1]");
  require(std::isfinite(r.sensitivity_snr_db), "radio.sensitivity_snr_db", "must be finite");
  require(std::isfinite(r.busy_threshold_db), "radio.busy_threshold_db", "must be finite");
  require(r.frame_loss >= 0 && r.frame_loss < 1, "radio.frame_loss", "must be in [0, 1)");
  require_positive(r.ofdm.bandwidth_hz, "radio.bandwidth_hz");
  require(r.ofdm.fft_len > 0 && r.ofdm.occupied > 0 && r.ofdm.occupied <= r.ofdm.fft_len, "radio.occupied",
          "must be in 1..fft_len");
  require(r.ofdm.cp_len >= 0, "radio.cp_len", "must be non-negative");
  require(r.ofdm.bits_per_symbol >= 1 && r.ofdm.bits_per_symbol <= 8, "radio.bits_per_symbol", "must be 1..8");

  const auto& tm = timing;
  require_positive(tm.dwell_s, "timing.dwell_s");
  require(tm.discovery_visits <= 10000, "timing.discovery_visits", "too large");
  require_positive(tm.syn_duration_s, "timing.syn_duration_s");
  require_positive(tm.syn_interval_s, "timing.syn_interval_s");
  require_positive(tm.tdt_s, "timing.tdt_s");
  require_positive(tm.data_s, "timing.data_s");
  require_positive(tm.rts_interval_s, "timing.rts_interval_s");
  require_positive(tm.rts_window_s, "timing.rts_window_s");
  require_non_negative(tm.data_idle_s, "timing.data_idle_s");
  require_positive(tm.staleness_factor, "timing.staleness_factor");
  require(tm.rediscovery_interval_s >= 0, "timing.rediscovery_interval_s", "must be non-negative");
  require_positive(tm.sample_interval_s, "timing.sample_interval_s");
  require(tm.frame_gap_s >= 0, "timing.frame_gap_s", "must be non-negative");

  const auto& c = coding;
  require(c.field_bits >= 1 && c.field_bits <= 8, "coding.field_bits", "must be 1..8");
  require(c.block_size >= 1 && c.block_size <= 32, "coding.block_size", "must be 1..32");
  require(c.payload_bytes >= 1, "coding.payload_bytes", "must be positive");
  require(c.redundancy <= 64, "coding.redundancy", "must be at most 64");
  require(c.coding_cost_us >= 0 && std::isfinite(c.coding_cost_us), "coding.coding_cost_us",
          "must be non-negative");
  require(c.max_free <= 4, "coding.max_free", "must be at most 4");
  require(data_frame_bytes(c.block_size) <= 1500, "coding.payload_bytes", "DATA frame too large");

  require(!flows.empty() && flows.size() <= 255, "flows", "need 1 to 255 flows");
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const auto& fl = flows[i];
    const std::string f = "flows[" + std::to_string(i) + "]";
    require(fl.source >= 1 && fl.source <= t.nodes, f + ".src", "unknown node");
    require(!fl.destinations.empty(), f + ".dsts", "need at least one destination");
    std::set<NodeId> seen;
    for (NodeId d : fl.destinations) {
      require(d >= 1 && d <= t.nodes, f + ".dsts", "unknown node");
      require(d != fl.source, f + ".dsts", "source cannot be a destination");
      require(seen.insert(d).second, f + ".dsts", "duplicate destination");
      require(pairs.insert({fl.source, d}).second, f + ".dsts",
              "another flow already has this source and destination");
    }
    require(fl.saturated || (std::isfinite(fl.arrival_rate) && fl.arrival_rate > 0), f + ".arrival_rate",
            "must be positive unless saturated");
  }
  require(std::isfinite(duration_s) && duration_s >= 0, "duration_s", "must be non-negative");
  require(saturation_backlog >= 1, "saturation_backlog", "must be positive");
}

// ---------------------------------------------------------------- builtins

namespace {

constexpr double kStrongSnrDb = 25.0;
constexpr double kWeakSnrDb = 10.0;

Scenario base(std::string name, std::size_t nodes) {
  Scenario s;
  s.name = std::move(name);
  s.topology.nodes = nodes;
  s.timing.discovery_visits = 30;
  return s;
}

// Gain that yields the given SNR at the nominal power.
double gain_for(const Scenario& s, double snr_db) {
  return snr_db + s.topology.noise_dbm - s.radio.nominal_power_dbm;
}

void link(Scenario& s, NodeId a, NodeId b, double snr_db) {
  s.topology.links.push_back({a, b, -1, gain_for(s, snr_db)});
}

}  // namespace

std::vector<std::string> builtin_names() { return {"line7", "ring7", "grid6", "butterfly7"}; }

Scenario builtin(std::string_view name) {
  if (name == "line7") {
    auto s = base("line7", 7);
    for (NodeId i = 1; i < 7; ++i) link(s, i, static_cast<NodeId>(i + 1), kStrongSnrDb);
    s.flows.push_back({1, {7}, 4.0, false, false});
    return s;
  }
  if (name == "ring7") {
    // Two node-disjoint routes: 1-2-6-7 and 1-3-4-5-7. The source reaches
    // node 2 over a better link than node 3.
    auto s = base("ring7", 7);
    link(s, 1, 2, kStrongSnrDb);
    link(s, 2, 6, kStrongSnrDb);
    link(s, 6, 7, kStrongSnrDb);
    link(s, 1, 3, kWeakSnrDb);
    link(s, 3, 4, kStrongSnrDb);
    link(s, 4, 5, kStrongSnrDb);
    link(s, 5, 7, kStrongSnrDb);
    s.flows.push_back({1, {7}, 6.0, false, false});
    return s;
  }
  if (name == "grid6") {
    // 1 2 3
    // 4 5 6
    auto s = base("grid6", 6);
    link(s, 1, 2, kStrongSnrDb);
    link(s, 2, 3, kStrongSnrDb);
    link(s, 4, 5, kStrongSnrDb);
    link(s, 5, 6, kStrongSnrDb);
    link(s, 1, 4, kStrongSnrDb);
    link(s, 2, 5, kWeakSnrDb);
    link(s, 3, 6, kStrongSnrDb);
    s.flows.push_back({1, {6}, 4.0, false, false});
    return s;
  }
  if (name == "butterfly7") {
    auto s = base("butterfly7", 7);
    for (auto [a, b] : std::vector<std::pair<NodeId, NodeId>>{
             {1, 2}, {1, 3}, {2, 4}, {2, 6}, {3, 4}, {3, 7}, {4, 5}, {5, 6}, {5, 7}})
      link(s, a, b, kStrongSnrDb);
    s.flows.push_back({1, {6, 7}, 1.0, true, true});
    s.coding.decoder = rlnc::DecodeMode::RankDeficient;
    // Software codec cost per coefficient and payload symbol, and one repair
    // packet per generation.
    s.coding.coding_cost_us = 4.0;
    s.coding.redundancy = 1;
    return s;
  }
  throw ConfigError("builtin", "unknown builtin '" + std::string(name) + "'");
}

// ----------------------------------------------------------------- JSON io

namespace {

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "scenario" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(field(key), "expected a boolean");
        out = it->get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(field(key), "expected an integer");
        const auto v = it->get<std::int64_t>();
        if (v < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
            static_cast<std::uint64_t>(std::max<std::int64_t>(v, 0)) >
                static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
          throw ConfigError(field(key), "out of range");
        out = static_cast<T>(v);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(field(key), "expected a number");
        out = it->get<T>();
      } else {
        if (!it->is_string()) throw ConfigError(field(key), "expected a string");
        out = it->get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, _] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_radio(const json& j, RadioConfig& r) {
  Reader rd(j, "radio");
  rd.get("power_min_dbm", r.power_min_dbm);
  rd.get("power_max_dbm", r.power_max_dbm);
  rd.get("nominal_power_dbm", r.nominal_power_dbm);
  rd.get("target_snr_db", r.target_snr_db);
  rd.get("listen_power_fraction", r.listen_power_fraction);
  rd.get("sensitivity_snr_db", r.sensitivity_snr_db);
  rd.get("busy_threshold_db", r.busy_threshold_db);
  rd.get("bandwidth_hz", r.ofdm.bandwidth_hz);
  rd.get("fft_len", r.ofdm.fft_len);
  rd.get("cp_len", r.ofdm.cp_len);
  rd.get("occupied", r.ofdm.occupied);
  rd.get("bits_per_symbol", r.ofdm.bits_per_symbol);
  rd.get("frame_loss", r.frame_loss);
  rd.get("sensing", r.sensing);
  rd.get("power_control", r.power_control);
  rd.finish();
}

void read_timing(const json& j, TimingConfig& t) {
  Reader rd(j, "timing");
  rd.get("dwell_s", t.dwell_s);
  rd.get("discovery_visits", t.discovery_visits);
  rd.get("syn_duration_s", t.syn_duration_s);
  rd.get("syn_interval_s", t.syn_interval_s);
  rd.get("tdt_s", t.tdt_s);
  rd.get("data_s", t.data_s);
  rd.get("rts_interval_s", t.rts_interval_s);
  rd.get("rts_window_s", t.rts_window_s);
  rd.get("data_idle_s", t.data_idle_s);
  rd.get("staleness_factor", t.staleness_factor);
  rd.get("rediscovery_interval_s", t.rediscovery_interval_s);
  rd.get("sample_interval_s", t.sample_interval_s);
  rd.get("frame_gap_s", t.frame_gap_s);
  rd.finish();
}

void read_coding(const json& j, CodingConfig& c) {
  Reader rd(j, "coding");
  rd.get("block_size", c.block_size);
  rd.get("field_bits", c.field_bits);
  std::string decoder(rlnc::to_string(c.decoder));
  rd.get("decoder", decoder);
  const auto mode = rlnc::parse_decode_mode(decoder);
  if (!mode) throw ConfigError("coding.decoder", "expected 'full' or 'rankdef'");
  c.decoder = *mode;
  rd.get("redundancy", c.redundancy);
  rd.get("payload_bytes", c.payload_bytes);
  rd.get("coding_cost_us", c.coding_cost_us);
  rd.get("max_free", c.max_free);
  rd.get("accuracy_generations", c.accuracy_generations);
  rd.finish();
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario", std::string("malformed JSON: ") + e.what());
  }
  Scenario s;
  Reader rd(j, "");
  rd.get("name", s.name);
  rd.get("seed", s.seed);
  rd.get("duration_s", s.duration_s);
  rd.get("saturation_backlog", s.saturation_backlog);
  rd.get("nodes", s.topology.nodes);

  if (const json* ch = rd.child("channels")) {
    if (!ch->is_array()) throw ConfigError("channels", "expected an array of frequencies");
    s.topology.channels_ghz.clear();
    for (const auto& f : *ch) {
      if (!f.is_number()) throw ConfigError("channels", "expected numbers");
      s.topology.channels_ghz.push_back(f.get<double>());
    }
  }
  if (const json* tp = rd.child("topology")) {
    Reader t(*tp, "topology");
    t.get("symmetric", s.topology.symmetric);
    t.get("noise_dbm", s.topology.noise_dbm);
    t.get("shadowing_sigma_db", s.topology.shadowing_sigma_db);
    t.finish();
  }
  if (const json* links = rd.child("links")) {
    if (!links->is_array()) throw ConfigError("links", "expected an array");
    for (std::size_t i = 0; i < links->size(); ++i) {
      Reader l((*links)[i], "links[" + std::to_string(i) + "]");
      Link lk;
      l.get("src", lk.a);
      l.get("dst", lk.b);
      l.get("channel", lk.channel);
      l.get("gain_db", lk.gain_db);
      l.finish();
      s.topology.links.push_back(lk);
    }
  }
  if (const json* flows = rd.child("flows")) {
    if (!flows->is_array()) throw ConfigError("flows", "expected an array");
    for (std::size_t i = 0; i < flows->size(); ++i) {
      const std::string path = "flows[" + std::to_string(i) + "]";
      Reader f((*flows)[i], path);
      FlowConfig fc;
      f.get("src", fc.source);
      if (const json* d = f.child("dsts")) {
        if (!d->is_array()) throw ConfigError(path + ".dsts", "expected an array");
        for (const auto& x : *d) {
          if (!x.is_number_integer() || x.get<int>() < 0 || x.get<int>() > 255)
            throw ConfigError(path + ".dsts", "expected node ids");
          fc.destinations.push_back(static_cast<NodeId>(x.get<int>()));
        }
      }
      f.get("arrival_rate", fc.arrival_rate);
      f.get("saturated", fc.saturated);
      f.get("coded", fc.coded);
      f.finish();
      s.flows.push_back(fc);
    }
  }
  if (const json* r = rd.child("radio")) read_radio(*r, s.radio);
  if (const json* t = rd.child("timing")) read_timing(*t, s.timing);
  if (const json* c = rd.child("coding")) read_coding(*c, s.coding);
  rd.finish();
  s.validate();
  return s;
}

std::string dump_scenario(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["saturation_backlog"] = s.saturation_backlog;
  j["nodes"] = s.topology.nodes;
  j["channels"] = s.topology.channels_ghz;
  j["topology"] = {{"symmetric", s.topology.symmetric},
                   {"noise_dbm", s.topology.noise_dbm},
                   {"shadowing_sigma_db", s.topology.shadowing_sigma_db}};
  j["links"] = json::array();
  for (const auto& l : s.topology.links)
    j["links"].push_back({{"src", l.a}, {"dst", l.b}, {"channel", l.channel}, {"gain_db", l.gain_db}});
  j["flows"] = json::array();
  for (const auto& f : s.flows)
    j["flows"].push_back({{"src", f.source},
                          {"dsts", f.destinations},
                          {"arrival_rate", f.arrival_rate},
                          {"saturated", f.saturated},
                          {"coded", f.coded}});
  const auto& r = s.radio;
  j["radio"] = {{"power_min_dbm", r.power_min_dbm},
                {"power_max_dbm", r.power_max_dbm},
                {"nominal_power_dbm", r.nominal_power_dbm},
                {"target_snr_db", r.target_snr_db},
                {"listen_power_fraction", r.listen_power_fraction},
                {"sensitivity_snr_db", r.sensitivity_snr_db},
                {"busy_threshold_db", r.busy_threshold_db},
                {"bandwidth_hz", r.ofdm.bandwidth_hz},
                {"fft_len", r.ofdm.fft_len},
                {"cp_len", r.ofdm.cp_len},
                {"occupied", r.ofdm.occupied},
                {"bits_per_symbol", r.ofdm.bits_per_symbol},
                {"frame_loss", r.frame_loss},
                {"sensing", r.sensing},
                {"power_control", r.power_control}};
  const auto& t = s.timing;
  j["timing"] = {{"dwell_s", t.dwell_s},
                 {"discovery_visits", t.discovery_visits},
                 {"syn_duration_s", t.syn_duration_s},
                 {"syn_interval_s", t.syn_interval_s},
                 {"tdt_s", t.tdt_s},
                 {"data_s", t.data_s},
                 {"rts_interval_s", t.rts_interval_s},
                 {"rts_window_s", t.rts_window_s},
                 {"data_idle_s", t.data_idle_s},
                 {"staleness_factor", t.staleness_factor},
                 {"rediscovery_interval_s", t.rediscovery_interval_s},
                 {"sample_interval_s", t.sample_interval_s},
                 {"frame_gap_s", t.frame_gap_s}};
  const auto& c = s.coding;
  j["coding"] = {{"block_size", c.block_size},
                 {"field_bits", c.field_bits},
                 {"decoder", std::string(rlnc::to_string(c.decoder))},
                 {"redundancy", c.redundancy},
                 {"payload_bytes", c.payload_bytes},
                 {"coding_cost_us", c.coding_cost_us},
                 {"max_free", c.max_free},
                 {"accuracy_generations", c.accuracy_generations}};
  return j.dump(2);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// ---------------------------------------------------------------- overrides

namespace {

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(std::string(key), "expected a number, got '" + std::string(v) + "'");
  }
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw ConfigError(std::string(key), "expected a non-negative integer, got '" + std::string(v) + "'");
  try {
    return std::stoull(std::string(v));
  } catch (const std::exception&) {
    throw ConfigError(std::string(key), "integer out of range");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError(std::string(key), "expected true/false, got '" + std::string(v) + "'");
}

struct Setter {
  OverrideKey key;
  std::function<void(Scenario&, std::string_view)> set;
};

const std::vector<Setter>& setters() {
  static const std::vector<Setter> table = [] {
    std::vector<Setter> t;
    auto add = [&](std::string name, std::string help, std::function<void(Scenario&, std::string_view)> f) {
      t.push_back({{std::move(name), std::move(help)}, std::move(f)});
    };
    add("seed", "seed: run seed", [](Scenario& s, std::string_view v) { s.seed = parse_uint("seed", v); });
    add("duration", "duration_s: simulated seconds",
        [](Scenario& s, std::string_view v) { s.duration_s = parse_double("duration", v); });
    add("block_size", "coding.block_size: packets per generation (h)",
        [](Scenario& s, std::string_view v) { s.coding.block_size = parse_uint("block_size", v); });
    add("field_bits", "coding.field_bits: GF(2^m) bit width m",
        [](Scenario& s, std::string_view v) {
          const auto m = parse_uint("field_bits", v);
          if (m > 64) throw ConfigError("field_bits", "must be 1..8");
          s.coding.field_bits = static_cast<int>(m);
        });
    add("decoder", "coding.decoder: full | rankdef", [](Scenario& s, std::string_view v) {
      const auto m = rlnc::parse_decode_mode(v);
      if (!m) throw ConfigError("decoder", "expected 'full' or 'rankdef'");
      s.coding.decoder = *m;
    });
    add("redundancy", "coding.redundancy: extra coded packets per generation",
        [](Scenario& s, std::string_view v) { s.coding.redundancy = parse_uint("redundancy", v); });
    add("payload_bytes", "coding.payload_bytes: DATA payload length",
        [](Scenario& s, std::string_view v) { s.coding.payload_bytes = parse_uint("payload_bytes", v); });
    add("coding_cost_us", "coding.coding_cost_us: coding delay per coefficient-symbol",
        [](Scenario& s, std::string_view v) { s.coding.coding_cost_us = parse_double("coding_cost_us", v); });
    add("max_free", "coding.max_free: free-variable limit of rank-deficient decoding",
        [](Scenario& s, std::string_view v) { s.coding.max_free = parse_uint("max_free", v); });
    add("arrival_rate", "flows[*].arrival_rate: packets per second at every source",
        [](Scenario& s, std::string_view v) {
          const double r = parse_double("arrival_rate", v);
          for (auto& f : s.flows) {
            f.arrival_rate = r;
            f.saturated = false;
          }
        });
    add("frame_loss", "radio.frame_loss: extra DATA frame loss probability",
        [](Scenario& s, std::string_view v) { s.radio.frame_loss = parse_double("frame_loss", v); });
    add("sensing", "radio.sensing: spectrum sensing back-off on/off",
        [](Scenario& s, std::string_view v) { s.radio.sensing = parse_bool("sensing", v); });
    add("power_control", "radio.power_control: closed-loop power control on/off",
        [](Scenario& s, std::string_view v) { s.radio.power_control = parse_bool("power_control", v); });
    add("target_snr_db", "radio.target_snr_db: power-control SNR target",
        [](Scenario& s, std::string_view v) { s.radio.target_snr_db = parse_double("target_snr_db", v); });
    add("noise_dbm", "topology.noise_dbm: noise floor",
        [](Scenario& s, std::string_view v) { s.topology.noise_dbm = parse_double("noise_dbm", v); });
    add("shadowing_sigma_db", "topology.shadowing_sigma_db: log-normal shadowing spread",
        [](Scenario& s, std::string_view v) {
          s.topology.shadowing_sigma_db = parse_double("shadowing_sigma_db", v);
        });
    add("dwell_s", "timing.dwell_s: seconds per channel visit",
        [](Scenario& s, std::string_view v) { s.timing.dwell_s = parse_double("dwell_s", v); });
    add("discovery_visits", "timing.discovery_visits: channel visits in discovery",
        [](Scenario& s, std::string_view v) { s.timing.discovery_visits = parse_uint("discovery_visits", v); });
    add("syn_duration_s", "timing.syn_duration_s: flow-update phase length",
        [](Scenario& s, std::string_view v) { s.timing.syn_duration_s = parse_double("syn_duration_s", v); });
    add("syn_interval_s", "timing.syn_interval_s: SYN broadcast spacing",
        [](Scenario& s, std::string_view v) { s.timing.syn_interval_s = parse_double("syn_interval_s", v); });
    add("tdt_s", "timing.tdt_s: negotiation timeout",
        [](Scenario& s, std::string_view v) { s.timing.tdt_s = parse_double("tdt_s", v); });
    add("data_s", "timing.data_s: data phase length",
        [](Scenario& s, std::string_view v) { s.timing.data_s = parse_double("data_s", v); });
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<OverrideKey>& override_keys() {
  static const std::vector<OverrideKey> keys = [] {
    std::vector<OverrideKey> k;
    for (const auto& s : setters()) k.push_back(s.key);
    return k;
  }();
  return keys;
}

void apply_override(Scenario& s, std::string_view key, std::string_view value) {
  for (const auto& st : setters()) {
    if (st.key.name == key) {
      st.set(s, value);
      return;
    }
  }
  throw ConfigError(std::string(key), "unknown parameter");
}

// ------------------------------------------------------------------- gains

double normal(Rng& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

GainTable::GainTable(const TopologyConfig& topo, std::uint64_t seed)
    : nodes_(topo.nodes), channels_(topo.channels_ghz.size()) {
  const std::size_t n = (nodes_ + 1) * (nodes_ + 1) * channels_;
  gain_.assign(n, 0.0);
  present_.assign(n, false);

  // Channel-specific entries are applied after the all-channel ones, and
  // explicit directions after mirrored ones.
  auto apply = [&](bool mirrored, bool per_channel) {
    for (const auto& l : topo.links) {
      if ((l.channel >= 0) != per_channel) continue;
      const NodeId tx = mirrored ? l.b : l.a;
      const NodeId rx = mirrored ? l.a : l.b;
      for (std::size_t c = 0; c < channels_; ++c) {
        if (per_channel && static_cast<std::size_t>(l.channel) != c) continue;
        const auto i = index(tx, rx, static_cast<ChannelIndex>(c));
        gain_[i] = l.gain_db;
        present_[i] = true;
      }
    }
  };
  if (topo.symmetric) apply(true, false);
  apply(false, false);
  if (topo.symmetric) apply(true, true);
  apply(false, true);

  if (topo.shadowing_sigma_db > 0) {
    Rng rng = Rng(seed).fork(0x5ad0);
    for (NodeId a = 1; a <= nodes_; ++a) {
      for (NodeId b = a + 1; b <= nodes_; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
          const double x = normal(rng) * topo.shadowing_sigma_db;
          const auto ch = static_cast<ChannelIndex>(c);
          if (present_[index(a, b, ch)]) gain_[index(a, b, ch)] += x;
          if (present_[index(b, a, ch)]) gain_[index(b, a, ch)] += x;
        }
      }
    }
  }
}

std::size_t GainTable::index(NodeId tx, NodeId rx, ChannelIndex ch) const {
  return (static_cast<std::size_t>(tx) * (nodes_ + 1) + rx) * channels_ + ch;
}

std::optional<double> GainTable::gain_db(NodeId tx, NodeId rx, ChannelIndex ch) const {
  if (tx == 0 || rx == 0 || tx > nodes_ || rx > nodes_ || ch >= channels_) return std::nullopt;
  const auto i = index(tx, rx, ch);
  if (!present_[i]) return std::nullopt;
  return gain_[i];
}

std::vector<NodeId> GainTable::neighbors(NodeId n) const {
  std::vector<NodeId> out;
  for (NodeId m = 1; m <= nodes_; ++m) {
    if (m == n) continue;
    for (std::size_t c = 0; c < channels_; ++c) {
      if (present_[index(n, m, static_cast<ChannelIndex>(c))]) {
        out.push_back(m);
        break;
      }
    }
  }
  return out;
}

}  // namespace bpnc::channel
