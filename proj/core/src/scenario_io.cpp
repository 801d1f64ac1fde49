#include "iplpmb/scenario_io.hpp"

#include "iplpmb/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

namespace iplpmb {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one YAML mapping, rejecting keys it was not told about.
class Section {
 public:
  // A missing or null node behaves as an empty mapping.
  Section(const YAML::Node& node, std::string path, std::initializer_list<const char*> keys)
      : path_(std::move(path)) {
    if (!node || node.IsNull()) {
      return;
    }
    node_.reset(node);
    if (!node_.IsMap()) {
      throw ConfigError("'" + (path_.empty() ? std::string("<root>") : path_) + "' must be a mapping");
    }
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      for (const char* k : keys) {
        known = known || key == k;
      }
      if (!known) {
        throw ConfigError("unknown config key '" + join(path_, key) + "'");
      }
    }
  }

  [[nodiscard]] Section child(const char* key, std::initializer_list<const char*> keys) const {
    return {node_[key], join(path_, key), keys};
  }
  [[nodiscard]] YAML::Node raw(const char* key) const { return node_[key]; }
  [[nodiscard]] std::string path(const char* key) const { return join(path_, key); }

  template <typename T>
  void read(const char* key, T& out) const {
    const YAML::Node n = node_[key];
    if (!n) {
      return;
    }
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config key '" + join(path_, key) + "' has an invalid value");
    }
  }

  void read_vector(const char* key, Eigen::Index size, Vector& out) const {
    if (node_[key]) {
      out = to_vector(node_[key], join(path_, key), size);
    }
  }
  void read_point(const char* key, Eigen::Vector3d& out) const {
    if (node_[key]) {
      out = to_vector(node_[key], join(path_, key), 3);
    }
  }

  static Vector to_vector(const YAML::Node& n, const std::string& path, Eigen::Index size) {
    if (!n.IsSequence() || static_cast<Eigen::Index>(n.size()) != size) {
      throw ConfigError("config key '" + path + "' must be a list of " + std::to_string(size) + " numbers");
    }
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      try {
        v[i] = n[static_cast<std::size_t>(i)].as<double>();
      } catch (const YAML::Exception&) {
        throw ConfigError("config key '" + path + "' must be a list of " + std::to_string(size) + " numbers");
      }
    }
    return v;
  }

 private:
  YAML::Node node_;
  std::string path_;
};

Matrix diag_from_std(const Vector& sd) {
  return sd.array().square().matrix().asDiagonal();
}

Vector std_from_diag(const Matrix& cov, const std::string& what) {
  if (!cov.isDiagonal(0.0)) {
    throw ConfigError(what + " is not diagonal and cannot be written as standard deviations");
  }
  return cov.diagonal().cwiseSqrt();
}

void parse_scenario(const Section& s, ScenarioConfig& c) {
  s.read("seed", c.seed);
  s.read_point("bs_position", c.bs_position);

  if (const YAML::Node planes = s.raw("va_planes"); planes) {
    if (!planes.IsSequence()) {
      throw ConfigError("config key '" + s.path("va_planes") + "' must be a list");
    }
    c.va_planes.clear();
    for (std::size_t i = 0; i < planes.size(); ++i) {
      const Section p(planes[i], s.path("va_planes") + "[" + std::to_string(i) + "]", {"normal", "offset"});
      Plane plane;
      p.read_point("normal", plane.normal);
      p.read("offset", plane.offset);
      c.va_planes.push_back(plane);
    }
  }
  if (const YAML::Node sps = s.raw("sp_positions"); sps) {
    if (!sps.IsSequence()) {
      throw ConfigError("config key '" + s.path("sp_positions") + "' must be a list");
    }
    c.sp_positions.clear();
    for (std::size_t i = 0; i < sps.size(); ++i) {
      c.sp_positions.emplace_back(
          Section::to_vector(sps[i], s.path("sp_positions") + "[" + std::to_string(i) + "]", 3));
    }
  }

  const Section t = s.child("trajectory", {"speed", "turn_rate", "steps", "step_duration", "initial"});
  t.read("speed", c.trajectory.speed);
  t.read("turn_rate", c.trajectory.turn_rate);
  t.read("steps", c.trajectory.steps);
  t.read("step_duration", c.trajectory.step_duration);
  const Section init = t.child("initial", {"position", "heading", "clock_bias"});
  init.read_point("position", c.trajectory.initial.position);
  init.read("heading", c.trajectory.initial.heading);
  init.read("clock_bias", c.trajectory.initial.clock_bias);

  const Section sen =
      s.child("sensor", {"detection_prob", "fov_radius_sp", "clutter_rate", "toa_max", "noise_std"});
  sen.read("detection_prob", c.sensor.detection_prob);
  sen.read("fov_radius_sp", c.sensor.fov_radius_sp);
  sen.read("clutter_rate", c.sensor.clutter_rate);
  sen.read("toa_max", c.sensor.toa_max);
  if (sen.raw("noise_std")) {
    Vector sd;
    sen.read_vector("noise_std", kMeasDim, sd);
    c.sensor.noise_cov = diag_from_std(sd);
  }
  if (s.raw("process_noise_std")) {
    Vector sd;
    s.read_vector("process_noise_std", kUeDim, sd);
    c.process_noise = diag_from_std(sd);
  }

  const Section r = s.child("radio", {"carrier_ghz", "bandwidth_mhz", "antennas_tx", "antennas_rx",
                                      "subcarriers", "symbols"});
  r.read("carrier_ghz", c.radio.carrier_ghz);
  r.read("bandwidth_mhz", c.radio.bandwidth_mhz);
  r.read("antennas_tx", c.radio.antennas_tx);
  r.read("antennas_rx", c.radio.antennas_rx);
  r.read("subcarriers", c.radio.subcarriers);
  r.read("symbols", c.radio.symbols);
}

void parse_filter(const Section& f, ExperimentConfig& c) {
  f.read("gamma", c.filter.gamma);
  f.read("gate", c.filter.gate);
  f.read("check_contraction", c.filter.check_contraction);
  f.read_vector("initial_std", kUeDim, c.initial_std);

  const Section it = f.child("iplf", {"max_iterations", "kl_threshold"});
  it.read("max_iterations", c.filter.iplf.max_iterations);
  it.read("kl_threshold", c.filter.iplf.kl_threshold);

  const Section pr = f.child("prune", {"r_min", "kind_w_min", "merge_dist"});
  pr.read("r_min", c.filter.prune.r_min);
  pr.read("kind_w_min", c.filter.prune.kind_w_min);
  pr.read("merge_dist", c.filter.prune.merge_dist);

  const Section ppp = f.child("ppp", {"region_min", "region_max", "rate_va", "rate_sp"});
  Eigen::Vector3d lo = c.ppp.region.min();
  Eigen::Vector3d hi = c.ppp.region.max();
  ppp.read_point("region_min", lo);
  ppp.read_point("region_max", hi);
  c.ppp.region = Eigen::AlignedBox3d(lo, hi);
  ppp.read("rate_va", c.ppp.rate_per_kind[0]);
  ppp.read("rate_sp", c.ppp.rate_per_kind[1]);
}

template <typename Vec>
YAML::Node seq(const Vec& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    n.push_back(v[i]);
  }
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig c;
  const Section top(root, "", {"scenario", "filter", "metrics"});
  parse_scenario(top.child("scenario", {"seed", "bs_position", "va_planes", "sp_positions", "trajectory",
                                        "sensor", "process_noise_std", "radio"}),
                 c.scenario);
  parse_filter(top.child("filter", {"gamma", "gate", "check_contraction", "initial_std", "iplf", "prune", "ppp"}),
               c);
  const Section m = top.child("metrics", {"gospa", "r_estimate"});
  m.read("r_estimate", c.r_estimate);
  const Section g = m.child("gospa", {"cutoff", "p", "alpha"});
  g.read("cutoff", c.gospa.cutoff);
  g.read("p", c.gospa.p);
  g.read("alpha", c.gospa.alpha);

  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string dump_experiment_config(const ExperimentConfig& config) {
  const ScenarioConfig& s = config.scenario;
  YAML::Node root;
  YAML::Node sc = root["scenario"];
  sc["seed"] = s.seed;
  sc["bs_position"] = seq(s.bs_position);
  sc["va_planes"] = YAML::Node(YAML::NodeType::Sequence);
  for (const auto& p : s.va_planes) {
    YAML::Node n;
    n["normal"] = seq(p.normal);
    n["offset"] = p.offset;
    n.SetStyle(YAML::EmitterStyle::Flow);
    sc["va_planes"].push_back(n);
  }
  sc["sp_positions"] = YAML::Node(YAML::NodeType::Sequence);
  for (const auto& p : s.sp_positions) {
    sc["sp_positions"].push_back(seq(p));
  }
  YAML::Node tr = sc["trajectory"];
  tr["speed"] = s.trajectory.speed;
  tr["turn_rate"] = s.trajectory.turn_rate;
  tr["steps"] = s.trajectory.steps;
  tr["step_duration"] = s.trajectory.step_duration;
  tr["initial"]["position"] = seq(s.trajectory.initial.position);
  tr["initial"]["heading"] = s.trajectory.initial.heading;
  tr["initial"]["clock_bias"] = s.trajectory.initial.clock_bias;
  YAML::Node sen = sc["sensor"];
  sen["detection_prob"] = s.sensor.detection_prob;
  sen["fov_radius_sp"] = s.sensor.fov_radius_sp;
  sen["clutter_rate"] = s.sensor.clutter_rate;
  sen["toa_max"] = s.sensor.toa_max;
  sen["noise_std"] = seq(std_from_diag(s.sensor.noise_cov, "sensor noise covariance"));
  sc["process_noise_std"] = seq(std_from_diag(s.process_noise, "process noise covariance"));
  YAML::Node radio = sc["radio"];
  radio["carrier_ghz"] = s.radio.carrier_ghz;
  radio["bandwidth_mhz"] = s.radio.bandwidth_mhz;
  radio["antennas_tx"] = s.radio.antennas_tx;
  radio["antennas_rx"] = s.radio.antennas_rx;
  radio["subcarriers"] = s.radio.subcarriers;
  radio["symbols"] = s.radio.symbols;

  const FilterConfig& f = config.filter;
  YAML::Node fi = root["filter"];
  fi["gamma"] = f.gamma;
  fi["gate"] = f.gate;
  fi["check_contraction"] = f.check_contraction;
  fi["initial_std"] = seq(config.initial_std);
  fi["iplf"]["max_iterations"] = f.iplf.max_iterations;
  fi["iplf"]["kl_threshold"] = f.iplf.kl_threshold;
  fi["prune"]["r_min"] = f.prune.r_min;
  fi["prune"]["kind_w_min"] = f.prune.kind_w_min;
  fi["prune"]["merge_dist"] = f.prune.merge_dist;
  fi["ppp"]["region_min"] = seq(Eigen::Vector3d(config.ppp.region.min()));
  fi["ppp"]["region_max"] = seq(Eigen::Vector3d(config.ppp.region.max()));
  fi["ppp"]["rate_va"] = config.ppp.rate_per_kind[0];
  fi["ppp"]["rate_sp"] = config.ppp.rate_per_kind[1];

  YAML::Node me = root["metrics"];
  me["r_estimate"] = config.r_estimate;
  me["gospa"]["cutoff"] = config.gospa.cutoff;
  me["gospa"]["p"] = config.gospa.p;
  me["gospa"]["alpha"] = config.gospa.alpha;

  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace iplpmb
