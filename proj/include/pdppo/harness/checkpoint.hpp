#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pdppo/agents/agent.hpp"
#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"

namespace pdppo::harness {

// Text checkpoint, version 1:
//
//   pdppo-checkpoint 1
//   agent <ppo|pdppo|pdppo1c>
//   networks <count>
//   net <name> <linear|softmax> <tanh|relu>
//   sizes <k> <s0> ... <s(k-1)>
//   groups <g> <n0> ... <n(g-1)>
//   layer <index> <rows> <cols>
//   <rows lines of cols weights, row-major>
//   <one line of rows biases>
//   ... (one layer block per weight matrix, one net block per network)
//
// Values are printed with 17 significant digits, which round-trips doubles.

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void write_net(std::ostream& out, const std::string& name, const nn::MlpNet& net) {
  out << "net " << name << ' ' << nn::to_string(net.head()) << ' '
      << nn::to_string(net.activation()) << '\n';
  out << "sizes " << net.layer_sizes().size();
  for (int s : net.layer_sizes()) out << ' ' << s;
  out << "\ngroups " << net.softmax_groups().size();
  for (int g : net.softmax_groups()) out << ' ' << g;
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const auto& w = net.weights()[k];
    out << "layer " << k << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", w(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
    const auto& b = net.biases()[k];
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      std::snprintf(buf, sizeof(buf), "%.17g", b(r));
      out << (r ? " " : "") << buf;
    }
    out << '\n';
  }
}

inline void expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw ConfigError("malformed checkpoint: expected '" + token + "', got '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw ConfigError(std::string("malformed checkpoint: cannot read ") + what);
  return v;
}

inline std::pair<std::string, nn::MlpNet> read_net(std::istream& in) {
  expect(in, "net");
  const auto name = read_value<std::string>(in, "net name");
  const nn::Head head = nn::head_from_string(read_value<std::string>(in, "head"));
  const nn::Activation act = nn::activation_from_string(read_value<std::string>(in, "activation"));
  expect(in, "sizes");
  std::vector<int> sizes(read_value<std::size_t>(in, "size count"));
  for (int& s : sizes) s = read_value<int>(in, "layer size");
  expect(in, "groups");
  std::vector<int> groups(read_value<std::size_t>(in, "group count"));
  for (int& g : groups) g = read_value<int>(in, "group size");
  nn::MlpNet net(sizes, act, head, groups);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    expect(in, "layer");
    const auto index = read_value<std::size_t>(in, "layer index");
    const auto rows = read_value<Eigen::Index>(in, "rows");
    const auto cols = read_value<Eigen::Index>(in, "cols");
    auto& w = net.weights()[k];
    if (index != k || rows != w.rows() || cols != w.cols()) {
      throw ConfigError("malformed checkpoint: layer header does not match sizes");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = read_value<double>(in, "weight");
    }
    auto& b = net.biases()[k];
    for (Eigen::Index r = 0; r < rows; ++r) b(r) = read_value<double>(in, "bias");
  }
  return {name, std::move(net)};
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const agents::Agent& agent) {
  std::vector<std::pair<std::string, const nn::MlpNet*>> nets{{"actor", &agent.actor()}};
  if (agent.critic_pre()) nets.emplace_back("critic_pre", agent.critic_pre());
  if (agent.critic_post()) nets.emplace_back("critic_post", agent.critic_post());
  out << "pdppo-checkpoint " << kCheckpointVersion << '\n';
  out << "agent " << agents::to_string(agent.kind()) << '\n';
  out << "networks " << nets.size() << '\n';
  for (const auto& [name, net] : nets) detail::write_net(out, name, *net);
}

inline void save_checkpoint(const std::string& path, const agents::Agent& agent) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, agent);
}

struct Checkpoint {
  agents::AgentKind kind = agents::AgentKind::ppo;
  std::map<std::string, nn::MlpNet> nets;
};

inline Checkpoint load_checkpoint(std::istream& in) {
  detail::expect(in, "pdppo-checkpoint");
  const int version = detail::read_value<int>(in, "version");
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint cp;
  detail::expect(in, "agent");
  cp.kind = agents::agent_kind_from_string(detail::read_value<std::string>(in, "agent kind"));
  detail::expect(in, "networks");
  const auto count = detail::read_value<std::size_t>(in, "network count");
  for (std::size_t i = 0; i < count; ++i) {
    auto [name, net] = detail::read_net(in);
    cp.nets.emplace(std::move(name), std::move(net));
  }
  if (!cp.nets.count("actor")) throw ConfigError("checkpoint has no actor network");
  return cp;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

/// Copies checkpointed networks into an agent of the same kind and shape.
inline void restore(agents::Agent& agent, const Checkpoint& cp) {
  if (cp.kind != agent.kind()) throw ConfigError("checkpoint agent kind does not match");
  auto get = [&](const char* name) -> std::optional<nn::MlpNet> {
    auto it = cp.nets.find(name);
    if (it == cp.nets.end()) return std::nullopt;
    return it->second;
  };
  agent.load_networks(cp.nets.at("actor"), get("critic_pre"), get("critic_post"));
}

}  // namespace pdppo::harness
