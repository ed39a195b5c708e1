#include "eywa/mas.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "eywa/error.hpp"

namespace eywa {

std::vector<std::size_t> TopologySpec::out_neighbors(std::size_t node) const {
  std::vector<std::size_t> out;
  for (const auto& [from, to] : edges)
    if (from == node) out.push_back(to);
  return out;
}

const std::vector<std::string>& topology_pool() {
  static const std::vector<std::string> pool = {"single", "refine", "debate", "star"};
  return pool;
}

namespace {

constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> distances_from(const TopologySpec& t, std::size_t source) {
  std::vector<std::size_t> dist(t.n_agents, kUnreached);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    for (auto v : t.out_neighbors(u))
      if (dist[v] == kUnreached) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  return dist;
}

void finalize(TopologySpec& t) {
  if (t.n_agents == 0) throw Error("invalid_topology", "topology needs at least one agent");
  if (t.rounds == 0) throw Error("invalid_topology", "topology needs at least one round");
  if (t.final_node >= t.n_agents) throw Error("invalid_topology", "final node out of range");
  for (const auto& [from, to] : t.edges)
    if (from >= t.n_agents || to >= t.n_agents || from == to) throw Error("invalid_topology", "edge out of range");
  t.diameter = 0;
  for (std::size_t i = 0; i < t.n_agents; ++i) {
    auto d = distances_from(t, i)[t.final_node];
    if (d == kUnreached)
      throw Error("invalid_topology", "node " + std::to_string(i) + " cannot reach the final node");
    t.diameter = std::max(t.diameter, d);
  }
}

}  // namespace

TopologySpec build_topology(const std::string& name, std::size_t n_agents, std::size_t rounds) {
  TopologySpec t;
  t.name = name;
  t.n_agents = n_agents;
  t.rounds = rounds;
  if (name == "single") {
    if (n_agents != 1) throw Error("invalid_topology", "single topology has exactly 1 agent");
  } else if (name == "refine") {
    if (n_agents != 2) throw Error("invalid_topology", "refine topology has exactly 2 agents (author, critic)");
    t.edges = {{0, 1}, {1, 0}};
  } else if (name == "debate") {
    if (n_agents < 1) throw Error("invalid_topology", "debate needs at least 1 agent");
    for (std::size_t i = 0; i < n_agents; ++i)
      for (std::size_t j = 0; j < n_agents; ++j)
        if (i != j) t.edges.emplace_back(i, j);
  } else if (name == "star") {
    if (n_agents < 2) throw Error("invalid_topology", "star needs at least 2 agents");
    t.final_node = n_agents - 1;
    for (std::size_t i = 0; i + 1 < n_agents; ++i) t.edges.emplace_back(i, t.final_node);
  } else {
    throw Error("unknown_topology", "unknown topology '" + name + "'");
  }
  finalize(t);
  return t;
}

TopologySpec default_topology(const std::string& name) {
  if (name == "single") return build_topology(name, 1, 1);
  if (name == "refine") return build_topology(name, 2, 2);
  if (name == "debate") return build_topology(name, 3, 2);
  if (name == "star") return build_topology(name, 3, 1);
  throw Error("unknown_topology", "unknown topology '" + name + "'");
}

TopologySpec custom_topology(std::size_t n_agents, std::size_t rounds,
                             std::vector<std::pair<std::size_t, std::size_t>> edges, std::size_t final_node) {
  TopologySpec t;
  t.name = "custom";
  t.n_agents = n_agents;
  t.rounds = rounds;
  t.edges = std::move(edges);
  t.final_node = final_node;
  if (n_agents == 0 || final_node >= n_agents) throw Error("invalid_topology", "final node out of range");
  // Custom graphs may leave nodes disconnected; the diameter then only covers
  // the nodes that can reach the final node.
  for (std::size_t i = 0; i < n_agents; ++i) {
    auto d = distances_from(t, i)[final_node];
    if (d != kUnreached) t.diameter = std::max(t.diameter, d);
  }
  return t;
}

std::size_t reachability_check(const TopologySpec& topology, std::size_t injector) {
  if (injector >= topology.n_agents) throw Error("invalid_topology", "injector out of range");
  auto d = distances_from(topology, injector)[topology.final_node];
  if (d == kUnreached)
    throw Error("unreachable", "final node " + std::to_string(topology.final_node) + " is unreachable from node " +
                                   std::to_string(injector));
  return d;
}

// ---------------------------------------------------------------- execution

MasSystem::MasSystem(const TaskInstance& task, TopologySpec topology, std::vector<AgentSpec> specs,
                     const BackendRegistry& registry)
    : task_(task), topology_(std::move(topology)) {
  if (specs.size() != topology_.n_agents)
    throw Error("config", "topology '" + topology_.name + "' needs " + std::to_string(topology_.n_agents) +
                              " agent specs, got " + std::to_string(specs.size()));
  agents_.reserve(specs.size());
  for (auto& s : specs) agents_.emplace_back(std::move(s), registry, trace_);
  for (const auto& a : agents_) states_.push_back(a.start(task_));
}

void MasSystem::deliver(std::size_t node, const std::vector<MessageEnvelope>& inbox) {
  std::string merged;
  for (const auto& env : inbox) {
    if (env.to != node) continue;
    merged += merged.empty() ? "Messages from other agents:" : "";
    merged += "\n\n[" + agents_[env.from].spec().agent_id + "]:\n" + env.body;
  }
  if (!merged.empty()) states_[node].context_entries.push_back({"user", merged, {}});
}

void MasSystem::execute_round(std::size_t round_index) {
  std::vector<MessageEnvelope> sent;
  auto snapshot = [&] {
    std::vector<std::vector<ContextEntry>> s;
    for (const auto& st : states_) s.push_back(st.context_entries);
    trace_.round_states.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < agents_.size(); ++i) deliver(i, pending_);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    auto targets = topology_.out_neighbors(i);
    if (targets.empty()) continue;
    std::optional<std::string> reply;
    try {
      reply = agents_[i].think(states_[i]);
    } catch (const Error& e) {
      trace_.events.push_back({"round_aborted", "round " + std::to_string(round_index) + ", " +
                                                    agents_[i].spec().agent_id + ": " + e.what()});
      trace_.envelopes.insert(trace_.envelopes.end(), sent.begin(), sent.end());
      snapshot();
      throw Error("backend_failed", e.what());
    }
    std::string body = reply ? *reply : states_[i].context_entries.back().content;
    for (auto to : targets) sent.push_back({i, to, round_index, body});
  }
  trace_.envelopes.insert(trace_.envelopes.end(), sent.begin(), sent.end());
  snapshot();
  pending_ = std::move(sent);
}

EpisodeOutcome MasSystem::finish() {
  std::size_t f = topology_.final_node;
  deliver(f, pending_);
  pending_.clear();
  auto pre_answer = states_[f].context_entries;

  std::string instruction;
  if (topology_.name == "debate")
    instruction = "Give your final answer now. Synthesize the other agents' latest messages into it.";
  else if (topology_.name == "refine")
    instruction = "Give your final answer now, revised with the critic's feedback.";
  else
    instruction = "Give your final answer now, combining the messages you received.";
  states_[f].context_entries.push_back({"user", instruction, {}});

  EpisodeOutcome out = agents_[f].answer(states_[f]);
  trace_.pre_answer_state = std::move(pre_answer);
  out.trace = trace_;
  return out;
}

EpisodeOutcome run_mas(const TaskInstance& task, const TopologySpec& topology, const std::vector<AgentSpec>& specs,
                       const BackendRegistry& registry) {
  if (topology.name == "single") {
    if (specs.size() != 1) throw Error("config", "single topology needs exactly 1 agent spec");
    return run_episode(task, specs.front(), registry);
  }
  MasSystem system(task, topology, specs, registry);
  for (std::size_t r = 0; r < topology.rounds; ++r) {
    try {
      system.execute_round(r);
    } catch (const Error& e) {
      EpisodeOutcome out;
      out.status = EpisodeStatus::kBackendFailed;
      out.failure_cause = e.what();
      out.trace = system.trace();
      out.transcript = system.states()[topology.final_node].context_entries;
      return out;
    }
  }
  return system.finish();
}

}  // namespace eywa
