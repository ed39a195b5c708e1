#pragma once

#include <string>
#include <utility>
#include <vector>

#include "eywa/agent.hpp"

namespace eywa {

struct TopologySpec {
  std::string name;  // single | refine | debate | star | custom
  std::size_t n_agents = 1;
  std::size_t rounds = 1;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t final_node = 0;
  // Longest shortest path from any node to final_node. Every generator in the
  // pool keeps all nodes connected to the final node.
  std::size_t diameter = 0;

  std::vector<std::size_t> out_neighbors(std::size_t node) const;
};

const std::vector<std::string>& topology_pool();

// Throws eywa::Error("unknown_topology") / ("invalid_topology").
TopologySpec build_topology(const std::string& name, std::size_t n_agents, std::size_t rounds);
// Default sizes: debate 3 agents, 2 rounds; refine 2 agents, 2 rounds; star 3 agents, 1 round.
TopologySpec default_topology(const std::string& name);
TopologySpec custom_topology(std::size_t n_agents, std::size_t rounds,
                             std::vector<std::pair<std::size_t, std::size_t>> edges, std::size_t final_node);

// Shortest path length, in edges, from injector to final_node.
// Throws eywa::Error("unreachable").
std::size_t reachability_check(const TopologySpec& topology, std::size_t injector);

// A running system: one agent and one state per node.
class MasSystem {
 public:
  MasSystem(const TaskInstance& task, TopologySpec topology, std::vector<AgentSpec> specs,
            const BackendRegistry& registry);

  // Update with the previous round's envelopes, then each node with out-edges
  // thinks once and sends its reply along every out-edge. Agents run in
  // ascending index order and read only the previous round. Throws
  // eywa::Error("backend_failed") after recording the partial round.
  void execute_round(std::size_t round_index);

  // Final-node update, answer instruction, answer loop with retries.
  EpisodeOutcome finish();

  const SystemTrace& trace() const { return trace_; }
  SystemTrace& trace() { return trace_; }
  const std::vector<AgentState>& states() const { return states_; }
  const TopologySpec& topology() const { return topology_; }

 private:
  void deliver(std::size_t node, const std::vector<MessageEnvelope>& inbox);

  const TaskInstance& task_;
  TopologySpec topology_;
  SystemTrace trace_;
  std::vector<Agent> agents_;
  std::vector<AgentState> states_;
  std::vector<MessageEnvelope> pending_;
};

// Runs all rounds and the final answer. The single topology is exactly run_episode.
EpisodeOutcome run_mas(const TaskInstance& task, const TopologySpec& topology, const std::vector<AgentSpec>& specs,
                       const BackendRegistry& registry);

}  // namespace eywa
