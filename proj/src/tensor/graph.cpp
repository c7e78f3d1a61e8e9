#include "fcgaga/graph.hpp"

#include <string>

namespace fcgaga {
namespace {

thread_local Graph default_graph;
thread_local Graph* active_graph = nullptr;
thread_local bool recording_enabled = true;

}  // namespace

void Graph::record(GraphEntry entry) {
  // A consumed tape starts over: the next forward pass rebuilds it.
  consumed_ = false;
  entries_.push_back(std::move(entry));
}

void Graph::backward(const Tensor& loss) {
  if (consumed_) throw GraphError("backward: graph already consumed; rebuild it before another backward pass");
  if (entries_.empty()) throw GraphError("backward: empty graph");
  if (loss.numel() != 1) throw GraphError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  if (entries_.back().output.id() != loss.id()) {
    bool found = false;
    for (const auto& e : entries_) found = found || e.output.id() == loss.id();
    if (!found) throw GraphError("backward: loss was not produced by this graph");
  }

  consumed_ = true;
  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
  entries_.clear();
  entries_.shrink_to_fit();
}

Graph& current_graph() { return active_graph ? *active_graph : default_graph; }

GraphScope::GraphScope() : previous_(active_graph) { active_graph = &graph_; }
GraphScope::~GraphScope() { active_graph = previous_; }

NoGradGuard::NoGradGuard() : previous_(recording_enabled) { recording_enabled = false; }
NoGradGuard::~NoGradGuard() { recording_enabled = previous_; }

bool grad_enabled() { return recording_enabled; }

void backward(const Tensor& loss) { current_graph().backward(loss); }

}  // namespace fcgaga
