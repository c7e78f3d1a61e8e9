#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fcgaga/tensor.hpp"

namespace fcgaga {

/// One recorded primitive application.
struct GraphEntry {
  const char* op = "";
  std::vector<Tensor> inputs;
  Tensor output;
  /// Reads output.grad() and accumulates into the inputs' gradients.
  std::function<void()> backward;
};

/// Define-by-run tape. Entries are appended as primitives execute, so the
/// tape is topologically ordered by construction. A tape can be traversed
/// backward exactly once; recording into a consumed tape starts a new one.
class Graph {
 public:
  void record(GraphEntry entry);
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<GraphEntry> entries_;
  bool consumed_ = false;
};

/// The graph primitives on this thread record into.
Graph& current_graph();

/// Installs a fresh graph as the thread's recording target for its lifetime.
class GraphScope {
 public:
  GraphScope();
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

  Graph& graph() { return graph_; }

 private:
  Graph graph_;
  Graph* previous_;
};

/// Disables recording on this thread (evaluation, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// current_graph().backward(loss)
void backward(const Tensor& loss);

}  // namespace fcgaga
