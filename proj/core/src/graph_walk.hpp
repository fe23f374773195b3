// Canonical depth-first traversal shared by PENMAN serialization and
// linearization so both emit children in the same order.

#pragma once

#include <string>

#include "xamr/penman.hpp"

namespace xamr::detail {

class GraphVisitor {
 public:
  virtual ~GraphVisitor() = default;
  virtual void open_node(const std::string& var, const std::string& concept_name) = 0;
  virtual void role(const std::string& role) = 0;
  virtual void constant(const std::string& value) = 0;
  // A node already opened earlier in the walk.
  virtual void reference(const std::string& var) = 0;
  virtual void close_node() = 0;
};

// Precondition: validate(g) is empty.
void walk_graph(const AmrGraph& g, GraphVisitor& visitor);

}  // namespace xamr::detail
