#pragma once

#include <optional>
#include <string>

#include "vgent/geometry.hpp"

namespace vgent {

// A ground-truth target or a predicted instance.
struct Instance {
  BBox bbox;
  std::optional<BitMask> mask;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// A detector candidate awaiting selection.
struct Proposal {
  BBox bbox;
  std::optional<BitMask> mask;
  std::string source;
  std::optional<double> score;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

}  // namespace vgent
