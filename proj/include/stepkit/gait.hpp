#pragma once

#include <array>
#include <string>
#include <vector>

#include "stepkit/types.hpp"

namespace stepkit {

enum class Foot : int { LF = 0, RF = 1, LH = 2, RH = 3 };
inline constexpr std::array<Foot, 4> kAllFeet = {Foot::LF, Foot::RF, Foot::LH, Foot::RH};

inline const char* foot_name(Foot f) {
  switch (f) {
    case Foot::LF: return "LF";
    case Foot::RF: return "RF";
    case Foot::LH: return "LH";
    case Foot::RH: return "RH";
  }
  return "?";
}

inline Foot foot_from_name(const std::string& name) {
  for (Foot f : kAllFeet)
    if (name == foot_name(f)) return f;
  throw ValidationError("unknown foot name: " + name);
}

struct GaitPhase {
  std::vector<Foot> swing_feet;
  double duration = 0.0;  // [s]
};

/// Cyclic contact schedule. `horizon` counts contact creations, so a walking
/// gait plans 8 phases ahead while a trot plans 3 phases of 2 contacts.
struct GaitPattern {
  std::string name;
  std::vector<GaitPhase> phases;
  int horizon = 8;
  double step_duration = 0.6;  // swing time of one phase [s]

  double cycle_duration() const {
    double t = 0.0;
    for (const auto& p : phases) t += p.duration;
    return t;
  }
  const GaitPhase& phase(int k) const { return phases[std::size_t(k) % phases.size()]; }
  /// Number of phases needed to create `horizon` contacts starting from the
  /// given position in the cycle.
  int phases_for_horizon(int first_phase = 0) const {
    int count = 0;
    int contacts = 0;
    while (contacts < horizon) {
      contacts += int(phase(first_phase + count).swing_feet.size());
      ++count;
    }
    return count;
  }

  static GaitPattern walk() {
    GaitPattern g;
    g.name = "walk";
    g.horizon = 8;
    g.step_duration = 0.6;
    // Lateral-sequence crawl: hind foot then the front foot of the same side.
    g.phases = {{{Foot::LH}, 0.6}, {{Foot::LF}, 0.6}, {{Foot::RH}, 0.6}, {{Foot::RF}, 0.6}};
    return g;
  }

  static GaitPattern trot() {
    GaitPattern g;
    g.name = "trot";
    g.horizon = 6;
    g.step_duration = 0.3;
    g.phases = {{{Foot::LF, Foot::RH}, 0.3}, {{Foot::RF, Foot::LH}, 0.3}};
    return g;
  }

  static GaitPattern by_name(const std::string& name) {
    if (name == "walk") return walk();
    if (name == "trot") return trot();
    throw ValidationError("unknown gait: " + name);
  }
};

}  // namespace stepkit
