#pragma once

#include <string>
#include <vector>

#include "cfps/logic.hpp"

namespace cfps {

/// One reasoning step: supporting literals, the applied rule, and the derived literal.
struct Step {
  int index = 0;  // 1-based position within its chain
  std::vector<Literal> supports;
  Rule rule;
  Literal conclusion;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Same content, ignoring position.
inline bool same_content(const Step& a, const Step& b) {
  return a.supports == b.supports && a.rule == b.rule && a.conclusion == b.conclusion;
}

/// Single-line symbolic rendering, e.g. `[F9] xor [F12] | [F12]=False => [F9]=True`.
std::string render_step(const Step& s);

}  // namespace cfps
