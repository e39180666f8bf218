#include "mgsddp/errors.hpp"

namespace mgsddp {
namespace {

std::string join(const std::vector<std::string>& issues) {
  std::string out;
  for (const auto& s : issues) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

}  // namespace mgsddp
