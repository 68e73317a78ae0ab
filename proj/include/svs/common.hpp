#pragma once

#include <Eigen/Core>

#include <sstream>
#include <stdexcept>
#include <string>

namespace svs {

using Index = Eigen::Index;

// Contract violation (bad shapes, bad arguments, protocol misuse).
class contract_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value detected in a numeric buffer.
class numeric_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem / serialization failure.
class io_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class T, class... Ts>
void format_into(std::ostringstream& os, T&& head, Ts&&... tail) {
  os << head;
  format_into(os, std::forward<Ts>(tail)...);
}
}  // namespace detail

template <class... Ts>
std::string strcat(Ts&&... parts) {
  std::ostringstream os;
  detail::format_into(os, std::forward<Ts>(parts)...);
  return os.str();
}

template <class... Ts>
void require(bool cond, Ts&&... parts) {
  if (!cond) throw contract_error(strcat(std::forward<Ts>(parts)...));
}

}  // namespace svs
