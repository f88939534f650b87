#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace citytwin {

/// Machine-readable failure categories shared by every module. The server
/// maps each one to exactly one HTTP status + code string.
enum class Errc {
  range,
  no_parent,
  ordering,
  shape,
  empty_tile,
  not_found,
  validation,
  insufficient_data,
  geometry,
  config,
  no_route,
  blocked_by_scenario,
  no_nearby_road,
  fetch_failed,
  io,
  unauthorized,
  bad_request,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace citytwin
