#include "citytwin/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "citytwin/error.hpp"

namespace citytwin {

namespace {

int digits(std::string_view s, std::size_t at, std::size_t n) {
  if (at + n > s.size()) throw Error(Errc::validation, "truncated timestamp: " + std::string(s));
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data() + at, s.data() + at + n, v);
  if (ec != std::errc{} || ptr != s.data() + at + n) throw Error(Errc::validation, "bad timestamp: " + std::string(s));
  return v;
}

void expect(std::string_view s, std::size_t at, std::string_view allowed) {
  if (at >= s.size() || allowed.find(s[at]) == std::string_view::npos)
    throw Error(Errc::validation, "bad timestamp: " + std::string(s));
}

}  // namespace

TimestampMs parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  const int Y = digits(s, 0, 4);
  expect(s, 4, "-");
  const int M = digits(s, 5, 2);
  expect(s, 7, "-");
  const int D = digits(s, 8, 2);
  expect(s, 10, "Tt ");
  const int h = digits(s, 11, 2);
  expect(s, 13, ":");
  const int m = digits(s, 14, 2);
  expect(s, 16, ":");
  const int sec = digits(s, 17, 2);
  std::size_t at = 19;
  int ms = 0;
  if (at < s.size() && s[at] == '.') {
    ++at;
    int scale = 100, n = 0;
    while (at < s.size() && s[at] >= '0' && s[at] <= '9') {
      ms += (s[at] - '0') * scale;
      scale /= 10;
      ++at;
      ++n;
    }
    if (n == 0) throw Error(Errc::validation, "bad fractional seconds: " + std::string(s));
  }
  int offset_min = 0;
  if (at >= s.size()) throw Error(Errc::validation, "timestamp lacks a zone: " + std::string(s));
  if (s[at] == 'Z' || s[at] == 'z') {
    ++at;
  } else if (s[at] == '+' || s[at] == '-') {
    const int sign = s[at] == '+' ? 1 : -1;
    const int oh = digits(s, at + 1, 2);
    expect(s, at + 3, ":");
    const int om = digits(s, at + 4, 2);
    offset_min = sign * (oh * 60 + om);
    at += 6;
  } else {
    throw Error(Errc::validation, "bad zone designator: " + std::string(s));
  }
  if (at != s.size()) throw Error(Errc::validation, "trailing characters in timestamp: " + std::string(s));

  const year_month_day ymd{year{Y}, month{static_cast<unsigned>(M)}, day{static_cast<unsigned>(D)}};
  if (!ymd.ok() || h > 23 || m > 59 || sec > 60) throw Error(Errc::validation, "timestamp out of range: " + std::string(s));
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  const std::int64_t secs = static_cast<std::int64_t>(days_since) * 86400 + h * 3600 + m * 60 + sec - offset_min * 60;
  return secs * 1000 + ms;
}

std::string format_rfc3339(TimestampMs t) {
  using namespace std::chrono;
  std::int64_t ms = t % 1000;
  std::int64_t secs = t / 1000;
  if (ms < 0) {
    ms += 1000;
    --secs;
  }
  std::int64_t days = secs / 86400;
  std::int64_t rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                              static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  std::string out(buf, n);
  if (ms != 0) {
    std::snprintf(buf, sizeof buf, ".%03d", static_cast<int>(ms));
    out += buf;
  }
  return out + "Z";
}

}  // namespace citytwin
