#include "fieldpod/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "fieldpod/error.hpp"

namespace fieldpod {

namespace {

template <typename T>
bool parse_int(std::string_view text, T& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                  std::chrono::day{day}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::Parse, "invalid calendar date");
  }
  days_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_int(text.substr(0, 4), y) ||
      !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d)) {
    throw Error(ErrorCode::Parse, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::Parse, "not a valid Gregorian date: '" + std::string(text) + "'");
  }
  return Date{std::chrono::sys_days{ymd}};
}

int Date::year() const { return static_cast<int>(ymd().year()); }

int Date::day_of_year() const {
  const auto jan1 = std::chrono::sys_days{ymd().year() / std::chrono::January / 1};
  return static_cast<int>((days_ - jan1).count()) + 1;
}

std::string Date::iso() const {
  const auto v = ymd();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
  return buf;
}

std::string format_utc(UtcTime t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", Date{day}.iso().c_str(),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

UtcTime parse_utc(std::string_view text) {
  int hh = 0, mm = 0, ss = 0;
  if (text.size() != 20 || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      text[19] != 'Z' || !parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm) ||
      !parse_int(text.substr(17, 2), ss) || hh > 23 || mm > 59 || ss > 59) {
    throw Error(ErrorCode::Parse, "expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(text) + "'");
  }
  const Date d = Date::parse(text.substr(0, 10));
  return UtcTime{d.sys_days()} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss};
}

Date date_of(UtcTime t) { return Date{std::chrono::floor<std::chrono::days>(t)}; }

}  // namespace fieldpod
