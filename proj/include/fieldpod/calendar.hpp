#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace fieldpod {

/// Calendar date (proleptic Gregorian), stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day);

  /// Parses "YYYY-MM-DD"; throws Error(Parse) on malformed or invalid dates.
  static Date parse(std::string_view text);

  std::chrono::sys_days sys_days() const { return days_; }
  std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
  int year() const;
  /// Day of year, 1..366.
  int day_of_year() const;
  std::string iso() const;

  Date operator+(int n) const { return Date{days_ + std::chrono::days{n}}; }
  Date operator-(int n) const { return Date{days_ - std::chrono::days{n}}; }
  int operator-(Date other) const { return static_cast<int>((days_ - other.days_).count()); }
  Date& operator++() {
    days_ += std::chrono::days{1};
    return *this;
  }
  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

/// UTC timestamp with one-second resolution.
using UtcTime = std::chrono::sys_seconds;

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_utc(UtcTime t);
UtcTime parse_utc(std::string_view text);
Date date_of(UtcTime t);

}  // namespace fieldpod
