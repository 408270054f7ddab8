#pragma once

#include <string>

#include "fieldpod/calendar.hpp"

namespace fieldpod {

/// What the user enters on the application page.
struct ApplicationInput {
  std::string crop_name;
  std::string soil_name;
  Date plant_date;
  double area_m2 = 0;
  double flow_lph = 0;

  bool operator==(const ApplicationInput&) const = default;
};

}  // namespace fieldpod
