#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "evreg/model.hpp"

namespace evreg::datasets {

struct NiwotRow {
  int year;
  double temperature;  // minimum temperature, deg C
  double wind;         // maximum January wind speed, m/s
};

// January maxima at the Niwot Ridge alpine tundra station, 2001-2010.
const std::vector<NiwotRow>& niwot_rows();

// Columns: wind (response), temperature, year.
Dataset niwot();

// Header "year,temperature,wind".
std::string niwot_csv();

// Bundled dataset with the chosen response column. Throws
// std::invalid_argument for unknown names, DataError for unknown columns.
Dataset by_name(std::string_view name, std::string_view response);

}  // namespace evreg::datasets
