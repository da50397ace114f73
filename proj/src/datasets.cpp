#include "evreg/datasets.hpp"

#include <sstream>
#include <stdexcept>
#include <string>

namespace evreg::datasets {

const std::vector<NiwotRow>& niwot_rows() {
  static const std::vector<NiwotRow> rows = {
      {2001, -7.40, 33.42},  {2002, -11.95, 44.04}, {2003, -17.99, 42.92}, {2004, -25.63, 42.51},
      {2005, -16.61, 45.75}, {2006, -10.93, 47.78}, {2007, -9.21, 43.34},  {2008, -26.13, 48.69},
      {2009, -20.27, 43.20}, {2010, -19.00, 43.00},
  };
  return rows;
}

Dataset niwot() {
  std::vector<double> wind, temperature, year;
  for (const auto& r : niwot_rows()) {
    wind.push_back(r.wind);
    temperature.push_back(r.temperature);
    year.push_back(r.year);
  }
  Dataset data(std::move(wind));
  data.add_column("temperature", std::move(temperature));
  data.add_column("year", std::move(year));
  return data;
}

std::string niwot_csv() {
  std::ostringstream out;
  out << "year,temperature,wind\n";
  for (const auto& r : niwot_rows()) out << r.year << ',' << r.temperature << ',' << r.wind << '\n';
  return out.str();
}

Dataset by_name(std::string_view name, std::string_view response) {
  if (name == "niwot") {
    std::istringstream in(niwot_csv());
    return read_csv(in, response);
  }
  throw std::invalid_argument("unknown bundled dataset '" + std::string(name) + "'");
}

}  // namespace evreg::datasets
